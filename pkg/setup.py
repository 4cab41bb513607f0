"""Build script for the optional Cython kernels.

The package works without the extension; ``t3s2s.kernels`` falls back to
numpy implementations when ``t3s2s._ckernels`` cannot be imported.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("T3S2S_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "t3s2s._ckernels",
                    [os.path.join("src", "t3s2s", "_ckernels.pyx")],
                    include_dirs=[np.get_include()],
                    # keep elementwise float ops identical to the numpy path
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
