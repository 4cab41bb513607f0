import json
from pathlib import Path

from t3s2s import default_scene_path


def scene_variant(tmp_path: Path, name: str = "variant", base: Path | None = None, **changes) -> Path:
    """Copy a bundled scene with field overrides; the sketch path is made absolute."""
    base = Path(base or default_scene_path())
    doc = json.loads(base.read_text())
    if doc.get("sketch"):
        doc["sketch"] = str((base.parent / doc["sketch"]).resolve())
    doc.update(changes)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return path
