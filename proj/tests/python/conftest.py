import json
import pathlib

import pytest

REPO = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture
def mock_config(tmp_path):
    """Copy of the bundled mock pipeline config with storage under tmp_path."""
    cfg = json.loads((REPO / "configs" / "mock_pipeline.json").read_text())
    cfg["storage"] = {"dir": str(tmp_path / "run")}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path
