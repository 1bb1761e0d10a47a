import math
import os
import subprocess

import pytest

import framebench as fb


def test_canonical_game():
    a = fb.analyze_game("canonical_pd")
    assert a["dominant_p1"] == "Defect"
    assert a["dominant_p2"] == "Defect"
    assert a["is_prisoners_dilemma"]
    assert a["pure_nash"] == [{"p1": "Defect", "p2": "Defect", "payoffs": [1.0, 1.0]}]
    assert fb.analyze_game(fb.canonical_pd()) == a


def test_stag_hunt_is_not_a_dilemma():
    stag = {
        "strategies_p1": ["Stag", "Hare"],
        "strategies_p2": ["Stag", "Hare"],
        "payoffs": [[[4, 4], [0, 3]], [[3, 0], [3, 3]]],
    }
    a = fb.analyze_game(stag)
    assert not a["is_prisoners_dilemma"]
    assert a["dominant_p1"] is None
    assert len(a["pure_nash"]) == 2


def test_bad_matrix_raises():
    with pytest.raises(fb.StructuralError):
        fb.analyze_game("no_such_game")


def test_statistics():
    assert fb.format_sig(fb.wald_half_width(0.5, 600)) == "0.040"
    assert fb.format_sig(fb.wald_half_width(0.5, 2000)) == "0.022"
    lo, hi = fb.wilson_interval(0.5, 20)
    assert 0.0 <= lo < 0.5 < hi <= 1.0
    assert fb.fleiss_kappa([[3, 0], [0, 3], [3, 0]]) == 1.0
    cv = fb.cramers_v([[10, 20, 30], [30, 20, 10]])
    assert math.isclose(cv["cramers_v"], math.sqrt(1 / 6), rel_tol=1e-12)
    assert cv["dof"] == 2
    with pytest.raises(fb.DegenerateDataError):
        fb.cramers_v([[1, 2], [0, 0]])


def test_scores():
    m = fb.score([0.5] * 10, [0, 1] * 5)
    assert m["brier"] == 0.25
    assert m["auroc"] == 0.5
    assert fb.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_pipeline_round_trip(mock_config):
    fb.set_log_level("warn")
    for stage in ("generate", "evaluate", "judge", "analyze", "predict"):
        res = fb.run(stage, mock_config)
        assert res.ok, res.message
    report = mock_config.parent / "run" / "report" / "report.json"
    first = report.read_bytes()
    assert fb.run("analyze", mock_config).ok
    assert report.read_bytes() == first
    again = fb.run("evaluate", mock_config)
    assert again.ok
    assert again.details["new_records"] == 0


def test_errors_map_to_exit_codes(tmp_path, mock_config):
    missing = fb.run("analyze", tmp_path / "absent.json")
    assert missing.exit_code == 2
    assert fb.run("analyze", mock_config).exit_code == 3
    with pytest.raises(ValueError):
        fb.run("train", mock_config)


@pytest.mark.skipif("FRAMEBENCH_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_help_and_exit_code(mock_config):
    cli = os.environ["FRAMEBENCH_CLI"]
    assert subprocess.run([cli, "--help"], capture_output=True).returncode == 0
    res = subprocess.run([cli, "analyze", "--config", str(mock_config)], capture_output=True, text=True)
    assert res.returncode == 3
    assert res.stderr.startswith("error: ")
