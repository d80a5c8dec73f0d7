"""Targeted CLI option behavior tests.
These tests pin down specific user-visible CLI behaviors that the
integration tests don't actively verify, like flag-over-env-var
precedence and the exit code of each error class.

Add tests sparingly here. If a behavior is already exercised end-to-end
by an integration test, prefer adding an assertion there instead of
adding an in-process Click test.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from unittest.mock import patch

from _test_env import (
    near_low_rank_theory_weights,
    write_spec_json,
    write_theory_file,
)
from click.testing import CliRunner

import schatten_cli
from schatten_bounds.verify import SuiteResult


def _invoke(args: list[str], env: dict[str, str] | None = None):
    runner = CliRunner()
    return runner.invoke(
        schatten_cli.main,
        args,
        env={**os.environ, **(env or {})},
        catch_exceptions=False,
    )


def _analyze_config(args: list[str], env: dict[str, str], tmp_path: Path) -> dict:
    """Run ``analyze`` on the tiny spec and return the echoed configuration."""
    spec = write_spec_json(tmp_path)
    result = _invoke([*args, "analyze", str(spec), "--grid", "2"], env)
    assert result.exit_code == 0, result.output
    return json.loads(result.stdout)["config"]


def test_command_line_flag_overrides_env_var(tmp_path: Path) -> None:
    """``--workers`` must win over ``SCHATTEN_WORKERS``.

    This is Click's documented default precedence (CLI > env); the test
    keeps a future option refactor from silently flipping it.
    """
    config = _analyze_config(
        ["--workers", "2"], {"SCHATTEN_WORKERS": "3"}, tmp_path
    )
    assert config["workers"] == 2


def test_env_var_used_when_flag_absent(tmp_path: Path) -> None:
    config = _analyze_config([], {"SCHATTEN_WORKERS": "3"}, tmp_path)
    assert config["workers"] == 3


def test_flag_overrides_config_file(tmp_path: Path) -> None:
    """Config file values apply unless a flag names the same key."""
    config_file = tmp_path / "config.json"
    config_file.write_text(
        json.dumps({"workers": 4, "bound": {"n": 500}}), encoding="utf-8"
    )
    config = _analyze_config(
        ["--config", str(config_file), "--workers", "1"], {}, tmp_path
    )
    assert config["workers"] == 1
    assert config["bound"]["n"] == 500


def test_activation_sets_lipschitz_constant(tmp_path: Path) -> None:
    config = _analyze_config(["--activation", "relu"], {}, tmp_path)
    assert config["activation"] == "relu"
    assert config["bound"]["act_lipschitz"] == 1.0


def test_corrupt_checkpoint_exits_2(tmp_path: Path) -> None:
    path = tmp_path / "bad.safetensors"
    path.write_bytes(b"\x10\x00\x00\x00\x00\x00\x00\x00{not json at all}")
    result = _invoke(["analyze", str(path)])
    assert result.exit_code == 2
    error = json.loads(result.stdout)["error"]
    assert error["kind"] == "parse"
    assert error["reason"] == "malformed_json"


def test_missing_checkpoint_exits_2(tmp_path: Path) -> None:
    result = _invoke(["analyze", str(tmp_path / "absent.safetensors")])
    assert result.exit_code == 2
    assert json.loads(result.stdout)["error"]["reason"] == "io"


def test_invalid_config_file_exits_2(tmp_path: Path) -> None:
    config_file = tmp_path / "config.json"
    config_file.write_text('{"grid_size": 0}', encoding="utf-8")
    result = _invoke(["--config", str(config_file), "regime-table"])
    assert result.exit_code == 2
    assert json.loads(result.stdout)["error"]["kind"] == "input"


def test_unknown_suite_is_usage_error() -> None:
    result = _invoke(["verify", "--suite", "bogus"])
    assert result.exit_code == 64
    assert "Unknown suite(s) bogus" in result.output


def test_mixed_unknown_suite_is_usage_error() -> None:
    """One unknown name fails the run even when the others are valid."""
    with patch.object(schatten_cli, "run_suites") as run_suites:
        result = _invoke(["verify", "--suite", "norms,bogus", "--trials", "1"])
    assert result.exit_code == 64
    assert "Unknown suite(s) bogus" in result.output
    run_suites.assert_not_called()


def test_unknown_suite_in_file_is_usage_error(tmp_path: Path) -> None:
    suites_file = tmp_path / "suites.txt"
    suites_file.write_text("# selected\nnorms\nbogus\n", encoding="utf-8")
    result = _invoke(["verify", "--suite", str(suites_file)])
    assert result.exit_code == 64
    assert "Unknown suite(s) bogus" in result.output


def test_unknown_option_is_usage_error() -> None:
    assert _invoke(["analyze", "--no-such-flag", "x"]).exit_code == 64


def test_property_violation_exits_1() -> None:
    failing = SuiteResult("norms", trials=1, seed=0)
    failing.prop("transpose_invariance").check(1.0, 0.0, {"trial": 0})
    with patch("schatten_cli.run_suites", return_value=[failing]):
        result = _invoke(["verify", "--suite", "norms", "--trials", "1"])
    assert result.exit_code == 1
    summary = json.loads(result.stdout)
    assert summary["passed"] is False
    assert summary["error"]["kind"] == "property"
    assert summary["error"]["instance"]["trial"] == 0


def test_verify_passes() -> None:
    result = _invoke(["verify", "--suite", "parser", "--trials", "2"])
    assert result.exit_code == 0, result.output
    summary = json.loads(result.stdout)
    assert summary["passed"] is True
    assert [suite["suite"] for suite in summary["suites"]] == ["parser"]


def test_synth_needs_shape() -> None:
    result = _invoke(["synth", "--width", "8", "--out", "unused.safetensors"])
    assert result.exit_code == 64


def test_synth_invalid_shape_exits_2(tmp_path: Path) -> None:
    out = tmp_path / "x.safetensors"
    result = _invoke(
        ["synth", "-L", "1", "-N", "10", "--head-dim", "4", "--out", str(out)]
    )
    assert result.exit_code == 2
    assert not out.exists()


def test_compare_writes_chart(tmp_path: Path) -> None:
    shallow = write_spec_json(tmp_path, name="shallow", depth=1)
    deep = write_spec_json(tmp_path, name="deep", depth=2)
    chart = tmp_path / "curve.svg"
    result = _invoke(
        ["compare", str(deep), str(shallow), "--grid", "2", "--plot", str(chart)]
    )
    assert result.exit_code == 0, result.output
    lines = result.stdout.splitlines()
    assert lines[0] == "L,N,B_ours_raw,B_edelman_raw,B_ours_norm,B_edelman_norm"
    assert lines[1].startswith("1,8,")
    assert chart.read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_compare_without_plot_writes_no_chart(tmp_path: Path) -> None:
    paths = [
        str(write_spec_json(tmp_path, name=f"d{depth}", depth=depth))
        for depth in (1, 2)
    ]
    result = _invoke(["compare", *paths, "--grid", "2"])
    assert result.exit_code == 0, result.output
    assert not list(tmp_path.glob("*.svg"))


def test_posthoc_applies_rank_tol(tmp_path: Path) -> None:
    """``posthoc --rank-tol`` changes the p = 0 ranks the selection sees."""
    path = str(write_theory_file(tmp_path, near_low_rank_theory_weights()))
    default = _invoke(["posthoc", path, "--grid", "3"])
    loose = _invoke(["posthoc", path, "--grid", "3", "--rank-tol", "0.01"])
    assert default.exit_code == 0, default.output
    assert loose.exit_code == 0, loose.output
    default_records = json.loads(default.stdout)["selection"]["records"]
    loose_record = json.loads(loose.stdout)
    assert all(r["p"] > 0.0 for r in default_records)
    assert [r["p"] for r in loose_record["selection"]["records"]] == [0.0] * 3
    assert loose_record["provenance"]["rank_tol"] == 0.01
