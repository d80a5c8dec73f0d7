"""
Shared fixtures and utilities for the CLI integration tests.

Every test here drives the real ``schatten_cli`` script in a fresh
subprocess, so stdout, stderr and exit codes are exactly what a user sees.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path
from typing import Any

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[2]
CLI_SCRIPT = PROJECT_ROOT / "src" / "schatten_cli.py"

# Guards against hangs in a broken build. Override with SCHATTEN_TEST_TIMEOUT.
DEFAULT_TIMEOUT = int(os.getenv("SCHATTEN_TEST_TIMEOUT", "600"))

_INTEGRATION_DIR = Path(__file__).resolve().parent


def pytest_collection_modifyitems(config, items):
    """Auto-tag integration tests by directory so test files stay decorator-free."""
    for item in items:
        item_path = Path(str(item.fspath)).resolve()
        if _INTEGRATION_DIR in item_path.parents:
            item.add_marker(pytest.mark.integration)


def _subprocess_env(extra_env: dict[str, str] | None) -> dict[str, str]:
    env = os.environ.copy()
    # src/ on the path so the script runs from a source checkout
    src = str(PROJECT_ROOT / "src")
    env["PYTHONPATH"] = os.pathsep.join(
        part for part in (src, env.get("PYTHONPATH")) if part
    )
    env.setdefault("PYTHONUNBUFFERED", "1")
    # Forward coverage subprocess config so the child process is instrumented
    # when pytest runs with --cov.
    coverage_rc = PROJECT_ROOT / ".coveragerc"
    if coverage_rc.exists():
        env.setdefault("COVERAGE_PROCESS_START", str(coverage_rc))
    if extra_env:
        env.update(extra_env)
    return env


def run_cli(
    args: list[str],
    cwd: Path | None = None,
    extra_env: dict[str, str] | None = None,
) -> subprocess.CompletedProcess[str]:
    """Run ``schatten_cli.py`` with ``args`` and capture its output."""
    return subprocess.run(
        [sys.executable, str(CLI_SCRIPT), *args],
        cwd=cwd,
        env=_subprocess_env(extra_env),
        capture_output=True,
        text=True,
        timeout=DEFAULT_TIMEOUT,
        check=False,
    )


def run_json(args: list[str], **kwargs: Any) -> dict[str, Any]:
    """Run a command that must succeed and parse its JSON stdout."""
    result = run_cli(args, **kwargs)
    assert result.returncode == 0, result.stderr
    return json.loads(result.stdout)


@pytest.fixture
def tiny_spec(tmp_path: Path) -> Path:
    """A one-layer, width-8 synthetic spec in F64."""
    path = tmp_path / "tiny.json"
    path.write_text(
        json.dumps(
            {"depth": 1, "width": 8, "head_dim": 4, "intermediate": 16, "dtype": "F64"}
        ),
        encoding="utf-8",
    )
    return path
