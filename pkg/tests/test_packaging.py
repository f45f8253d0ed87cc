"""The installed distribution matches what ``pyproject.toml`` declares.

Self-contained: no fixtures, so it runs before anything else is set up.
"""

from __future__ import annotations

import tomllib
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as installed_version
from pathlib import Path

import pytest

# `.absolute()`, not `.resolve()`: a symlinked tests folder must not move the root.
_ROOT = Path(__file__).absolute().parent.parent


def _project_table() -> dict:
    """Return the ``[project]`` table from pyproject.toml, skipping when unusable."""
    pyproject = _ROOT / "pyproject.toml"
    if not pyproject.is_file():
        pytest.skip("no pyproject.toml at the project root")
    with pyproject.open("rb") as handle:
        table = tomllib.load(handle).get("project")
    if not isinstance(table, dict):
        pytest.skip("pyproject.toml declares no [project] table")
    return table


def test_the_installed_version_matches_pyproject() -> None:
    """The installed ``irspla`` reports the declared version."""
    project = _project_table()
    declared = project.get("version")
    if not isinstance(declared, str):
        pytest.skip("[project].version is dynamic")
    try:
        found = installed_version(project["name"])
    except PackageNotFoundError:
        pytest.skip(f"{project['name']!r} is not installed as a distribution")
    assert found == declared, f"pyproject.toml declares {declared!r} but the installed package reports {found!r}"


def test_console_script_points_at_cli() -> None:
    """The ``irspla`` command resolves to the CLI entry point."""
    project = _project_table()
    target = project.get("scripts", {}).get("irspla")
    assert target == "irspla.cli:main"
    module, _, attr = target.partition(":")
    imported = __import__(module, fromlist=[attr])
    assert callable(getattr(imported, attr))
