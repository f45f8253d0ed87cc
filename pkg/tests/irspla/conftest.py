"""Shared fixtures: a tiny experiment configuration that runs in seconds."""

import pytest

TINY_CONFIG = """\
experiment:
  name: tiny
  seed: 5
  runs: 2
  iterations: 2
  per_class_train: 6
  per_class_test: 4
  initial_per_class: 2
  strategies: [salu, random]
acquisition:
  m1: 3
  m2: 4
model:
  kernel: fixed
  signal_variance: 1.0
  lengthscale: 2.0
scenario:
  n_y: 2
  n_z: 2
"""


@pytest.fixture
def tiny_config_text():
    """YAML text of the tiny experiment."""
    return TINY_CONFIG


@pytest.fixture
def tiny_config_path(tmp_path):
    """The tiny experiment written to a file."""
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return path
