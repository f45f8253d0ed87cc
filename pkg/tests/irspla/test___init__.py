"""Tests for the package namespace."""

import irspla


def test_version():
    """The package exposes a version string."""
    assert isinstance(irspla.__version__, str)
    assert irspla.__version__


def test_public_names():
    """Everything in ``__all__`` resolves."""
    for name in irspla.__all__:
        assert hasattr(irspla, name), name
