"""Tests for the irspla package."""
