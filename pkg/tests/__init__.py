"""Tests for weibull-ce."""
