"""Scenario-based testing of learning-enabled driving controllers."""

__version__ = "0.1.0"
