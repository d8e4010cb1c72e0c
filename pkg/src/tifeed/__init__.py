"""Threat-intelligence feed characterization, rule-mined labeling and
exploitation-event classification."""

__version__ = "0.1.0"
