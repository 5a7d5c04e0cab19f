"""Simulator for a two-direction, high-frequency bus line.

The package covers the full workflow: synthesizing or ingesting raw
operational logs, fitting empirical travel/dwell models and
origin-destination demand, running seeded Monte-Carlo replications of a
service day, and reporting punctuality, regularity and occupancy KPIs
under configurable passenger-growth scenarios.
"""

__version__ = "0.1.0"
