"""Multi-level influence-reaction simulation with Game-of-Life case studies."""

__version__ = "0.1.0"
