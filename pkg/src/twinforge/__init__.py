"""Skill-program generation, seeded simulation and data tooling for tabletop manipulation."""

__version__ = "0.1.0"
