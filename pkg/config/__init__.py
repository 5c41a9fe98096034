"""Configuration package for solver, checks and built-in problems."""
