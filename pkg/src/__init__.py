"""Toolkit for Lagrange optimal control problems and their time reparameterization."""
