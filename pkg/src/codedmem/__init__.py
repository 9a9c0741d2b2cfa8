"""Simulation and analysis toolkit for erasure-coded atomic storage protocols."""

__version__ = "0.1.0"
