"""Slice-aware mode selection simulator for D2D-capable LTE/NR HetNets."""

__version__ = "0.1.0"
