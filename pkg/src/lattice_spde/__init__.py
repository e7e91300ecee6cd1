"""Lattice SPDE - mollified lattice scheme for elliptic equations driven by coloured noise."""

__version__ = "0.1.0"
