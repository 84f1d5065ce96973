"""poreforge: 3D porous microstructure reconstruction from a single 2D reference image."""

__version__ = "0.1.0"
