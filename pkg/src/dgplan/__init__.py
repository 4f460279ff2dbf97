"""Two-stage DG siting/sizing with chance-constrained storage for radial feeders."""
__version__ = "0.1.0"
