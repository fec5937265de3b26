"""Mass-lumped P1 finite elements for tumour growth with active motion."""
__version__ = "0.1.0"
