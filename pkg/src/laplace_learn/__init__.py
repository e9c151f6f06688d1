"""Learning graph Laplacian matrices from data by block-coordinate descent."""

__version__ = "0.1.0"
