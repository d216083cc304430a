"""Community structure in node embeddings versus structural pair features."""

__version__ = "0.1.0"
