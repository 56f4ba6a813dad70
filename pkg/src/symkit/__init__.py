"""Scene-text tracking toolkit: feature calibration math, adaptive inference,
benchmark curation and single-object tracking evaluation."""

from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
