"""Exact arithmetic for Kisin modules, Breuil modules and filtered (phi, N)-modules."""
from .errors import (KisinBreuilError, NoConvergence, NotEisenstein, NotUnipotent,
                     ParseError, ProfileError)
from .padic_core import EisensteinData
from .rings import FRAK, S, SIGMA, PrecisionProfile, RingTag, get_ring

__version__ = "0.1.0"

__all__ = ["EisensteinData", "PrecisionProfile", "RingTag", "get_ring", "FRAK", "SIGMA", "S",
           "KisinBreuilError", "NoConvergence", "NotEisenstein", "NotUnipotent",
           "ParseError", "ProfileError"]
