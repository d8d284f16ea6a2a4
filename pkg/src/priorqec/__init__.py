"""Prior-informed BP+OSD decoding of surface codes.

Exact and weight-capped logical failure evaluation, closed-loop prior
learning from decoder soft outputs, and in-situ gate calibration.
"""

from ._backend import BACKEND
from .bposd import BpOsdDecoder, DecodeResult, PriorVector, decode
from .codes import CssCode, build_code, rotated_surface, unrotated_surface
from .gf2 import BitMatrix, BitVector

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BitMatrix",
    "BitVector",
    "BpOsdDecoder",
    "CssCode",
    "DecodeResult",
    "PriorVector",
    "build_code",
    "decode",
    "rotated_surface",
    "unrotated_surface",
]
