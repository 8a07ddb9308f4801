"""Spectral gaps of Kac-type random collision walks."""

__version__ = "0.1.0"

from .collision_models import AngularDensity, ModelSpec, ScatteringWeight  # noqa: E402
from .gap_engine import GapReport, kac_gap_exact, theorem71_check  # noqa: E402
from .k_spectra import SpectrumTable, k_extremes, kac_alpha  # noqa: E402

__all__ = [
    "AngularDensity",
    "GapReport",
    "ModelSpec",
    "ScatteringWeight",
    "SpectrumTable",
    "k_extremes",
    "kac_alpha",
    "kac_gap_exact",
    "theorem71_check",
]
