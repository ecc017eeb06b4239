"""Steklov eigenvalues of balls, spherical shells and shells with a tube removed."""

from .exact import (
    Spectrum,
    SpectrumEntry,
    annulus_spectrum,
    ball_spectrum,
    euclidean_bound,
    normalized,
)

__all__ = [
    "Spectrum",
    "SpectrumEntry",
    "annulus_spectrum",
    "ball_spectrum",
    "euclidean_bound",
    "normalized",
]
