"""Closed-form Steklov spectra of the unit ball and the spherical shell B_1 \\ B_eps.

Harmonic functions separate as ``alpha(rho) * Y_k`` with ``Y_k`` a degree-k
spherical harmonic and ``alpha(rho) = a rho^k + b rho^(2-n-k)``.  Imposing the
Steklov condition on both spheres gives, for every k, a quadratic in sigma
whose two roots carry the multiplicity of the degree-k harmonics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence


class NumericalFailure(ArithmeticError):
    """Raised when a computation that cannot fail on valid input does."""


@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    multiplicity: int
    label: str = ""
    members: tuple = ()


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues with multiplicities and provenance labels."""

    entries: tuple[SpectrumEntry, ...]

    def __post_init__(self):
        values = [e.value for e in self.entries]
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("spectrum values must be nondecreasing")
        if any(e.multiplicity < 1 for e in self.entries):
            raise ValueError("multiplicities must be positive")

    def __iter__(self) -> Iterator[SpectrumEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def values(self) -> list[float]:
        return [e.value for e in self.entries]

    @property
    def multiplicities(self) -> list[int]:
        return [e.multiplicity for e in self.entries]

    def expanded(self) -> list[float]:
        """Eigenvalues repeated according to multiplicity."""
        out = []
        for e in self.entries:
            out.extend([e.value] * e.multiplicity)
        return out

    def first_nonzero(self, zero_tol: float = 1e-8) -> float:
        for e in self.entries:
            if e.value > zero_tol:
                return e.value
        raise ValueError("spectrum has no nonzero entry")

    def rows(self) -> list[dict]:
        return [
            {"value": e.value, "multiplicity": e.multiplicity, "label": e.label}
            for e in self.entries
        ]


@dataclass(frozen=True)
class AnnulusMode:
    """One separation block (n, k, eps) with its quadratic and both roots."""

    n: int
    k: int
    eps: float
    A: float
    B: float
    C: float
    sigma_low: float
    sigma_high: float

    def residual(self, sigma: float) -> float:
        return self.A * sigma * sigma + self.B * sigma + self.C


@dataclass(frozen=True)
class NormalizedValue:
    sigma: float
    boundary_volume: float
    n: int
    value: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "value", self.sigma * self.boundary_volume ** (1.0 / (self.n - 1))
        )


def _check_int(name: str, x, lo: int) -> int:
    if isinstance(x, bool) or int(x) != x:
        raise ValueError(f"{name} must be an integer, got {x!r}")
    x = int(x)
    if x < lo:
        raise ValueError(f"{name} must be >= {lo}, got {x}")
    return x


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0,1), got {eps}")
    return eps


def sphere_area(d: int) -> float:
    """d-volume of the unit sphere S^d in R^(d+1)."""
    d = _check_int("d", d, 1)
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


def ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n, |S^(n-1)| / n."""
    n = _check_int("n", n, 1)
    if n == 1:
        return 2.0
    return sphere_area(n - 1) / n


def harmonic_multiplicity(n: int, k: int) -> int:
    """Dimension of the degree-k spherical harmonics on S^(n-1)."""
    n = _check_int("n", n, 2)
    k = _check_int("k", k, 0)
    second = math.comb(n + k - 3, k - 2) if k >= 2 else 0
    return math.comb(n + k - 1, k) - second


def annulus_coeffs(n: int, k: int, eps: float) -> tuple[float, float, float]:
    """Coefficients (A, B, C) of A s^2 + B s + C = 0 for the block (n, k, eps)."""
    n = _check_int("n", n, 3)
    k = _check_int("k", k, 0)
    eps = _check_eps(eps)
    p = 2 * k + n - 2
    e_p = eps**p
    e_p1 = e_p * eps
    m = k + n - 2
    A = eps - e_p1
    B = -(k * eps + k * e_p + m * e_p1 + m)
    C = k * m * (1.0 - e_p)
    return A, B, C


def annulus_mode(n: int, k: int, eps: float) -> AnnulusMode:
    A, B, C = annulus_coeffs(n, k, eps)
    disc = B * B - 4.0 * A * C
    if disc < 0.0 or A <= 0.0:
        raise NumericalFailure(
            f"negative discriminant {disc!r} for (n={n}, k={k}, eps={eps})"
        )
    q = -B + math.sqrt(disc)
    high = q / (2.0 * A)
    low = 2.0 * C / q if C > 0.0 else 0.0
    return AnnulusMode(int(n), int(k), float(eps), A, B, C, low, high)


def annulus_mode_roots(n: int, k: int, eps: float) -> tuple[float, float]:
    m = annulus_mode(n, k, eps)
    return m.sigma_low, m.sigma_high


def annulus_low_shift(n: int, k: int, eps: float) -> float:
    """sigma_low - k, computed without cancellation.

    Substituting sigma = k + d gives A d^2 + (2Ak + B) d + (Ak^2 + Bk + C) = 0,
    and the constant term collapses to -k(2k+n-2) eps^(2k+n-2) (1 + eps).
    """
    n = _check_int("n", n, 3)
    k = _check_int("k", k, 0)
    eps = _check_eps(eps)
    p = 2 * k + n - 2
    m = k + n - 2
    e_p = eps**p
    A = eps - e_p * eps
    q1 = k * eps - m - k * e_p - (2 * k + m) * e_p * eps
    q0 = -k * (k + m) * e_p * (1.0 + eps)
    if q0 == 0.0:
        return 0.0
    disc = q1 * q1 - 4.0 * A * q0
    return 2.0 * q0 / (-q1 + math.sqrt(disc))


def annulus_spectrum(n: int, eps: float, count: int) -> Spectrum:
    """Steklov spectrum of B_1 \\ B_eps with at least `count` nonzero entries."""
    n = _check_int("n", n, 3)
    eps = _check_eps(eps)
    count = _check_int("count", count, 1)

    entries = []
    k = 0
    while True:
        mode = annulus_mode(n, k, eps)
        mult = harmonic_multiplicity(n, k)
        if k > 0:
            nonzero = sorted(e[0] for e in entries if e[0] > 0.0)
            if len(nonzero) >= count and mode.sigma_low > nonzero[count - 1] + 1.0:
                break
        entries.append((mode.sigma_low, mult, f"k={k},low"))
        entries.append((mode.sigma_high, mult, f"k={k},high"))
        k += 1
    entries.sort(key=lambda e: (e[0], e[2]))
    return Spectrum(tuple(SpectrumEntry(v, m, lab) for v, m, lab in entries))


def ball_spectrum(n: int, count: int) -> Spectrum:
    """sigma_k = k with the multiplicity of degree-k harmonics, k = 0..count."""
    n = _check_int("n", n, 2)
    count = _check_int("count", count, 1)
    return Spectrum(
        tuple(
            SpectrumEntry(float(k), harmonic_multiplicity(n, k), f"k={k}")
            for k in range(count + 1)
        )
    )


def asymptotic_shift(n: int, k: int, eps: float) -> float:
    """Leading small-eps term of sigma_low - k: -k(2k+n-2)/(k+n-2) eps^(2k+n-2)."""
    n = _check_int("n", n, 3)
    k = _check_int("k", k, 1)
    eps = _check_eps(eps)
    p = 2 * k + n - 2
    return -k * p / (k + n - 2) * eps**p


def asymptotic_sigma(n: int, k: int, eps: float) -> float:
    """Leading small-eps behaviour of the k-th distinct eigenvalue."""
    return k + asymptotic_shift(n, k, eps)


def annulus_boundary_volume(n: int, eps: float) -> float:
    return sphere_area(n - 1) * (1.0 + eps ** (n - 1))


def normalized(sigma: float, boundary_volume: float, n: int) -> NormalizedValue:
    if boundary_volume <= 0.0:
        raise ValueError(f"boundary_volume must be positive, got {boundary_volume}")
    if sigma < 0.0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    n = _check_int("n", n, 2)
    return NormalizedValue(float(sigma), float(boundary_volume), n)


def annulus_first_normalized(n: int, eps: float) -> float:
    sigma = annulus_spectrum(n, eps, 1).first_nonzero()
    return normalized(sigma, annulus_boundary_volume(n, eps), n).value


def ball_first_normalized(n: int) -> float:
    return normalized(1.0, sphere_area(n - 1), n).value


def euclidean_bound(n: int) -> float:
    """Upper bound on sigma_1 |dOmega|^(1/(n-1)) for any domain in R^n."""
    n = _check_int("n", n, 2)
    return (
        n ** (1.0 / (n - 1))
        * sphere_area(n) ** (2.0 / n)
        / ball_volume(n) ** ((n - 2) / (n * (n - 1)))
    )
