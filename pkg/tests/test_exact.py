import math

import mpmath as mp
import pytest
from hypothesis import given
from hypothesis import strategies as st

from steklov import exact
from steklov.exact import (
    NumericalFailure,
    Spectrum,
    SpectrumEntry,
    annulus_coeffs,
    annulus_mode,
    annulus_mode_roots,
    annulus_spectrum,
    ball_spectrum,
    euclidean_bound,
    harmonic_multiplicity,
    normalized,
    sphere_area,
)

dims = st.integers(3, 8)
degrees = st.integers(0, 8)
radii = st.floats(0.01, 0.99)


def mp_roots(n, k, eps, dps=50):
    """Independent high-precision oracle: solve the radial ODE boundary problem directly.

    u = a rho^k + b rho^(2-n-k); du/drho = sigma u at rho = 1 and
    -du/drho = sigma u at rho = eps, a 2x2 generalized eigenproblem.
    """
    with mp.workdps(dps):
        e = mp.mpf(eps)
        q = 2 - n - k
        # rows: outer condition, inner condition; columns: a, b
        K = mp.matrix([[k, q], [-k * e ** (k - 1), -q * e ** (q - 1)]])
        M = mp.matrix([[1, 1], [e**k, e**q]])
        # det(K - sigma M) = 0 is quadratic in sigma
        c2 = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        c1 = -(K[0, 0] * M[1, 1] + M[0, 0] * K[1, 1] - K[0, 1] * M[1, 0] - M[0, 1] * K[1, 0])
        c0 = K[0, 0] * K[1, 1] - K[0, 1] * K[1, 0]
        disc = mp.sqrt(c1 * c1 - 4 * c2 * c0)
        r = sorted([(-c1 - disc) / (2 * c2), (-c1 + disc) / (2 * c2)])
        return r


def test_sphere_area_values_and_recursion():
    assert sphere_area(1) == pytest.approx(2 * math.pi, rel=1e-14)
    assert sphere_area(2) == pytest.approx(4 * math.pi, rel=1e-14)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2, rel=1e-14)
    for d in range(3, 12):
        assert sphere_area(d) == pytest.approx(2 * math.pi * sphere_area(d - 2) / (d - 1), rel=1e-13)
    with pytest.raises(ValueError):
        sphere_area(0)


def test_ball_volume():
    assert exact.ball_volume(2) == pytest.approx(math.pi)
    assert exact.ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert exact.ball_volume(4) == pytest.approx(math.pi**2 / 2)
    with pytest.raises(ValueError):
        exact.ball_volume(0)


def _count_harmonics(n, k):
    # dimension of homogeneous degree-k polynomials minus degree k-2 (Laplacian is onto)
    def monomials(deg):
        return math.comb(deg + n - 1, n - 1) if deg >= 0 else 0
    return monomials(k) - monomials(k - 2)


@given(st.integers(2, 9), degrees)
def test_harmonic_multiplicity_matches_monomial_count(n, k):
    assert harmonic_multiplicity(n, k) == _count_harmonics(n, k)


def test_harmonic_multiplicity_examples():
    assert harmonic_multiplicity(3, 0) == 1
    assert harmonic_multiplicity(3, 2) == 5
    assert harmonic_multiplicity(4, 2) == 9
    assert [harmonic_multiplicity(2, k) for k in range(4)] == [1, 2, 2, 2]


def test_coefficient_examples():
    assert annulus_coeffs(3, 1, 0.1) == pytest.approx((0.0999, -2.1012, 1.998), rel=1e-12)
    assert annulus_coeffs(3, 0, 0.5) == pytest.approx((0.25, -1.25, 0.0), abs=1e-15)
    assert annulus_coeffs(3, 1, 0.5) == pytest.approx((0.4375, -2.75, 1.75), rel=1e-14)
    assert annulus_coeffs(3, 2, 0.5) == pytest.approx((0.484375, -4.109375, 5.8125), rel=1e-14)


@pytest.mark.parametrize("args", [(2, 1, 0.5), (3, -1, 0.5), (3, 1, 0.0), (3, 1, 1.0), (3, 1.5, 0.5)])
def test_coefficient_preconditions(args):
    with pytest.raises(ValueError):
        annulus_coeffs(*args)


def test_root_examples():
    low, high = annulus_mode_roots(3, 1, 0.1)
    assert low == pytest.approx(0.998265, abs=1e-6)
    assert high == pytest.approx(20.0348, abs=1e-3)
    assert annulus_mode_roots(3, 0, 0.5) == (0.0, pytest.approx(5.0, abs=1e-12))
    low, high = annulus_mode_roots(3, 2, 0.5)
    assert low == pytest.approx(1.79366, abs=2e-5)
    assert high == pytest.approx(6.69021, abs=2e-5)


@given(dims, degrees, radii)
def test_roots_match_high_precision_oracle(n, k, eps):
    low, high = annulus_mode_roots(n, k, eps)
    ref_low, ref_high = mp_roots(n, k, eps)
    assert abs(low - float(ref_low)) <= 1e-12 * max(1.0, abs(float(ref_low)))
    assert high == pytest.approx(float(ref_high), rel=1e-12)


@given(dims, degrees, radii)
def test_root_residual_and_ordering(n, k, eps):
    mode = annulus_mode(n, k, eps)
    scale = max(abs(mode.A), abs(mode.B), abs(mode.C))
    assert abs(mode.residual(mode.sigma_low)) <= 1e-10 * scale
    assert abs(mode.residual(mode.sigma_high)) <= 1e-10 * scale
    assert 0.0 <= mode.sigma_low < mode.sigma_high
    assert mode.A > 0 and mode.C >= 0


@given(dims, radii)
def test_zero_degree_is_degenerate(n, eps):
    mode = annulus_mode(n, 0, eps)
    assert mode.C == 0.0 and mode.sigma_low == 0.0


@given(dims, st.integers(1, 8), radii)
def test_low_root_lies_below_degree(n, k, eps):
    # the shift is strictly negative even where sigma_low rounds to k
    assert exact.annulus_low_shift(n, k, eps) < 0
    assert annulus_mode(n, k, eps).sigma_low <= k


@given(dims, st.integers(1, 6), st.floats(0.01, 0.6))
def test_shift_is_cancellation_free(n, k, eps):
    with mp.workdps(60):
        ref = mp_roots(n, k, eps, dps=60)[0] - k
        got = exact.annulus_low_shift(n, k, eps)
        assert abs(got - float(ref)) <= 1e-13 * abs(float(ref))
        p = 2 * k + n - 2
        lead = -mp.mpf(k) * p / (k + n - 2) * mp.mpf(eps) ** p
        assert exact.asymptotic_shift(n, k, eps) == pytest.approx(float(lead), rel=1e-14)


def test_negative_discriminant_is_reported(monkeypatch):
    monkeypatch.setattr(exact, "annulus_coeffs", lambda n, k, eps: (1.0, 0.0, 1.0))
    with pytest.raises(NumericalFailure):
        exact.annulus_mode(3, 1, 0.5)


def test_annulus_spectrum_example():
    spec = annulus_spectrum(3, 0.5, 5)
    vals = spec.values
    assert vals[0] == 0.0 and spec[0].multiplicity == 1
    assert vals[1] == pytest.approx(0.71849, abs=1e-5)
    assert vals[2] == pytest.approx(1.79366, abs=2e-5)
    # recomputed from the stated coefficients; see the decisions ledger on 2.90575
    assert vals[3] == pytest.approx(2.90569, abs=1e-5)
    assert spec.multiplicities[:4] == [1, 3, 5, 7]
    fives = [e for e in spec if e.label == "k=0,high"]
    assert fives[0].value == pytest.approx(5.0, abs=1e-12) and fives[0].multiplicity == 1


def test_annulus_small_eps_limits():
    # leading term 1 - n/(n-1) eps^n, agreement to O(eps^(n+1))
    assert annulus_spectrum(3, 0.01, 1).first_nonzero() == pytest.approx(1 - 1.5e-6, abs=3 * 0.01**4)
    assert annulus_spectrum(4, 0.1, 1).first_nonzero() == pytest.approx(1 - 4 / 3 * 1e-4, abs=3 * 0.1**5)


@given(dims, radii, st.integers(1, 12))
def test_annulus_spectrum_merge(n, eps, count):
    spec = annulus_spectrum(n, eps, count)
    assert spec[0].value == 0.0 and spec[0].multiplicity == 1
    assert sum(1 for e in spec if e.value > 0) >= count
    for e in spec:
        k = int(e.label.split(",")[0][2:])
        assert e.multiplicity == harmonic_multiplicity(n, k)
    # every block whose small root lies below the count-th value is present
    cutoff = sorted(v for v in spec.values if v > 0)[count - 1]
    present = {e.label for e in spec}
    for k in range(0, 40):
        if annulus_mode(n, k, eps).sigma_low < cutoff:
            assert f"k={k},low" in present


def test_ball_spectrum():
    assert [(e.value, e.multiplicity) for e in ball_spectrum(3, 3)] == [(0, 1), (1, 3), (2, 5), (3, 7)]
    assert [(e.value, e.multiplicity) for e in ball_spectrum(2, 2)] == [(0, 1), (1, 2), (2, 2)]
    assert [(e.value, e.multiplicity) for e in ball_spectrum(5, 1)] == [(0, 1), (1, 5)]


def test_asymptotic_examples():
    assert exact.asymptotic_sigma(3, 1, 0.1) == pytest.approx(0.9985, abs=1e-12)
    assert exact.asymptotic_sigma(3, 2, 0.1) == pytest.approx(2 - 10 / 3 * 1e-5, abs=1e-12)
    with pytest.raises(ValueError):
        exact.asymptotic_sigma(3, 0, 0.1)


def test_normalized_examples():
    assert normalized(1.0, 4 * math.pi, 3).value == pytest.approx(3.5449077, abs=1e-7)
    assert normalized(0.99825, 4 * math.pi * 1.01, 3).value == pytest.approx(3.55635, abs=1e-5)
    low = annulus_mode_roots(3, 1, 0.1)[0]
    assert normalized(low, 4 * math.pi * 1.01, 3).value == pytest.approx(3.556406, abs=1e-6)
    assert normalized(0.0, 7.0, 3).value == 0.0
    with pytest.raises(ValueError):
        normalized(1.0, 0.0, 3)
    with pytest.raises(ValueError):
        normalized(-1.0, 1.0, 3)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("eps", [0.05, 0.1])
def test_strict_normalized_comparison(n, k, eps):
    low = annulus_mode(n, k, eps).sigma_low
    ann = normalized(low, exact.annulus_boundary_volume(n, eps), n).value
    ball = normalized(float(k), sphere_area(n - 1), n).value
    assert ann > ball


def test_euclidean_bound():
    assert euclidean_bound(2) == pytest.approx(8 * math.pi, rel=1e-14)
    assert euclidean_bound(3) == pytest.approx(9.964, abs=1e-3)
    direct = math.sqrt(3) * (2 * math.pi**2) ** (2 / 3) / (4 * math.pi / 3) ** (1 / 6)
    assert euclidean_bound(3) == pytest.approx(direct, rel=1e-14)
    assert euclidean_bound(3) > math.sqrt(4 * math.pi)


@given(st.integers(3, 6), radii)
def test_bound_audit_on_annuli(n, eps):
    assert exact.annulus_first_normalized(n, eps) <= euclidean_bound(n)


def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum((SpectrumEntry(1.0, 1), SpectrumEntry(0.5, 1)))
    with pytest.raises(ValueError):
        Spectrum((SpectrumEntry(1.0, 0),))
    s = Spectrum((SpectrumEntry(0.0, 1), SpectrumEntry(1.0, 3)))
    assert s.expanded() == [0.0, 1.0, 1.0, 1.0]
    assert s.first_nonzero() == 1.0
