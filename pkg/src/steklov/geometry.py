"""Meridian profiles of axisymmetric domains in R^3.

A profile lives in the half-plane (r, z), r >= 0, and is rotated about the
z-axis.  Boundary loops are counterclockwise with the region on the left.
Every piece is either a straight segment or a circular arc, so lengths,
areas of revolution and enclosed volumes all have closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO, Union

import numpy as np

TAGS = ("steklov", "axis")
GEOM_TOL = 1e-9
PROFILE_HEADER = "SPROFILE v1"


@dataclass(frozen=True)
class Segment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    tag: str
    group: str

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    def point(self, t):
        t = np.asarray(t, dtype=float)
        r = self.p0[0] + t * (self.p1[0] - self.p0[0])
        z = self.p0[1] + t * (self.p1[1] - self.p0[1])
        return np.stack([r, z], axis=-1)

    def r_ds(self) -> float:
        """Closed form of the integral of r ds along the piece."""
        return self.length * 0.5 * (self.p0[0] + self.p1[0])

    def r_dz(self) -> float:
        dr = self.p1[0] - self.p0[0]
        dz = self.p1[1] - self.p0[1]
        return dz * (self.p0[0] + 0.5 * dr)

    def r2_dz(self) -> float:
        """Integral of r^2/2 dz; summed over a CCW loop it gives the r-moment of area."""
        r0 = self.p0[0]
        dr = self.p1[0] - r0
        dz = self.p1[1] - self.p0[1]
        return 0.5 * dz * (r0 * r0 + r0 * dr + dr * dr / 3.0)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        a = np.asarray(self.p0)
        d = np.asarray(self.p1) - a
        t = np.clip(((pts - a) @ d) / (d @ d), 0.0, 1.0)
        return np.linalg.norm(pts - (a + t[:, None] * d), axis=1)


@dataclass(frozen=True)
class Arc:
    """Arc of the circle (center, radius) swept from angle theta0 to theta1.

    theta1 < theta0 means the arc is traversed clockwise.
    """

    center: tuple[float, float]
    radius: float
    theta0: float
    theta1: float
    tag: str
    group: str

    @property
    def sweep(self) -> float:
        return self.theta1 - self.theta0

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    @property
    def p0(self) -> tuple[float, float]:
        return tuple(self.point(0.0))

    @property
    def p1(self) -> tuple[float, float]:
        return tuple(self.point(1.0))

    def point(self, t):
        th = self.theta0 + np.asarray(t, dtype=float) * self.sweep
        r = self.center[0] + self.radius * np.cos(th)
        z = self.center[1] + self.radius * np.sin(th)
        return np.stack([r, z], axis=-1)

    def r_ds(self) -> float:
        rc, R = self.center[0], self.radius
        a, b = self.theta0, self.theta1
        return R * math.copysign(1.0, b - a) * (rc * (b - a) + R * (math.sin(b) - math.sin(a)))

    def r_dz(self) -> float:
        rc, R = self.center[0], self.radius
        a, b = self.theta0, self.theta1
        return R * rc * (math.sin(b) - math.sin(a)) + R * R * (
            0.5 * (b - a) + 0.25 * (math.sin(2 * b) - math.sin(2 * a))
        )

    def r2_dz(self) -> float:
        rc, R = self.center[0], self.radius
        a, b = self.theta0, self.theta1

        def prim(t):
            s = math.sin(t)
            return (
                rc * rc * s
                + 2.0 * rc * R * (0.5 * t + 0.25 * math.sin(2 * t))
                + R * R * (s - s**3 / 3.0)
            )

        return 0.5 * R * (prim(b) - prim(a))

    def distance(self, pts: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center)
        v = pts - c
        ang = np.arctan2(v[:, 1], v[:, 0])
        lo, hi = sorted((self.theta0, self.theta1))
        # bring angles into [lo, lo + 2pi)
        rel = np.mod(ang - lo, 2 * np.pi)
        inside = rel <= hi - lo
        d_circle = np.abs(np.linalg.norm(v, axis=1) - self.radius)
        ends = np.minimum(
            np.linalg.norm(pts - np.asarray(self.p0), axis=1),
            np.linalg.norm(pts - np.asarray(self.p1), axis=1),
        )
        return np.where(inside, d_circle, ends)


Piece = Union[Segment, Arc]


@dataclass(frozen=True)
class ProfileParams:
    eps: Optional[float] = None
    delta: Optional[float] = None
    smoothing_radius: float = 0.0
    tube_span: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class MeridianProfile:
    kind: str
    curves: tuple[Piece, ...]
    params: ProfileParams = field(default_factory=ProfileParams)

    @property
    def steklov_pieces(self) -> list[Piece]:
        return [c for c in self.curves if c.tag == "steklov"]

    @property
    def groups(self) -> list[str]:
        seen = []
        for c in self.curves:
            if c.tag == "steklov" and c.group not in seen:
                seen.append(c.group)
        return seen

    def corners(self) -> np.ndarray:
        """Junctions between consecutive pieces that meet at a kink."""
        out = []
        n = len(self.curves)
        for i, c in enumerate(self.curves):
            nxt = self.curves[(i + 1) % n]
            t_in = _tangent(c, 1.0)
            t_out = _tangent(nxt, 0.0)
            if abs(t_in[0] * t_out[1] - t_in[1] * t_out[0]) > 1e-6 or t_in @ t_out < 0:
                out.append(c.p1)
        return np.array(out, dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class ProfileMeasures:
    volume: float
    boundary_area_by_tag: dict
    total_steklov_area: float
    meridian_area: float


def _tangent(piece: Piece, t: float) -> np.ndarray:
    if isinstance(piece, Segment):
        d = np.subtract(piece.p1, piece.p0)
    else:
        th = piece.theta0 + t * piece.sweep
        d = np.array([-math.sin(th), math.cos(th)]) * math.copysign(1.0, piece.sweep)
    return d / np.linalg.norm(d)


def _fillet_outer(delta: float, rs: float):
    """Fillet circle tangent to the wall r = delta and inside the unit sphere."""
    cr = delta + rs
    cz2 = (1.0 - rs) ** 2 - cr**2
    if cz2 <= 0.0:
        raise ValueError("smoothing_radius too large to fit the outer fillet")
    return (cr, math.sqrt(cz2))


def _fillet_inner(eps: float, delta: float, rs: float):
    """Fillet circle tangent to the wall r = delta and outside the sphere of radius eps."""
    cr = delta + rs
    cz2 = (eps + rs) ** 2 - cr**2
    return (cr, math.sqrt(cz2))


def make_profile(kind: str, eps: Optional[float] = None, delta: Optional[float] = None,
                 smoothing_radius: float = 0.0) -> MeridianProfile:
    """Build the meridian profile of a ball, annulus, or annulus with an axial tube removed.

    The tube is the delta-neighbourhood of the radial segment {eps/2 < rho < 1}
    along the positive z-axis; within the annulus it is exactly the cylinder
    r < delta, z > 0 because delta < eps/2.
    """
    half = math.pi / 2
    if kind == "ball":
        curves = (
            Arc((0.0, 0.0), 1.0, -half, half, "steklov", "outer"),
            Segment((0.0, 1.0), (0.0, -1.0), "axis", "axis"),
        )
        return MeridianProfile("ball", curves)

    if eps is None or not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0,1), got {eps}")
    eps = float(eps)
    if kind == "annulus":
        curves = (
            Arc((0.0, 0.0), 1.0, -half, half, "steklov", "outer"),
            Segment((0.0, 1.0), (0.0, eps), "axis", "axis"),
            Arc((0.0, 0.0), eps, half, -half, "steklov", "inner"),
            Segment((0.0, -eps), (0.0, -1.0), "axis", "axis"),
        )
        return MeridianProfile("annulus", curves, ProfileParams(eps=eps))

    if kind not in ("annulus_with_tube", "tube"):
        raise ValueError(f"unknown profile kind {kind!r}")
    if delta is None or not 0.0 < delta < eps / 2:
        raise ValueError(f"delta must lie in (0, eps/2) = (0, {eps / 2}), got {delta}")
    rs = float(smoothing_radius)
    if rs < 0.0 or rs > delta / 2:
        raise ValueError(f"smoothing_radius must lie in [0, delta/2], got {rs}")
    delta = float(delta)
    params = ProfileParams(eps=eps, delta=delta, smoothing_radius=rs, tube_span=(eps / 2, 1.0))

    if rs == 0.0:
        zo = math.sqrt(1.0 - delta**2)
        zi = math.sqrt(eps**2 - delta**2)
        curves = (
            Arc((0.0, 0.0), 1.0, -half, math.atan2(zo, delta), "steklov", "outer"),
            Segment((delta, zo), (delta, zi), "steklov", "wall"),
            Arc((0.0, 0.0), eps, math.atan2(zi, delta), -half, "steklov", "inner"),
            Segment((0.0, -eps), (0.0, -1.0), "axis", "axis"),
        )
        return MeridianProfile("annulus_with_tube", curves, params)

    c1 = _fillet_outer(delta, rs)
    c2 = _fillet_inner(eps, delta, rs)
    if c1[1] <= c2[1]:
        raise ValueError("smoothing_radius too large: fillets overlap along the wall")
    phi1 = math.atan2(c1[1], c1[0])
    phi2 = math.atan2(c2[1], c2[0])
    curves = (
        Arc((0.0, 0.0), 1.0, -half, phi1, "steklov", "outer"),
        Arc(c1, rs, phi1, math.pi, "steklov", "fillet_outer"),
        Segment((delta, c1[1]), (delta, c2[1]), "steklov", "wall"),
        Arc(c2, rs, math.pi, math.pi + phi2, "steklov", "fillet_inner"),
        Arc((0.0, 0.0), eps, phi2, -half, "steklov", "inner"),
        Segment((0.0, -eps), (0.0, -1.0), "axis", "axis"),
    )
    return MeridianProfile("annulus_with_tube", curves, params)


def profile_measures(profile: MeridianProfile) -> ProfileMeasures:
    """Exact volume, per-group boundary areas and meridian area of a profile.

    Arc areas reduce to spherical zones/caps (center on the axis) or torus
    patches (fillets); segments give cylinders, cones or annular discs.
    """
    by_group: dict = {}
    for c in profile.steklov_pieces:
        by_group[c.group] = by_group.get(c.group, 0.0) + 2.0 * math.pi * c.r_ds()
    volume = 2.0 * math.pi * sum(c.r2_dz() for c in profile.curves)
    area = sum(c.r_dz() for c in profile.curves)
    return ProfileMeasures(
        volume=volume,
        boundary_area_by_tag=by_group,
        total_steklov_area=sum(by_group.values()),
        meridian_area=area,
    )


def spherical_cap_area(rho: float, theta_c: float) -> float:
    return 2.0 * math.pi * rho * rho * (1.0 - math.cos(theta_c))


def point_in_profile(profile: MeridianProfile, pt) -> bool:
    return bool(points_in_profile(profile, np.asarray(pt, dtype=float).reshape(1, 2))[0])


def points_in_profile(profile: MeridianProfile, pts: np.ndarray) -> np.ndarray:
    """Vectorised membership test for the open meridian region."""
    pts = np.asarray(pts, dtype=float)
    r, z = pts[:, 0], pts[:, 1]
    rho = np.hypot(r, z)
    inside = (r > 0.0) & (rho < 1.0)
    p = profile.params
    if profile.kind == "ball":
        return inside
    inside &= rho > p.eps
    if profile.kind == "annulus":
        return inside
    inside &= ~((r <= p.delta) & (z > 0.0))
    rs = p.smoothing_radius
    if rs > 0.0:
        for c, lo, hi in _fillet_zones(p):
            v = pts - np.asarray(c)
            ang = np.mod(np.arctan2(v[:, 1], v[:, 0]), 2 * np.pi)
            zone = (ang >= lo) & (ang <= hi) & (np.hypot(v[:, 0], v[:, 1]) > rs)
            inside &= ~zone
    return inside


def _fillet_zones(p: ProfileParams):
    c1 = _fillet_outer(p.delta, p.smoothing_radius)
    c2 = _fillet_inner(p.eps, p.delta, p.smoothing_radius)
    phi1 = math.atan2(c1[1], c1[0])
    phi2 = math.atan2(c2[1], c2[0])
    return [(c1, phi1, math.pi), (c2, math.pi, math.pi + phi2)]


# -- plain-text serialisation -------------------------------------------------

def write_profile(profile: MeridianProfile, sink: TextIO) -> None:
    p = profile.params
    sink.write(PROFILE_HEADER + "\n")
    sink.write(f"kind {profile.kind}\n")
    sink.write(
        "params eps={} delta={} smoothing_radius={!r}\n".format(
            "none" if p.eps is None else repr(p.eps),
            "none" if p.delta is None else repr(p.delta),
            p.smoothing_radius,
        )
    )
    for c in profile.curves:
        if isinstance(c, Segment):
            nums = [*c.p0, *c.p1]
            sink.write("segment " + " ".join(repr(float(x)) for x in nums) + f" {c.tag} {c.group}\n")
        else:
            nums = [*c.p0, *c.p1, *c.center, c.radius, c.theta0, c.theta1]
            sink.write("arc " + " ".join(repr(float(x)) for x in nums) + f" {c.tag} {c.group}\n")


def read_profile(source: TextIO) -> MeridianProfile:
    lines = [
        (i, ln.strip()) for i, ln in enumerate(source, start=1)
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not lines or lines[0][1] != PROFILE_HEADER:
        raise ValueError(f"line 1: expected header {PROFILE_HEADER!r}")
    kind = None
    params = ProfileParams()
    curves = []
    for lineno, ln in lines[1:]:
        tok = ln.split()
        try:
            if tok[0] == "kind":
                kind = tok[1]
            elif tok[0] == "params":
                kv = dict(t.split("=", 1) for t in tok[1:])
                conv = lambda s: None if s == "none" else float(s)
                params = ProfileParams(
                    eps=conv(kv["eps"]),
                    delta=conv(kv["delta"]),
                    smoothing_radius=float(kv["smoothing_radius"]),
                )
            elif tok[0] == "segment":
                v = [float(x) for x in tok[1:5]]
                curves.append(Segment((v[0], v[1]), (v[2], v[3]), _tag(tok[5], lineno), tok[6]))
            elif tok[0] == "arc":
                v = [float(x) for x in tok[1:10]]
                curves.append(Arc((v[4], v[5]), v[6], v[7], v[8], _tag(tok[10], lineno), tok[11]))
            else:
                raise ValueError(f"unknown record {tok[0]!r}")
        except (IndexError, KeyError) as exc:
            raise ValueError(f"line {lineno}: malformed record") from exc
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if kind is None:
        raise ValueError("missing 'kind' record")
    if params.eps is not None and params.delta is not None:
        params = ProfileParams(params.eps, params.delta, params.smoothing_radius,
                               (params.eps / 2, 1.0))
    return MeridianProfile(kind, tuple(curves), params)


def _tag(t: str, lineno: int) -> str:
    if t not in TAGS:
        raise ValueError(f"unknown tag {t!r}")
    return t
