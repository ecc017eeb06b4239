"""Axisymmetric P1 Steklov solver, one azimuthal Fourier mode at a time.

For a mode ``u(r, z) cos(m phi)`` the weak problem on the meridian region is

    a_m(u, v) = int (grad u . grad v + m^2/r^2 u v) r dr dz
    b(u, v)   = int_{steklov} u v r ds

(the common factor 2 pi is dropped from both).  Eliminating interior nodes
gives the discrete Dirichlet-to-Neumann matrix, whose generalized
eigenvalues against the boundary mass are the Steklov eigenvalues.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .exact import Spectrum, SpectrumEntry, sphere_area
from .linalg import DenseSym, SparseSym, eig_sym_generalized, schur_complement
from .mesh import Mesh2D

AXIS_TOL = 1e-12
NEGATIVE_TOL = 1e-8

# interior rules on the reference triangle: barycentric points and weights (sum 1)
_RULE3 = (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
          np.full(3, 1 / 3))
_a, _b, _c = 0.659027622374092, 0.231933368553031, 0.109039009072877
_RULE6 = (np.array([[_a, _b, _c], [_a, _c, _b], [_b, _a, _c], [_b, _c, _a], [_c, _a, _b], [_c, _b, _a]]),
          np.full(6, 1 / 6))
_GAUSS2 = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])


class DiscretizationFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ModeSystem:
    """Stiffness and boundary mass for azimuthal mode m.

    ``active`` lists the global mesh nodes carrying unknowns; ``boundary``
    holds positions (into ``active``) of the steklov nodes, in the order
    used by ``boundary_mass``.
    """

    m: int
    stiffness: SparseSym
    boundary_mass: DenseSym
    active: np.ndarray
    boundary: np.ndarray

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.active[self.boundary]


@dataclass(frozen=True)
class EigenPair:
    sigma: float
    trace: np.ndarray       # values at `nodes`, normalized so that b(u, u) = 1
    mode: int
    multiplicity_weight: int
    nodes: np.ndarray = None  # global mesh node of every trace entry
    branch: int = 0           # position within the mode's sorted list
    extension: Optional[np.ndarray] = None  # harmonic extension over the active nodes


def _element_geometry(p, t):
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    # gradients of the three hat functions: rows (dr, dz)
    grads = np.empty((len(t), 3, 2))
    for i, (j, k) in enumerate(((1, 2), (2, 0), (0, 1))):
        pj, pk = p[t[:, j]], p[t[:, k]]
        grads[:, i, 0] = (pj[:, 1] - pk[:, 1]) / (2 * area)
        grads[:, i, 1] = (pk[:, 0] - pj[:, 0]) / (2 * area)
    return area, grads


def _inverse_r_mass(p, t, area):
    """int phi_i phi_j / r per element, with a finer rule on elements touching the axis twice."""
    r = p[t][:, :, 0]
    on_axis = np.abs(r) <= AXIS_TOL
    out = np.empty((len(t), 3, 3))
    fine = on_axis.sum(axis=1) >= 2
    for sel, (bary, w) in ((~fine, _RULE3), (fine, _RULE6)):
        if not sel.any():
            continue
        rq = r[sel] @ bary.T  # (e, q)
        wq = w[None, :] * area[sel, None] / rq
        out[sel] = np.einsum("q,qi,qj,eq->eij", np.ones(len(w)), bary, bary, wq)
    return out


def assemble_mode(mesh: Mesh2D, m: int) -> ModeSystem:
    m = int(m)
    if m < 0:
        raise ValueError(f"mode must be >= 0, got {m}")
    p, t = mesh.nodes, mesh.triangles
    tags = np.asarray(mesh.edge_tags)
    st_edges = mesh.boundary_edges[tags == "steklov"]
    if len(st_edges) == 0:
        raise ValueError("mesh has no steklov boundary")
    on_axis = np.abs(p[:, 0]) <= AXIS_TOL
    if m >= 1 and np.any(on_axis[t].all(axis=1)):
        raise ValueError("an element has all three nodes on the axis")

    area, grads = _element_geometry(p, t)
    rbar = p[t][:, :, 0].mean(axis=1)
    ke = np.einsum("eid,ejd->eij", grads, grads) * (area * rbar)[:, None, None]
    if m:
        ke = ke + m * m * _inverse_r_mass(p, t, area)

    if m >= 1:
        active = np.flatnonzero(~on_axis)
    else:
        active = np.arange(len(p))
    pos = np.full(len(p), -1, dtype=np.int64)
    pos[active] = np.arange(len(active))

    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    vals = ke.ravel()
    keep = (pos[rows] >= 0) & (pos[cols] >= 0)
    stiff = SparseSym.from_coo(len(active), pos[rows[keep]], pos[cols[keep]], vals[keep])

    bnodes = np.unique(st_edges)
    bnodes = bnodes[pos[bnodes] >= 0]
    bpos = np.full(len(p), -1, dtype=np.int64)
    bpos[bnodes] = np.arange(len(bnodes))
    bm = _edge_mass(p, st_edges)
    mass = np.zeros((len(bnodes), len(bnodes)))
    for a in range(2):
        for b in range(2):
            i, j = bpos[st_edges[:, a]], bpos[st_edges[:, b]]
            ok = (i >= 0) & (j >= 0)
            np.add.at(mass, (i[ok], j[ok]), bm[ok, a, b])
    return ModeSystem(m, stiff, DenseSym.from_array(mass), active, pos[bnodes])


def _edge_mass(p, edges):
    """int phi_a phi_b r ds on each edge by two-point Gauss (exact for straight edges)."""
    pa, pb = p[edges[:, 0]], p[edges[:, 1]]
    length = np.linalg.norm(pb - pa, axis=1)
    out = np.zeros((len(edges), 2, 2))
    for s in _GAUSS2:
        phi = np.array([1 - s, s])
        r = (1 - s) * pa[:, 0] + s * pb[:, 0]
        out += 0.5 * (length * r)[:, None, None] * np.outer(phi, phi)[None]
    return out


def dtn_spectrum(system: ModeSystem, count: Optional[int] = None, extend: bool = False) -> list:
    """Lowest `count` Steklov pairs of one mode (all of them when count is None)."""
    if count is not None and count < 1:
        raise ValueError("count must be >= 1")
    holder: list = []
    s = schur_complement(system.stiffness, system.boundary, factor_out=holder)
    vals, vecs = eig_sym_generalized(s, system.boundary_mass)
    if vals[0] < -NEGATIVE_TOL:
        raise DiscretizationFailure(
            f"negative Steklov eigenvalue {vals[0]:.3e} in mode {system.m}"
        )
    nkeep = len(vals) if count is None else min(count, len(vals))
    weight = 1 if system.m == 0 else 2
    out = []
    for j in range(nkeep):
        x = vecs[:, j].copy()
        big = np.argmax(np.abs(x))
        if x[big] < 0:
            x = -x
        ext = _extend(system, x, holder) if extend else None
        out.append(EigenPair(float(vals[j]), x, system.m, weight, system.boundary_nodes, j, ext))
    return out


def _extend(system: ModeSystem, trace: np.ndarray, holder: list) -> np.ndarray:
    full = np.zeros(len(system.active))
    full[system.boundary] = trace
    if holder:
        factor, interior, kib = holder
        full[interior] = -factor.solve(kib @ trace)
    return full


def harmonic_extension(system: ModeSystem, trace: np.ndarray) -> np.ndarray:
    """Discrete a_m-harmonic extension of boundary values to all active nodes."""
    holder: list = []
    schur_complement(system.stiffness, system.boundary, factor_out=holder)
    return _extend(system, np.asarray(trace, dtype=float), holder)


def rayleigh_quotient(system: ModeSystem, full: np.ndarray) -> float:
    """a_m(u, u) / b(u, u) for a vector over the active nodes."""
    num = float(full @ system.stiffness.matvec(full))
    tr = full[system.boundary]
    den = float(tr @ system.boundary_mass.to_array() @ tr)
    return num / den


def full_spectrum(mesh: Mesh2D, m_max: Optional[int] = None, count: int = 6,
                  cluster_tol: float = 0.02) -> Spectrum:
    """Merge the modes 0..m_max into the lowest `count` distinct values.

    Values within ``cluster_tol * (1 + value)`` of a cluster's smallest member
    join that cluster.  The cluster reports its smallest member; every member
    is kept as ``(mode, branch, value)`` in ``SpectrumEntry.members``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if m_max is None:
        m_max = count
    if m_max < count:
        raise ValueError(f"m_max ({m_max}) must be >= count ({count})")
    return merge_modes(solve_modes(mesh, m_max, count + 3), count, cluster_tol)


def solve_modes(mesh: Mesh2D, m_max: int, per_mode: int) -> dict:
    """Lowest `per_mode` pairs of every mode 0..m_max, keyed by mode."""
    return {m: dtn_spectrum(assemble_mode(mesh, m), per_mode) for m in range(m_max + 1)}


def find_pair(per_mode: dict, entry: SpectrumEntry) -> EigenPair:
    """The eigenpair behind the smallest member of a merged spectrum entry."""
    m, branch, _ = entry.members[0]
    return per_mode[m][branch]


def merge_modes(per_mode: dict, count: int, cluster_tol: float = 0.02) -> Spectrum:
    items = sorted(
        (pair.sigma, pair.mode, pair.branch, pair.multiplicity_weight)
        for pairs in per_mode.values() for pair in pairs
    )
    clusters = []
    for v, m, br, w in items:
        if clusters and v - clusters[-1][0] <= cluster_tol * (1.0 + clusters[-1][0]):
            clusters[-1][1] += w
            clusters[-1][2].append((m, br, v))
        else:
            clusters.append([v, w, [(m, br, v)]])
    if len(clusters) < count:
        raise DiscretizationFailure(f"only {len(clusters)} distinct values available, {count} requested")
    clusters = clusters[:count]
    last = clusters[-1][0]
    for m, pairs in per_mode.items():
        top = pairs[-1].sigma
        if last >= 0.95 * top:
            warnings.warn(
                f"value {last:.6g} is within 5% of the top retained value {top:.6g} of mode {m}; "
                "the merged spectrum may be truncated",
                RuntimeWarning, stacklevel=2,
            )
            break
    mtop = max(per_mode)
    if per_mode[mtop][0].sigma < last:
        warnings.warn(
            f"mode {mtop} starts at {per_mode[mtop][0].sigma:.6g}, below the last reported value; "
            "increase m_max", RuntimeWarning, stacklevel=2,
        )
    entries = []
    for v, w, members in clusters:
        label = ";".join(f"m={m}#{br}" for m, br, _ in members)
        entries.append(SpectrumEntry(v, w, label, tuple(members)))
    return Spectrum(tuple(entries))


def boundary_trace_mass(pair: EigenPair, mesh: Mesh2D, tag_group: str) -> float:
    """r-weighted L2 mass of the trace on one boundary group."""
    groups = np.asarray(mesh.edge_groups)
    tags = np.asarray(mesh.edge_tags)
    st_groups = set(groups[tags == "steklov"].tolist())
    if tag_group not in st_groups:
        raise KeyError(f"unknown steklov boundary group {tag_group!r}; have {sorted(st_groups)}")
    edges = mesh.boundary_edges[(groups == tag_group) & (tags == "steklov")]
    u = np.zeros(len(mesh.nodes))
    u[pair.nodes] = pair.trace
    em = _edge_mass(mesh.nodes, edges)
    ue = u[edges]
    return float(np.einsum("ea,eab,eb->", ue, em, ue))


def cutoff_energy(n: int, delta: float, l: float) -> float:
    """Dirichlet energy of the logarithmic cutoff about a curve of length l.

    The cutoff equals 1 within distance delta^2 of the curve, vanishes beyond
    delta, and is log-linear in between; the energy is evaluated in the
    product metric near the curve.
    """
    if int(n) != n or n < 3:
        raise ValueError("n must be an integer >= 3")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not l > 0.0:
        raise ValueError("l must be positive")
    lg = math.log(delta)
    if n == 3:
        return 2.0 * math.pi * l / (-lg)
    k = n - 3
    return sphere_area(n - 2) * l * (delta**k - delta ** (2 * k)) / (k * lg * lg)


# -- output --------------------------------------------------------------------------------

def spectrum_rows(spec: Spectrum) -> list:
    rows = []
    for e in spec:
        members = e.members or ()
        rows.append({
            "value": e.value,
            "multiplicity": e.multiplicity,
            "mode": ";".join(str(m) for m, _, _ in members) if members else "",
            "branch": ";".join(str(b) for _, b, _ in members) if members else e.label,
        })
    return rows


def write_spectrum_csv(spec: Spectrum, sink: TextIO, digits: int = 12) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["value", "multiplicity", "mode", "branch"])
    for row in spectrum_rows(spec):
        w.writerow([f"{row['value']:.{digits}g}", row["multiplicity"], row["mode"], row["branch"]])


def write_spectrum_json(spec: Spectrum, sink: TextIO) -> None:
    json.dump({"entries": spectrum_rows(spec)}, sink, indent=2)
    sink.write("\n")
