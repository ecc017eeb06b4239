"""Graded triangular meshes of meridian profiles and the SMESH v1 exchange format.

Meshing is Delaunay refinement: the boundary is sampled on the exact curves
at the local target length, encroached boundary segments are split at their
curve midpoints, and triangles that are too large or too skinny receive
their circumcentre.  Two relaxed Laplacian passes finish the job.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, TextIO

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .geometry import GEOM_TOL, TAGS, MeridianProfile, Segment, points_in_profile

MESH_HEADER = "SMESH v1"
_REFINE_ANGLE = 24.0
_MAX_NODES = 400_000


class MeshingError(RuntimeError):
    pass


class MeshFormatError(ValueError):
    def __init__(self, lineno: int, msg: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}")


@dataclass(frozen=True)
class MeshParams:
    """Target edge length `h` plus local lengths near named features.

    Recognised features: ``wall``, ``corners``, ``inner``, ``outer``,
    ``steklov`` and ``axis``.  Away from a feature the local length grows
    linearly with slope `slope`, so neighbouring sizes differ by at most a
    factor ``1 + slope`` over one local length.
    """

    h: float
    grading: Mapping[str, float] = field(default_factory=dict)
    max_aspect: float = 5.0
    slope: float = 0.3
    min_angle: float = 20.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        for k, v in self.grading.items():
            if not 0 < v <= self.h:
                raise ValueError(f"grading[{k!r}] = {v} must lie in (0, h]")
        if self.max_aspect < 2:
            raise ValueError("max_aspect must be >= 2")
        if not 0 < self.slope <= 0.5:
            raise ValueError("slope must lie in (0, 0.5]")

    def refined(self, factor: float = 0.5) -> "MeshParams":
        """Scale the whole size field: h, every graded length, and the growth slope."""
        return replace(self, h=self.h * factor,
                       grading={k: v * factor for k, v in self.grading.items()},
                       slope=self.slope * factor)


@dataclass(frozen=True)
class Mesh2D:
    nodes: np.ndarray           # (N, 2) of (r, z)
    triangles: np.ndarray       # (T, 3) node indices, counterclockwise
    boundary_edges: np.ndarray  # (E, 2) node pairs
    edge_tags: tuple            # tag per boundary edge ("steklov" | "axis")
    edge_groups: tuple = ()     # boundary group per edge (outer, inner, wall, ...)

    @property
    def groups(self) -> list:
        return sorted(set(self.edge_groups))

    def axis_nodes(self) -> np.ndarray:
        tags = np.asarray(self.edge_tags)
        return np.unique(self.boundary_edges[tags == "axis"])

    def steklov_nodes(self) -> np.ndarray:
        tags = np.asarray(self.edge_tags)
        return np.unique(self.boundary_edges[tags == "steklov"])

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def triangle_areas(self) -> np.ndarray:
        return _signed_areas(self.nodes, self.triangles)

    def min_angle(self) -> float:
        return float(np.degrees(_angles(self.nodes, self.triangles).min()))

    def summary(self) -> dict:
        return {
            "nodes": int(len(self.nodes)),
            "triangles": int(len(self.triangles)),
            "boundary_edges": int(len(self.boundary_edges)),
            "min_angle_deg": self.min_angle(),
        }


# -- geometry helpers ------------------------------------------------------------

def _signed_areas(p, t):
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _angles(p, t):
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(c - a, axis=1)
    lc = np.linalg.norm(a - b, axis=1)

    def ang(opp, s1, s2):
        cosv = (s1 * s1 + s2 * s2 - opp * opp) / (2 * s1 * s2)
        return np.arccos(np.clip(cosv, -1.0, 1.0))

    return np.stack([ang(la, lb, lc), ang(lb, lc, la), ang(lc, la, lb)], axis=1)


def _circumcenters(p, t):
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    bx, by = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    cx, cy = c[:, 0] - a[:, 0], c[:, 1] - a[:, 1]
    d = 2.0 * (bx * cy - by * cx)
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return np.stack([ux + a[:, 0], uy + a[:, 1]], axis=1), np.hypot(ux, uy)


def size_field(profile: MeridianProfile, params: MeshParams):
    """Return a vectorised local-length function for the given profile."""
    feats = []
    for name, s in params.grading.items():
        if name == "corners":
            cpts = profile.corners()
            if len(cpts):
                feats.append((s, lambda q, cp=cpts: np.min(
                    np.linalg.norm(q[:, None, :] - cp[None, :, :], axis=2), axis=1)))
            continue
        if name == "wall":
            pieces = [c for c in profile.curves if c.group in ("wall", "fillet_outer", "fillet_inner")]
        elif name == "steklov":
            pieces = profile.steklov_pieces
        elif name in ("inner", "outer", "axis"):
            pieces = [c for c in profile.curves if c.group == name]
        else:
            raise ValueError(f"unknown grading feature {name!r}")
        for c in pieces:
            feats.append((s, c.distance))

    def f(q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        out = np.full(len(q), params.h)
        for s, dist in feats:
            out = np.minimum(out, s + params.slope * dist(q))
        return out

    return f


# -- mesher -------------------------------------------------------------------------

class _Builder:
    def __init__(self, profile: MeridianProfile, params: MeshParams):
        self.profile = profile
        self.params = params
        self.size = size_field(profile, params)
        self.pts: list = []
        self.segs: list = []  # [a, b, piece, ta, tb]

    def add_point(self, xy) -> int:
        r = float(xy[0])
        self.pts.append((0.0 if abs(r) <= 1e-12 else r, float(xy[1])))
        return len(self.pts) - 1

    def discretize_boundary(self):
        curves = self.profile.curves
        first_idx = None
        prev_end = None
        for ip, c in enumerate(curves):
            t = np.linspace(0.0, 1.0, 4001)
            xy = c.point(t)
            local = self.size(xy)
            if c.length < 1e-3 * local.min():
                raise MeshingError(
                    f"boundary piece {ip} ({c.group}) has length {c.length:.3e}, far below the "
                    f"local target {local.min():.3e}; add grading for this feature"
                )
            dens = c.length / local
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))])
            nseg = max(1, int(math.ceil(cum[-1] - 1e-9)))
            if not isinstance(c, Segment):
                nseg = max(nseg, int(math.ceil(abs(c.sweep) / (math.pi / 8))))
            tk = np.interp(np.linspace(0.0, cum[-1], nseg + 1), cum, t)
            tk[0], tk[-1] = 0.0, 1.0
            idx = [prev_end if prev_end is not None else self.add_point(c.point(0.0))]
            if first_idx is None:
                first_idx = idx[0]
            for tv in tk[1:-1]:
                idx.append(self.add_point(c.point(tv)))
            if ip == len(curves) - 1:
                idx.append(first_idx)
            else:
                idx.append(self.add_point(c.point(1.0)))
            prev_end = idx[-1]
            for a, b, ta, tb in zip(idx[:-1], idx[1:], tk[:-1], tk[1:]):
                self.segs.append([a, b, ip, float(ta), float(tb)])

    def split_segment(self, k: int) -> None:
        a, b, ip, ta, tb = self.segs[k]
        tm = 0.5 * (ta + tb)
        m = self.add_point(self.profile.curves[ip].point(tm))
        self.segs[k] = [a, m, ip, ta, tm]
        self.segs.append([m, b, ip, tm, tb])

    def _seg_arrays(self):
        s = np.array([[a, b] for a, b, *_ in self.segs], dtype=np.int64)
        p = np.asarray(self.pts)
        mid = 0.5 * (p[s[:, 0]] + p[s[:, 1]])
        rad = 0.5 * np.linalg.norm(p[s[:, 0]] - p[s[:, 1]], axis=1)
        return s, mid, rad

    def encroached_by(self, q: np.ndarray, s, mid, rad, tree) -> list:
        """Indices of segments whose diametral circle strictly contains some row of q."""
        hits = set()
        rmax = rad.max()
        for i, cand in enumerate(tree.query_ball_point(q, rmax)):
            for k in cand:
                d2 = np.sum((q[i] - mid[k]) ** 2)
                if d2 < rad[k] ** 2 * (1.0 - 1e-10):
                    hits.add(k)
        return sorted(hits)

    def fix_encroachment(self):
        for _ in range(200):
            s, mid, rad = self._seg_arrays()
            p = np.asarray(self.pts)
            tree = cKDTree(p)
            bad = []
            for k, cand in enumerate(tree.query_ball_point(mid, rad)):
                for v in cand:
                    if v != s[k, 0] and v != s[k, 1]:
                        if np.sum((p[v] - mid[k]) ** 2) < rad[k] ** 2 * (1.0 - 1e-10):
                            bad.append(k)
                            break
            if not bad:
                return
            for k in bad:
                self.split_segment(k)
        raise MeshingError("boundary encroachment did not resolve")

    def triangulate(self):
        p = np.asarray(self.pts)
        tri = Delaunay(p).simplices
        cen = p[tri].mean(axis=1)
        keep = points_in_profile(self.profile, cen)
        tri = tri[keep]
        area = _signed_areas(p, tri)
        flip = area < 0
        tri[flip] = tri[flip][:, [0, 2, 1]]
        return p, tri

    def missing_segments(self, tri) -> list:
        e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        have = set(map(tuple, np.sort(e, axis=1).tolist()))
        return [k for k, (a, b, *_) in enumerate(self.segs) if (min(a, b), max(a, b)) not in have]

    def refine(self, max_iter: int = 300):
        for it in range(max_iter):
            if len(self.pts) > _MAX_NODES:
                raise MeshingError(f"refinement exceeded {_MAX_NODES} nodes; check h and grading")
            self.fix_encroachment()
            p, tri = self.triangulate()
            missing = self.missing_segments(tri)
            if missing:
                for k in missing:
                    self.split_segment(k)
                continue
            ang = np.degrees(_angles(p, tri).min(axis=1))
            cc, R = _circumcenters(p, tri)
            local = self.size(p[tri].mean(axis=1))
            ratio = math.sqrt(3.0) * R / local
            bad = (ang < _REFINE_ANGLE) | (ratio > 1.0)
            if not bad.any():
                return
            idx = np.flatnonzero(bad)
            prio = np.where(ang[idx] < _REFINE_ANGLE, 1e6 - ang[idx], ratio[idx])
            idx = idx[np.argsort(-prio, kind="stable")]
            s, mid, rad = self._seg_arrays()
            segtree = cKDTree(mid)
            cands = cc[idx]
            inside = points_in_profile(self.profile, cands)
            enc = {}
            for i, cand in enumerate(segtree.query_ball_point(cands, rad.max())):
                hit = [k for k in cand if np.sum((cands[i] - mid[k]) ** 2) < rad[k] ** 2 * (1 - 1e-10)]
                if hit:
                    enc[i] = hit
            to_split = set()
            accepted = []
            acc_tree_pts = []
            for i, t in enumerate(idx):
                if i in enc:
                    to_split.update(enc[i])
                    continue
                if not inside[i]:
                    continue
                q = cands[i]
                mind = 0.5 * min(R[t], local[t])
                if acc_tree_pts:
                    d = np.min(np.linalg.norm(np.asarray(acc_tree_pts) - q, axis=1)) if len(acc_tree_pts) < 64 else None
                    if d is None:
                        d = cKDTree(np.asarray(acc_tree_pts)).query(q)[0]
                    if d < mind:
                        continue
                accepted.append(q)
                acc_tree_pts.append(q)
            if not accepted and not to_split:
                raise MeshingError("refinement stalled: no admissible insertion points")
            for k in sorted(to_split):
                self.split_segment(k)
            for q in accepted:
                self.add_point(q)
        raise MeshingError(f"refinement did not converge in {max_iter} iterations")


def _smooth(builder: _Builder, passes: int = 2, relax: float = 0.5):
    """Relaxed Laplacian smoothing of interior nodes; a pass is undone if it hurts quality."""
    nb = len(builder.pts)
    on_boundary = np.zeros(nb, dtype=bool)
    for a, b, *_ in builder.segs:
        on_boundary[a] = on_boundary[b] = True
    p, tri = builder.triangulate()
    best = np.degrees(_angles(p, tri).min())
    for _ in range(passes):
        acc = np.zeros_like(p)
        cnt = np.zeros(len(p))
        for i, j in ((0, 1), (1, 2), (2, 0), (1, 0), (2, 1), (0, 2)):
            np.add.at(acc, tri[:, i], p[tri[:, j]])
            np.add.at(cnt, tri[:, i], 1.0)
        move = ~on_boundary & (cnt > 0)
        newp = p.copy()
        newp[move] = p[move] + relax * (acc[move] / cnt[move, None] - p[move])
        old = list(builder.pts)
        builder.pts = [tuple(x) for x in newp]
        ok = points_in_profile(builder.profile, newp[move]).all()
        if ok:
            s, mid, rad = builder._seg_arrays()
            tree = cKDTree(newp[move])
            for k, cand in enumerate(tree.query_ball_point(mid, rad)):
                if any(np.sum((newp[move][v] - mid[k]) ** 2) < rad[k] ** 2 for v in cand):
                    ok = False
                    break
        if ok:
            p2, tri2 = builder.triangulate()
            ok = not builder.missing_segments(tri2)
            if ok:
                q = np.degrees(_angles(p2, tri2).min())
                ok = q >= min(best, builder.params.min_angle)
        if not ok:
            builder.pts = old
            break
        p, tri = p2, tri2
        best = q


def generate_mesh(profile: MeridianProfile, params: MeshParams) -> Mesh2D:
    """Conforming, graded triangulation of the meridian region."""
    b = _Builder(profile, params)
    b.discretize_boundary()
    b.refine()
    _smooth(b)
    p, tri = b.triangulate()
    used = np.zeros(len(p), dtype=bool)
    used[tri.ravel()] = True
    if not used.all():
        raise MeshingError(f"{int((~used).sum())} nodes are not attached to any triangle")
    edges = np.array([[a, c] for a, c, *_ in b.segs], dtype=np.int64)
    tags = tuple(profile.curves[s[2]].tag for s in b.segs)
    groups = tuple(profile.curves[s[2]].group for s in b.segs)
    mesh = Mesh2D(p, tri.astype(np.int64), edges, tags, groups)
    diag = validate_mesh(mesh, min_angle=params.min_angle, max_aspect=params.max_aspect)
    if not diag.ok:
        raise MeshingError("generated mesh failed validation: " + "; ".join(diag.failures))
    return mesh


# -- validation ----------------------------------------------------------------------

@dataclass
class MeshDiagnostics:
    ok: bool
    failures: list
    min_angle_deg: float
    max_aspect: float
    negative_area: list
    open_chain_nodes: list
    n_nodes: int
    n_triangles: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def validate_mesh(mesh: Mesh2D, min_angle: float = 20.0, max_aspect: Optional[float] = None) -> MeshDiagnostics:
    """Check orientation, angles, boundary closure and tag coverage."""
    fails = []
    p, t = mesh.nodes, mesh.triangles
    area = _signed_areas(p, t) if len(t) else np.zeros(0)
    neg = np.flatnonzero(area <= 1e-14).tolist()
    if neg:
        fails.append(f"nonpositive area at triangle indices {neg[:10]}")
    minang = math.degrees(_angles(p, t).min()) if len(t) else 0.0
    if min_angle and minang < min_angle - 1e-9:
        fails.append(f"minimum angle {minang:.2f} deg below {min_angle}")
    aspect = 0.0
    if len(t):
        la = np.linalg.norm(p[t[:, 1]] - p[t[:, 2]], axis=1)
        lb = np.linalg.norm(p[t[:, 2]] - p[t[:, 0]], axis=1)
        lc = np.linalg.norm(p[t[:, 0]] - p[t[:, 1]], axis=1)
        s = 0.5 * (la + lb + lc)
        inr = np.abs(area) / s
        circ = la * lb * lc / (4 * np.maximum(np.abs(area), 1e-300))
        aspect = float(np.max(circ / (2 * inr)))
        if max_aspect is not None and aspect > max_aspect:
            fails.append(f"aspect ratio {aspect:.2f} exceeds {max_aspect}")
    if np.any(p[:, 0] < -GEOM_TOL):
        fails.append("nodes with r < 0")

    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]) if len(t) else np.zeros((0, 2), int)
    key, cnt = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
    if np.any(cnt > 2):
        fails.append("non-manifold edges shared by more than two triangles")
    topo = set(map(tuple, key[cnt == 1].tolist()))
    declared = set(map(tuple, np.sort(mesh.boundary_edges, axis=1).tolist())) if len(mesh.boundary_edges) else set()
    if topo - declared:
        fails.append(f"{len(topo - declared)} topological boundary edges missing from boundary_edges")
    if declared - topo:
        fails.append(f"{len(declared - topo)} declared boundary edges are not on the boundary")
    deg = np.zeros(len(p), dtype=int)
    if len(mesh.boundary_edges):
        np.add.at(deg, mesh.boundary_edges.ravel(), 1)
    open_nodes = np.flatnonzero((deg % 2) == 1).tolist()
    if open_nodes:
        fails.append(f"open boundary chain at nodes {open_nodes[:10]}")
    bad_tags = [x for x in mesh.edge_tags if x not in TAGS]
    if bad_tags or len(mesh.edge_tags) != len(mesh.boundary_edges):
        fails.append("boundary edges with missing or unknown tags")
    axis_e = mesh.boundary_edges[np.asarray(mesh.edge_tags) == "axis"] if len(mesh.edge_tags) else []
    if len(axis_e) and np.any(np.abs(p[np.asarray(axis_e).ravel(), 0]) > GEOM_TOL):
        fails.append("axis-tagged edges with nodes off r = 0")
    return MeshDiagnostics(
        ok=not fails, failures=fails, min_angle_deg=minang, max_aspect=aspect,
        negative_area=neg, open_chain_nodes=open_nodes, n_nodes=len(p), n_triangles=len(t),
    )


# -- SMESH v1 ----------------------------------------------------------------------------

def write_mesh(mesh: Mesh2D, sink: TextIO) -> None:
    sink.write(MESH_HEADER + "\n")
    sink.write(f"nodes {len(mesh.nodes)}\n")
    for i, (r, z) in enumerate(mesh.nodes):
        sink.write(f"{i} {float(r)!r} {float(z)!r}\n")
    sink.write(f"elements {len(mesh.triangles)}\n")
    for i, (a, b, c) in enumerate(mesh.triangles):
        sink.write(f"{i} {a} {b} {c}\n")
    sink.write(f"boundary {len(mesh.boundary_edges)}\n")
    groups = mesh.edge_groups or ("",) * len(mesh.boundary_edges)
    for (a, b), tag, g in zip(mesh.boundary_edges, mesh.edge_tags, groups):
        sink.write(f"{a} {b} {tag}" + (f" {g}" if g else "") + "\n")


def read_mesh(source: TextIO) -> Mesh2D:
    lines = []
    for i, raw in enumerate(source, start=1):
        s = raw.split("#", 1)[0].strip()
        if s:
            lines.append((i, s))
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 0
            raise MeshFormatError(last + 1, "unexpected end of file")
        pos += 1
        return lines[pos - 1]

    ln, s = take()
    if s != MESH_HEADER:
        raise MeshFormatError(ln, f"expected header {MESH_HEADER!r}, got {s!r}")

    def count(keyword):
        ln, s = take()
        tok = s.split()
        if len(tok) != 2 or tok[0] != keyword or not tok[1].isdigit():
            raise MeshFormatError(ln, f"expected '{keyword} <count>'")
        return int(tok[1])

    n = count("nodes")
    nodes = np.empty((n, 2))
    for k in range(n):
        ln, s = take()
        tok = s.split()
        try:
            if len(tok) != 3 or int(tok[0]) != k:
                raise ValueError
            nodes[k] = float(tok[1]), float(tok[2])
        except ValueError:
            raise MeshFormatError(ln, f"malformed node record {s!r}") from None
    m = count("elements")
    tris = np.empty((m, 3), dtype=np.int64)
    for k in range(m):
        ln, s = take()
        tok = s.split()
        try:
            if len(tok) != 4 or int(tok[0]) != k:
                raise ValueError
            tris[k] = [int(x) for x in tok[1:]]
        except ValueError:
            raise MeshFormatError(ln, f"malformed element record {s!r}") from None
        if tris[k].min() < 0 or tris[k].max() >= n:
            raise MeshFormatError(ln, f"node index out of range in {s!r}")
    nb = count("boundary")
    edges = np.empty((nb, 2), dtype=np.int64)
    tags, groups = [], []
    for k in range(nb):
        ln, s = take()
        tok = s.split()
        if len(tok) not in (3, 4):
            raise MeshFormatError(ln, f"malformed boundary record {s!r}")
        try:
            edges[k] = int(tok[0]), int(tok[1])
        except ValueError:
            raise MeshFormatError(ln, f"malformed boundary record {s!r}") from None
        if edges[k].min() < 0 or edges[k].max() >= n:
            raise MeshFormatError(ln, f"node index out of range in {s!r}")
        if tok[2] not in TAGS:
            raise MeshFormatError(ln, f"unknown tag {tok[2]!r}")
        tags.append(tok[2])
        groups.append(tok[3] if len(tok) == 4 else tok[2])
    if pos != len(lines):
        raise MeshFormatError(lines[pos][0], "trailing content after boundary block")
    return Mesh2D(nodes, tris, edges, tuple(tags), tuple(groups))
