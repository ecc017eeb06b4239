"""Symmetric linear algebra kernels used by the Steklov solver.

Sparse matrices are stored as their lower triangle in CSR form.  Cholesky
works in band storage after a reverse Cuthill-McKee reordering; the Schur
complement onto boundary unknowns is formed from the forward-substituted
coupling block; eigenproblems go through cyclic Jacobi rotations.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky hit a nonpositive pivot.

    ``pivot`` is the 1-based elimination step, ``row`` the 0-based index of
    that pivot in the caller's numbering.
    """

    def __init__(self, pivot: int, row: int, value: float):
        self.pivot = pivot
        self.row = row
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} (row {row}) = {value:.3e}"
        )


class NoConvergence(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SparseSym:
    """Symmetric matrix held as its lower triangle (diagonal included) in CSR."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @classmethod
    def from_coo(cls, n: int, rows, cols, vals) -> "SparseSym":
        """Sum duplicate triplets and keep entries with row >= col.

        The triplets must describe a symmetric matrix; the strict upper
        triangle is discarded rather than folded in.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        key = rows * n + cols
        order = np.argsort(key, kind="stable")
        key, vals = key[order], vals[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(vals, start) if len(vals) else vals
        nz = np.abs(summed) > 1e-300
        uniq, summed = uniq[nz], summed[nz]
        r, c = uniq // n, uniq % n
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        return cls(n, np.cumsum(indptr), c.astype(np.int64), summed)

    @classmethod
    def from_dense(cls, a) -> "SparseSym":
        a = np.asarray(a, dtype=float)
        i, j = np.nonzero(np.tril(a))
        return cls.from_coo(a.shape[0], i, j, a[i, j])

    def coo(self):
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return rows, self.indices, self.data

    def to_dense(self) -> np.ndarray:
        r, c, v = self.coo()
        a = np.zeros((self.n, self.n))
        a[r, c] = v
        a[c, r] = v
        return a

    def diagonal(self) -> np.ndarray:
        r, c, v = self.coo()
        d = np.zeros(self.n)
        m = r == c
        d[r[m]] = v[m]
        return d

    def matvec(self, x: np.ndarray) -> np.ndarray:
        r, c, v = self.coo()
        y = np.zeros((self.n,) + x.shape[1:])
        np.add.at(y, r, v[:, None] * x[c] if x.ndim > 1 else v * x[c])
        off = r != c
        np.add.at(y, c[off], v[off, None] * x[r[off]] if x.ndim > 1 else v[off] * x[r[off]])
        return y

    def principal(self, idx: np.ndarray) -> "SparseSym":
        """Principal submatrix on `idx` (in the given order)."""
        idx = np.asarray(idx, dtype=np.int64)
        pos = np.full(self.n, -1, dtype=np.int64)
        pos[idx] = np.arange(len(idx))
        r, c, v = self.coo()
        pr, pc = pos[r], pos[c]
        m = (pr >= 0) & (pc >= 0)
        pr, pc, v = pr[m], pc[m], v[m]
        lo, hi = np.minimum(pr, pc), np.maximum(pr, pc)
        return SparseSym.from_coo(len(idx), hi, lo, v)

    def block(self, rows_idx: np.ndarray, cols_idx: np.ndarray) -> tuple:
        """Off-diagonal block A[rows_idx, cols_idx] as COO triplets (local indices)."""
        pr_map = np.full(self.n, -1, dtype=np.int64)
        pc_map = np.full(self.n, -1, dtype=np.int64)
        pr_map[rows_idx] = np.arange(len(rows_idx))
        pc_map[cols_idx] = np.arange(len(cols_idx))
        r, c, v = self.coo()
        out_r, out_c, out_v = [], [], []
        for a, b in ((r, c), (c, r)):
            m = (pr_map[a] >= 0) & (pc_map[b] >= 0) & (r != c)
            out_r.append(pr_map[a[m]])
            out_c.append(pc_map[b[m]])
            out_v.append(v[m])
        return np.concatenate(out_r), np.concatenate(out_c), np.concatenate(out_v)

    def norm(self) -> float:
        r, c, v = self.coo()
        w = np.where(r == c, 1.0, 2.0)
        return float(np.sqrt(np.sum(w * v * v)))


@dataclass(frozen=True)
class DenseSym:
    """Symmetric matrix in packed lower-triangular (row-major) storage."""

    n: int
    packed: np.ndarray

    @classmethod
    def from_array(cls, a) -> "DenseSym":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        i, j = np.tril_indices(a.shape[0])
        return cls(a.shape[0], 0.5 * (a[i, j] + a[j, i]))

    def to_array(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        i, j = np.tril_indices(self.n)
        a[i, j] = self.packed
        a[j, i] = self.packed
        return a


# -- ordering -------------------------------------------------------------------

def _adjacency(n: int, rows: np.ndarray, cols: np.ndarray) -> list:
    off = rows != cols
    r, c = rows[off], cols[off]
    src = np.concatenate([r, c])
    dst = np.concatenate([c, r])
    order = np.argsort(src, kind="stable")
    src, dst = src[order], dst[order]
    bounds = np.searchsorted(src, np.arange(n + 1))
    return [dst[bounds[i]:bounds[i + 1]] for i in range(n)]


def _bfs_levels(adj, deg, start, seen_mask):
    level = {start: 0}
    order = [start]
    q = deque([start])
    while q:
        u = q.popleft()
        for v in adj[u]:
            v = int(v)
            if v not in level:
                level[v] = level[u] + 1
                order.append(v)
                q.append(v)
    return level, order


def rcm_ordering(a: SparseSym) -> np.ndarray:
    """Reverse Cuthill-McKee permutation; perm[k] is the original index placed at k."""
    rows, cols, _ = a.coo()
    adj = _adjacency(a.n, rows, cols)
    deg = np.array([len(x) for x in adj])
    visited = np.zeros(a.n, dtype=bool)
    result = []
    for seed in np.argsort(deg, kind="stable"):
        if visited[seed]:
            continue
        # pseudo-peripheral start node (George-Liu)
        start = int(seed)
        level, _ = _bfs_levels(adj, deg, start, visited)
        ecc = max(level.values())
        while True:
            last = [v for v, l in level.items() if l == ecc]
            cand = min(last, key=lambda v: (deg[v], v))
            lv2, _ = _bfs_levels(adj, deg, cand, visited)
            e2 = max(lv2.values())
            if e2 <= ecc:
                break
            start, level, ecc = cand, lv2, e2
        comp = [start]
        visited[start] = True
        head = 0
        while head < len(comp):
            u = comp[head]
            head += 1
            nbrs = [int(v) for v in adj[u] if not visited[v]]
            nbrs.sort(key=lambda v: (deg[v], v))
            for v in nbrs:
                visited[v] = True
            comp.extend(nbrs)
        result.extend(comp)
    return np.array(result[::-1], dtype=np.int64)


def bandwidth(a: SparseSym, perm: Optional[np.ndarray] = None) -> int:
    r, c, _ = a.coo()
    if perm is not None:
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        r, c = inv[r], inv[c]
    return int(np.max(np.abs(r - c))) if len(r) else 0


# -- banded Cholesky ---------------------------------------------------------------

@numba.njit(cache=True)
def _band_cholesky_kernel(ab, b):
    """In-place Cholesky of a band matrix; ab[k, j] holds A[j+k, j].

    Returns -1 on success, else the 0-based failing step.
    """
    n = ab.shape[1]
    for j in range(n):
        d = ab[0, j]
        if not d > 0.0:
            return j
        d = math.sqrt(d)
        ab[0, j] = d
        kmax = min(b, n - 1 - j)
        for k in range(1, kmax + 1):
            ab[k, j] /= d
        # update trailing columns j+q, rows j+p (p >= q)
        for q in range(1, kmax + 1):
            lq = ab[q, j]
            if lq == 0.0:
                continue
            col = j + q
            for p in range(q, kmax + 1):
                ab[p - q, col] -= ab[p, j] * lq
    return -1


@numba.njit(cache=True)
def _band_forward(ab, b, x):
    """Solve L y = x in place for a matrix of right-hand sides (n x m)."""
    n = ab.shape[1]
    m = x.shape[1]
    for j in range(n):
        inv = 1.0 / ab[0, j]
        for c in range(m):
            x[j, c] *= inv
        kmax = min(b, n - 1 - j)
        for k in range(1, kmax + 1):
            l = ab[k, j]
            if l == 0.0:
                continue
            for c in range(m):
                x[j + k, c] -= l * x[j, c]


@numba.njit(cache=True)
def _band_backward(ab, b, x):
    """Solve L^T z = x in place."""
    n = ab.shape[1]
    m = x.shape[1]
    for j in range(n - 1, -1, -1):
        kmax = min(b, n - 1 - j)
        for k in range(1, kmax + 1):
            l = ab[k, j]
            if l == 0.0:
                continue
            for c in range(m):
                x[j, c] -= l * x[j + k, c]
        inv = 1.0 / ab[0, j]
        for c in range(m):
            x[j, c] *= inv


@dataclass
class CholeskyFactor:
    """L L^T = P A P^T with L banded; ``perm[k]`` is the original row at position k."""

    perm: np.ndarray
    band: np.ndarray
    bw: int

    @property
    def n(self) -> int:
        return self.band.shape[1]

    def lower(self) -> np.ndarray:
        """Dense L of the permuted matrix."""
        L = np.zeros((self.n, self.n))
        for k in range(self.bw + 1):
            j = np.arange(self.n - k)
            L[j + k, j] = self.band[k, : self.n - k]
        return L

    def forward(self, x: np.ndarray) -> np.ndarray:
        """y = L^-1 P x."""
        vec = x.ndim == 1
        y = np.array(x, dtype=float).reshape(self.n, -1)[self.perm].copy()
        _band_forward(self.band, self.bw, y)
        return y[:, 0] if vec else y

    def backward(self, y: np.ndarray) -> np.ndarray:
        """x = P^T L^-T y."""
        vec = y.ndim == 1
        z = np.array(y, dtype=float).reshape(self.n, -1).copy()
        _band_backward(self.band, self.bw, z)
        out = np.empty_like(z)
        out[self.perm] = z
        return out[:, 0] if vec else out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.backward(self.forward(rhs))


def cholesky(a, ordering: str = "auto") -> CholeskyFactor:
    """Cholesky factor of an SPD matrix (SparseSym, DenseSym or array).

    ordering: "natural", "rcm", or "auto" (RCM only when it narrows the band).
    """
    if isinstance(a, DenseSym):
        a = SparseSym.from_dense(a.to_array())
    elif not isinstance(a, SparseSym):
        a = SparseSym.from_dense(a)
    n = a.n
    natural = np.arange(n, dtype=np.int64)
    if ordering == "natural":
        perm = natural
    elif ordering in ("rcm", "auto"):
        perm = rcm_ordering(a)
        if ordering == "auto" and bandwidth(a, perm) >= bandwidth(a):
            perm = natural
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    inv = np.empty(n, dtype=np.int64)
    inv[perm] = np.arange(n)
    r, c, v = a.coo()
    pr, pc = inv[r], inv[c]
    hi, lo = np.maximum(pr, pc), np.minimum(pr, pc)
    bw = int(np.max(hi - lo)) if len(v) else 0
    band = np.zeros((bw + 1, n))
    band[hi - lo, lo] = v
    fail = _band_cholesky_kernel(band, bw)
    if fail >= 0:
        raise NotPositiveDefinite(fail + 1, int(perm[fail]), float(band[0, fail]))
    return CholeskyFactor(perm, band, bw)


# -- Schur complement ------------------------------------------------------------

def schur_complement(k: SparseSym, boundary, factor_out: Optional[list] = None) -> DenseSym:
    """S = K_BB - K_BI K_II^-1 K_IB onto the boundary index set.

    With K_II = L L^T (after reordering), S = K_BB - Y^T Y where
    Y = L^-1 P K_IB, which keeps S symmetric by construction.
    """
    boundary = np.asarray(boundary, dtype=np.int64)
    is_b = np.zeros(k.n, dtype=bool)
    is_b[boundary] = True
    interior = np.flatnonzero(~is_b)
    s = k.principal(boundary).to_dense()
    if len(interior):
        kii = k.principal(interior)
        factor = cholesky(kii, ordering="rcm")
        r, c, v = k.block(interior, boundary)
        kib = np.zeros((len(interior), len(boundary)))
        np.add.at(kib, (r, c), v)
        y = factor.forward(kib)
        s -= y.T @ y
        if factor_out is not None:
            factor_out.extend([factor, interior, kib])
    return DenseSym.from_array(s)


# -- Jacobi eigensolver ------------------------------------------------------------

@numba.njit(cache=True)
def _jacobi_kernel(a, vt, tol, max_sweeps):
    """Cyclic Jacobi on a full symmetric array; returns sweeps used or -1.

    ``vt`` accumulates the transposed eigenvector matrix so that every
    update runs along contiguous rows.
    """
    n = a.shape[0]
    newp = np.empty(n)
    newq = np.empty(n)
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if math.sqrt(2.0 * off) <= tol:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                if abs(apq) <= 1e-18 * math.sqrt(abs(app * aqq)):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    newp[k] = c * apk - s * aqk
                    newq[k] = s * apk + c * aqk
                newp[p] = app - t * apq
                newq[q] = aqq + t * apq
                newp[q] = 0.0
                newq[p] = 0.0
                for k in range(n):
                    a[p, k] = newp[k]
                    a[q, k] = newq[k]
                for k in range(n):
                    a[k, p] = newp[k]
                    a[k, q] = newq[k]
                for k in range(n):
                    vpk = vt[p, k]
                    vqk = vt[q, k]
                    vt[p, k] = c * vpk - s * vqk
                    vt[q, k] = s * vpk + c * vqk
    return -1


def eig_sym(a, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) by cyclic Jacobi."""
    arr = a.to_array() if isinstance(a, DenseSym) else np.array(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    arr = 0.5 * (arr + arr.T)
    n = arr.shape[0]
    norm = float(np.linalg.norm(arr))
    work = np.ascontiguousarray(arr)
    vt = np.eye(n)
    if n > 1 and norm > 0.0:
        used = _jacobi_kernel(work, vt, 1e-12 * norm, max_sweeps)
        if used < 0:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    vals = np.diag(work).copy()
    vecs = vt.T
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def eig_sym_generalized(s, m) -> tuple[np.ndarray, np.ndarray]:
    """Solve S x = lambda M x with M SPD; eigenvectors are M-orthonormal."""
    s_arr = s.to_array() if isinstance(s, DenseSym) else np.asarray(s, dtype=float)
    m_sym = m if isinstance(m, (DenseSym, SparseSym)) else DenseSym.from_array(m)
    factor = cholesky(m_sym, ordering="auto")
    z = factor.forward(s_arr)          # L^-1 P S
    c = factor.forward(z.T.copy())     # L^-1 P (L^-1 P S)^T = L^-1 P S P^T L^-T
    c = 0.5 * (c + c.T)
    vals, y = eig_sym(c)
    return vals, factor.backward(y)
