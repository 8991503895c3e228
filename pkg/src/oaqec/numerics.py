"""Dense complex linear-algebra kernels.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; nothing
in this module knows about channels or algebras.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Relative gap (times the spectral scale) below which neighbouring
#: eigenvalues are treated as one cluster.
CLUSTER_GAP = 1e-7


@dataclass(frozen=True)
class Tolerance:
    """Numerical cutoffs.

    ``abs_eps`` is an absolute threshold used for Hermiticity/membership
    checks; ``rank_eps`` is a singular-value cutoff relative to the largest
    singular value.
    """

    abs_eps: float = 1e-10
    rank_eps: float = 1e-10

    def __post_init__(self):
        for name in ("abs_eps", "rank_eps"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value!r}")


DEFAULT_TOL = Tolerance()


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a 2-d complex array, rejecting non-finite entries."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hs_inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr(x^dagger y)."""
    return complex(np.vdot(x, y))


def op_norm(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def is_hermitian(m: np.ndarray, atol: float = 1e-10) -> bool:
    return m.shape[0] == m.shape[1] and np.linalg.norm(m - dagger(m)) <= atol * max(1.0, np.linalg.norm(m))


def is_unitary(u: np.ndarray, atol: float = 1e-8) -> bool:
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.linalg.norm(dagger(u) @ u - np.eye(u.shape[0])) <= atol


def is_isometry(v: np.ndarray, atol: float = 1e-8) -> bool:
    return v.ndim == 2 and np.linalg.norm(dagger(v) @ v - np.eye(v.shape[1])) <= atol


def partial_trace(m, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every tensor factor of ``m`` whose index is not in ``keep``.

    Kept factors appear in ascending index order in the result. An empty
    ``keep`` gives the 1x1 matrix ``[[Tr m]]``.
    """
    m = as_matrix(m)
    dims = [int(d) for d in dims]
    if any(d <= 0 for d in dims):
        raise ValueError(f"dims must be positive, got {dims}")
    side = int(np.prod(dims))
    if m.shape != (side, side):
        raise ValueError(f"partial_trace expected a square matrix of side {side} for dims {dims}, got shape {m.shape}")
    keep = sorted(set(int(k) for k in keep))
    if keep and (keep[0] < 0 or keep[-1] >= len(dims)):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} factors")

    n = len(dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * n > len(letters):
        raise ValueError("too many tensor factors")
    row = list(letters[:n])
    col = [row[i] if i not in keep else letters[n + i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, m.reshape(dims + dims))
    kept_side = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(kept_side, kept_side)


def psd_decompose(h, tol: Tolerance = DEFAULT_TOL):
    """Split a Hermitian PSD matrix into its support and kernel.

    Returns ``(eigenvalues, support_vectors, kernel_vectors)`` where the
    eigenvalues belong to the support columns. Eigenvalues at most
    ``tol.rank_eps`` times the largest one count as zero.
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.linalg.norm(h)))
    if np.linalg.norm(h - dagger(h)) > tol.abs_eps * scale:
        raise ValueError(f"matrix is not Hermitian: |H - H^dag| = {np.linalg.norm(h - dagger(h)):.3e}")
    w, v = np.linalg.eigh((h + dagger(h)) / 2)
    top = max(float(w[-1]), 0.0) if w.size else 0.0
    if w.size and w[0] < -max(tol.abs_eps * scale, tol.rank_eps * top):
        raise ValueError(f"matrix is not positive semidefinite: most negative eigenvalue {w[0]:.3e}")
    support = w > tol.rank_eps * top if top > 0 else np.zeros(w.shape, dtype=bool)
    return w[support], v[:, support], v[:, ~support]


def pinv_sqrt(h, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """H^{-1/2} on the support of ``h`` and zero on its kernel."""
    w, sup, _ = psd_decompose(h, tol)
    return (sup * (1.0 / np.sqrt(w))) @ dagger(sup)


def null_space(lin, tol: Tolerance = DEFAULT_TOL, scale: float = 0.0) -> np.ndarray:
    """Orthonormal basis of the kernel of ``lin``, one vector per column.

    Singular values at most ``tol.rank_eps * max(sigma_max, scale)`` count
    as zero; pass ``scale`` when the rows have a known natural size so that a
    matrix made only of rounding noise is recognised as zero. Returns an
    ``(n, 0)`` array when ``lin`` is injective.
    """
    lin = np.asarray(lin, dtype=np.complex128)
    n = lin.shape[1]
    if lin.shape[0] == 0 or n == 0:
        return np.eye(n, dtype=np.complex128)
    # a complete V is only needed for wide matrices; tall ones already give n x n
    _, s, vh = np.linalg.svd(lin, full_matrices=lin.shape[0] < n)
    top = max(float(s[0]) if s.size else 0.0, scale)
    if top == 0:
        return np.eye(n, dtype=np.complex128)
    rank = int(np.sum(s > tol.rank_eps * top))
    return dagger(vh[rank:])


def range_basis(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the column space of ``m``."""
    m = np.asarray(m, dtype=np.complex128)
    if m.size == 0:
        return np.zeros((m.shape[0], 0), dtype=np.complex128)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((m.shape[0], 0), dtype=np.complex128)
    return u[:, s > tol.rank_eps * s[0]]


def projector_range(p, atol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the range of the projector ``p``.

    Raises if ``p`` is not an orthogonal projector within ``atol``.
    """
    p = as_matrix(p, "projector")
    if p.shape[0] != p.shape[1]:
        raise ValueError(f"projector must be square, got shape {p.shape}")
    if np.linalg.norm(p - dagger(p)) > atol or np.linalg.norm(p @ p - p) > atol:
        raise ValueError("matrix is not an orthogonal projector")
    w, v = np.linalg.eigh((p + dagger(p)) / 2)
    return v[:, w > 0.5][:, ::-1]


def cluster_eigenvalues(w: np.ndarray, gap: float = CLUSTER_GAP) -> list[np.ndarray]:
    """Group sorted eigenvalues into clusters of index arrays.

    Neighbours closer than ``gap`` times the spectral scale share a
    cluster. The scale is the spectral range, floored by the largest
    magnitude so that a numerically flat spectrum stays one cluster.
    """
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        return []
    order = np.argsort(w, kind="stable")
    ws = w[order]
    scale = max(ws[-1] - ws[0], np.max(np.abs(ws)), np.finfo(float).tiny)
    cuts = np.nonzero(np.diff(ws) > gap * scale)[0] + 1
    return [order[c] for c in np.split(np.arange(ws.size), cuts)]
