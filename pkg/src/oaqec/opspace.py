"""Operator subspaces and finite-dimensional *-algebras.

Every operator space is stored through a Hilbert-Schmidt orthonormal basis.
A :class:`StarAlgebra` additionally carries its unit projector ``P`` and a
lazily computed :class:`BlockStructure`, i.e. a unitary ``W`` such that

    W^dag X W = (x_1 (x) 1_{m_1}) (+) ... (+) (x_K (x) 1_{m_K}) (+) 0_C

for every element ``X``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .numerics import (
    CLUSTER_GAP,
    DEFAULT_TOL,
    Tolerance,
    as_matrix,
    cluster_eigenvalues,
    dagger,
    null_space,
    projector_range,
    range_basis,
)

MAX_DECOMPOSITION_ATTEMPTS = 8
STRUCTURE_ATOL = 1e-8


class DecompositionError(RuntimeError):
    """Raised when no verified block structure could be found."""

    def __init__(self, message: str, worst_residual: float):
        super().__init__(f"{message} (worst residual {worst_residual:.3e})")
        self.worst_residual = worst_residual


@dataclass(frozen=True)
class OperatorSpace:
    """Linear span of ``dim_h x dim_h`` operators.

    ``basis`` has shape ``(k, dim_h, dim_h)`` and is orthonormal for
    ``<X, Y> = Tr(X^dag Y)``.
    """

    dim_h: int
    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=np.complex128).reshape(-1, self.dim_h, self.dim_h)
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self) -> int:
        return self.dim

    def __iter__(self):
        return iter(self.basis)

    def vectors(self) -> np.ndarray:
        """Basis as the columns of a ``dim_h**2 x k`` matrix."""
        return self.basis.reshape(self.dim, -1).T

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal (Hilbert-Schmidt) projection of ``x`` onto the span."""
        if self.dim == 0:
            return np.zeros_like(x, dtype=np.complex128)
        coeffs = np.einsum("kij,ij->k", self.basis.conj(), x)
        return np.einsum("k,kij->ij", coeffs, self.basis)

    def gram_error(self) -> float:
        v = self.vectors()
        return float(np.max(np.abs(dagger(v) @ v - np.eye(self.dim)), initial=0.0))


@dataclass(frozen=True)
class BlockStructure:
    """Block data of a *-algebra.

    ``blocks`` lists ``(d_k, m_k)`` pairs: the algebra acts as the full
    matrix algebra on a ``d_k``-dimensional factor tensored with the
    identity on an ``m_k``-dimensional one. The last ``dim_c`` columns of
    ``intertwiner`` span the common kernel.
    """

    intertwiner: np.ndarray
    blocks: tuple[tuple[int, int], ...]
    dim_c: int
    residual: float = 0.0

    @property
    def offsets(self) -> list[int]:
        out, pos = [], 0
        for d, m in self.blocks:
            out.append(pos)
            pos += d * m
        return out

    def block_residual(self, x: np.ndarray) -> float:
        """Distance of ``W^dag x W`` from the canonical block form."""
        return _block_form_residual(dagger(self.intertwiner) @ x @ self.intertwiner, self.blocks)

    def compress(self, x: np.ndarray) -> list[np.ndarray]:
        """The ``d_k x d_k`` matrices ``x_k`` representing ``x`` in each block."""
        y = dagger(self.intertwiner) @ x @ self.intertwiner
        out = []
        for (d, m), off in zip(self.blocks, self.offsets):
            blk = y[off:off + d * m, off:off + d * m].reshape(d, m, d, m)
            out.append(np.einsum("ajbj->ab", blk) / m)
        return out


@dataclass(frozen=True, eq=False)
class StarAlgebra:
    """A *-closed, product-closed operator space with unit projector ``unit``.

    ``compressed`` records that some generator had to be compressed to
    ``P G P`` when the algebra was generated.
    """

    space: OperatorSpace
    unit: np.ndarray
    compressed: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def dim_h(self) -> int:
        return self.space.dim_h

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def basis(self) -> np.ndarray:
        return self.space.basis

    @property
    def structure(self) -> BlockStructure:
        """Block structure for the default seed, computed once."""
        if "structure" not in self._cache:
            with self._lock:
                if "structure" not in self._cache:
                    self._cache["structure"] = structure_decomposition(self)
        return self._cache["structure"]

    def closure_residual(self) -> float:
        """Largest deviation from the *-algebra invariants, over the basis."""
        worst = 0.0
        p = self.unit
        for x in self.basis:
            worst = max(worst, contains(self.space, dagger(x))[1])
            worst = max(worst, float(np.linalg.norm(p @ x - x)), float(np.linalg.norm(x @ p - x)))
            for y in self.basis:
                worst = max(worst, contains(self.space, x @ y)[1])
        if self.dim:
            worst = max(worst, contains(self.space, p)[1])
        return worst


def _vec_stack(ops) -> np.ndarray:
    ops = np.asarray(ops, dtype=np.complex128)
    return ops.reshape(ops.shape[0], -1).T


def orthonormalize(ops: Sequence[np.ndarray], dim_h: int, tol: Tolerance = DEFAULT_TOL) -> OperatorSpace:
    """HS-orthonormal basis of the span of ``ops``."""
    ops = [as_matrix(o, "operator") for o in ops]
    for o in ops:
        if o.shape != (dim_h, dim_h):
            raise ValueError(f"operator of shape {o.shape} does not act on a space of dimension {dim_h}")
    if not ops:
        return OperatorSpace(dim_h, np.zeros((0, dim_h, dim_h), dtype=np.complex128))
    cols = range_basis(_vec_stack(ops), tol)
    return OperatorSpace(dim_h, cols.T.reshape(-1, dim_h, dim_h))


def support_projector(space: OperatorSpace, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Projector onto the joint range of all basis elements."""
    if space.dim == 0:
        return np.zeros((space.dim_h, space.dim_h), dtype=np.complex128)
    r = range_basis(np.concatenate(list(space.basis), axis=1), tol)
    return r @ dagger(r)


def generate_algebra(generators: Sequence[np.ndarray], unit: Optional[np.ndarray] = None,
                     tol: Tolerance = DEFAULT_TOL, dim_h: Optional[int] = None) -> StarAlgebra:
    """Smallest *-algebra containing ``generators`` and the projector ``unit``.

    Generators that are not supported on ``unit`` are compressed to
    ``P G P`` and the result is flagged as ``compressed``.
    """
    gens = [as_matrix(g, "generator") for g in generators]
    if unit is None:
        if dim_h is None:
            if not gens:
                raise ValueError("need a unit projector or dim_h when there are no generators")
            dim_h = gens[0].shape[0]
        unit = np.eye(dim_h, dtype=np.complex128)
    p = as_matrix(unit, "unit")
    projector_range(p)
    n = p.shape[0]

    compressed = False
    letters = []
    for g in gens:
        if g.shape != (n, n):
            raise ValueError(f"generator of shape {g.shape} does not match unit of side {n}")
        pgp = p @ g @ p
        if np.linalg.norm(pgp - g) > tol.abs_eps * max(1.0, np.linalg.norm(g)):
            compressed = True
        letters += [pgp, dagger(pgp)]
    letters = list(orthonormalize(letters, n, tol).basis) if letters else []

    space = orthonormalize([p] + letters, n, tol)
    while letters:
        words = [g @ b for g in letters for b in space.basis]
        grown = orthonormalize(list(space.basis) + words, n, tol)
        if grown.dim == space.dim:
            break
        space = grown
    return StarAlgebra(space, p, compressed)


def algebra_from_space(space: OperatorSpace, tol: Tolerance = DEFAULT_TOL) -> StarAlgebra:
    """Wrap a span already known to be a *-algebra, using its support as unit."""
    return StarAlgebra(space, support_projector(space, tol))


def _commutant_constraints(ops: np.ndarray, v: np.ndarray) -> np.ndarray:
    # rows: vec(X s - s X) for X = V Y V^dag, as a linear map of row-major vec(Y)
    vh = dagger(v)
    left = np.einsum("ik,slj->sijkl", v, vh @ ops)
    right = np.einsum("sik,jl->sijkl", ops @ v, v.conj())
    k, n, r = ops.shape[0], v.shape[0], v.shape[1]
    return (left - right).reshape(k * n * n, r * r)


def commutant(ops: Sequence[np.ndarray], within: Optional[np.ndarray] = None,
              tol: Tolerance = DEFAULT_TOL, dim_h: Optional[int] = None) -> StarAlgebra:
    """All ``X = P X P`` commuting with every ``s`` and ``s^dag`` in ``ops``.

    The unit of the returned algebra is ``P`` whenever ``P`` commutes with
    ``ops``; otherwise it is the support projector of the solution space.
    """
    ops = [as_matrix(o, "operator") for o in ops]
    if within is None:
        if dim_h is None:
            if not ops:
                raise ValueError("need a projector or dim_h when there are no operators")
            dim_h = ops[0].shape[0]
        within = np.eye(dim_h, dtype=np.complex128)
    p = as_matrix(within, "projector")
    n = p.shape[0]
    v = projector_range(p)
    r = v.shape[1]

    constraints = orthonormalize(ops + [dagger(o) for o in ops], n, tol)
    if constraints.dim == 0:
        ys = np.eye(r * r, dtype=np.complex128)
    else:
        ys = null_space(_commutant_constraints(constraints.basis, v), tol, scale=1.0)
    basis = np.einsum("ik,skl,jl->sij", v, ys.T.reshape(-1, r, r), v.conj())
    space = OperatorSpace(n, basis)

    unit_in = space.dim > 0 and contains(space, p, Tolerance(1e-8, tol.rank_eps))[0]
    unit = p if unit_in else support_projector(space, tol)
    return StarAlgebra(space, unit)


def intersect(a: OperatorSpace, b: OperatorSpace, tol: Tolerance = DEFAULT_TOL) -> OperatorSpace:
    """Basis of ``span(a) & span(b)``."""
    if a.dim_h != b.dim_h:
        raise ValueError(f"cannot intersect spaces on dimensions {a.dim_h} and {b.dim_h}")
    n = a.dim_h
    if a.dim == 0 or b.dim == 0:
        return OperatorSpace(n, np.zeros((0, n, n), dtype=np.complex128))
    va, vb = a.vectors(), b.vectors()
    kernel = null_space(np.concatenate([va, -vb], axis=1), tol, scale=1.0)
    if kernel.shape[1] == 0:
        return OperatorSpace(n, np.zeros((0, n, n), dtype=np.complex128))
    common = va @ kernel[:a.dim]
    return orthonormalize(list(common.T.reshape(-1, n, n)), n, tol)


def contains(space: OperatorSpace, x: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> tuple[bool, float]:
    """Whether ``x`` lies in the span, and the HS distance to it."""
    x = as_matrix(x)
    if x.shape != (space.dim_h, space.dim_h):
        raise ValueError(f"operator of shape {x.shape} incompatible with space on dimension {space.dim_h}")
    residual = float(np.linalg.norm(x - space.project(x)))
    return residual <= tol.abs_eps * max(1.0, float(np.linalg.norm(x))), residual


def same_span(a: OperatorSpace, b: OperatorSpace, atol: float = 1e-8) -> tuple[bool, float]:
    """Span equality: equal dimension plus mutual containment within ``atol``."""
    if a.dim_h != b.dim_h:
        return False, float("inf")
    worst = 0.0
    for x in a.basis:
        worst = max(worst, contains(b, x)[1])
    for x in b.basis:
        worst = max(worst, contains(a, x)[1])
    return a.dim == b.dim and worst <= atol, worst


def center(alg: StarAlgebra, tol: Tolerance = DEFAULT_TOL) -> OperatorSpace:
    comm = commutant(list(alg.basis), alg.unit, tol)
    return intersect(alg.space, comm.space, tol)


# -- structure decomposition -------------------------------------------------


class _BadDraw(Exception):
    pass


def _block_form_residual(y: np.ndarray, blocks) -> float:
    target = np.zeros_like(y)
    pos = 0
    for d, m in blocks:
        blk = y[pos:pos + d * m, pos:pos + d * m].reshape(d, m, d, m)
        xk = np.einsum("ajbj->ab", blk) / m
        target[pos:pos + d * m, pos:pos + d * m] = np.kron(xk, np.eye(m))
        pos += d * m
    return float(np.linalg.norm(y - target))


def _hermitian_sample(basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    c = rng.standard_normal(basis.shape[0]) + 1j * rng.standard_normal(basis.shape[0])
    x = np.einsum("k,kij->ij", c, basis)
    return (x + dagger(x)) / 2


def _central_projections(alg: StarAlgebra, zspace: OperatorSpace, rng, tol: Tolerance) -> list[np.ndarray]:
    v = projector_range(alg.unit)
    h = v.conj().T @ _hermitian_sample(zspace.basis, rng) @ v
    w, vecs = np.linalg.eigh((h + dagger(h)) / 2)
    gap = CLUSTER_GAP
    for _ in range(3):
        projs = []
        for idx in cluster_eigenvalues(w, gap):
            u = v @ vecs[:, idx]
            projs.append(u @ dagger(u))
        # each compressed centre must be one-dimensional (minimality)
        if all(orthonormalize([q @ z @ q for z in zspace.basis], alg.dim_h, tol).dim == 1 for q in projs):
            return projs
        gap /= 10
    raise _BadDraw("central projections are not minimal")


def _perfect_sqrt(k: int) -> int:
    r = int(round(np.sqrt(k)))
    if r * r != k:
        raise _BadDraw(f"{k} is not a perfect square")
    return r


def _block_intertwiner(alg: StarAlgebra, q: np.ndarray, rng, tol: Tolerance):
    n = alg.dim_h
    sub = orthonormalize([q @ x @ q for x in alg.basis], n, tol)
    d = _perfect_sqrt(sub.dim)
    comm = commutant(list(sub.basis), q, tol)
    m = _perfect_sqrt(comm.dim)
    vq = projector_range(q)
    if vq.shape[1] != d * m:
        raise _BadDraw(f"block rank {vq.shape[1]} != {d}*{m}")

    c = vq.conj().T @ _hermitian_sample(comm.basis, rng) @ vq
    w, vecs = np.linalg.eigh((c + dagger(c)) / 2)
    clusters = cluster_eigenvalues(w)
    if len(clusters) != m or any(len(idx) != d for idx in clusters):
        raise _BadDraw("commutant sample has degenerate spectrum")
    spaces = [vq @ vecs[:, idx] for idx in clusters]

    coeffs = rng.standard_normal(comm.dim) + 1j * rng.standard_normal(comm.dim)
    y = np.einsum("k,kij->ij", coeffs, comm.basis)
    cols = np.zeros((n, d, m), dtype=np.complex128)
    cols[:, :, 0] = spaces[0]
    for j in range(1, m):
        u, s, vh = np.linalg.svd(dagger(spaces[j]) @ y @ spaces[0])
        if s[-1] < 1e-6 * max(s[0], 1e-300) or s[0] < 1e-12:
            raise _BadDraw("degenerate transfer between multiplicity spaces")
        cols[:, :, j] = spaces[j] @ (u @ vh)
    wk = cols.reshape(n, d * m)
    lead = wk[:, 0]
    peak = lead[np.argmax(np.abs(lead))]
    return d, m, wk * (abs(peak) / peak)


def _try_decompose(alg: StarAlgebra, rng, tol: Tolerance) -> BlockStructure:
    n = alg.dim_h
    zspace = center(alg, tol)
    if zspace.dim == 0:
        raise _BadDraw("empty centre")
    parts = []
    for q in _central_projections(alg, zspace, rng, tol):
        d, m, wk = _block_intertwiner(alg, q, rng, tol)
        diag = np.real(np.diag(q))
        first = int(np.argmax(diag > 1e-8))
        parts.append(((-d, -m, first), d, m, wk))
    parts.sort(key=lambda t: t[0])

    kernel = projector_range(np.eye(n) - alg.unit)
    w = np.concatenate([p[3] for p in parts] + [kernel], axis=1)
    blocks = tuple((d, m) for _, d, m, _ in parts)
    if sum(d * d for d, _ in blocks) != alg.dim or sum(d * m for d, m in blocks) + kernel.shape[1] != n:
        raise _BadDraw("block dimensions inconsistent with the algebra")
    return BlockStructure(w, blocks, kernel.shape[1])


def structure_decomposition(alg: StarAlgebra, seed: int = 0, tol: Tolerance = DEFAULT_TOL,
                            atol: float = STRUCTURE_ATOL) -> BlockStructure:
    """Find ``W`` and the block sizes ``(d_k, m_k)`` of ``alg``.

    Random elements of the centre and of each block's commutant are drawn
    from a generator seeded with ``seed``; a draw that fails verification is
    retried with ``seed + 1``, ``seed + 2``, ... up to
    ``MAX_DECOMPOSITION_ATTEMPTS`` times.
    """
    n = alg.dim_h
    if alg.dim == 0:
        return BlockStructure(np.eye(n, dtype=np.complex128), (), n)
    worst = float("inf")
    seen = []
    last = "no attempt made"
    for attempt in range(MAX_DECOMPOSITION_ATTEMPTS):
        rng = np.random.default_rng(seed + attempt)
        try:
            bs = _try_decompose(alg, rng, tol)
        except _BadDraw as exc:
            last = str(exc)
            continue
        residual = max(bs.block_residual(x) for x in alg.basis)
        unitarity = float(np.linalg.norm(dagger(bs.intertwiner) @ bs.intertwiner - np.eye(n)))
        residual = max(residual, unitarity)
        if residual <= atol:
            return BlockStructure(bs.intertwiner, bs.blocks, bs.dim_c, residual)
        seen.append(residual)
        last = "intertwiner verification failed"
    raise DecompositionError(f"structure decomposition failed after {MAX_DECOMPOSITION_ATTEMPTS} attempts: {last}",
                             max(seen) if seen else worst)
