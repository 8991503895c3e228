"""Conservation and correctability of operator algebras under a channel.

All tests are stated on states supported on ``P H`` for a projector ``P``:

* conserved:    ``P E^dag(X) P = P X P``         iff ``[E_a P, X] = 0``
* correctable:  ``P (R o E)^dag(X) P = P X P``   iff ``[P E_c^dag E_b P, X] = 0``

for every ``X`` in the algebra. Residuals are operator norms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import Channel, ChannelError, apply, dual_apply, mix_kraus
from .numerics import DEFAULT_TOL, Tolerance, as_matrix, dagger, is_isometry, projector_range, psd_decompose
from .opspace import StarAlgebra, commutant, orthonormalize

DEFAULT_ATOL = 1e-8


class SupportError(ValueError):
    """The algebra is not supported on the code subspace."""


@dataclass(frozen=True)
class CorrectionReport:
    """Outcome of a pass/fail test.

    ``witness`` is ``(indices, matrix)`` for the first index tuple reaching
    ``worst_residual``; indices are Kraus positions followed by the algebra
    basis position. ``details`` holds secondary diagnostics.
    """

    passed: bool
    worst_residual: float
    tol: float
    witness: Optional[tuple[tuple[int, ...], np.ndarray]] = None
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed


def _projector(p, dim: int) -> np.ndarray:
    if p is None:
        return np.eye(dim, dtype=np.complex128)
    p = as_matrix(p, "projector")
    if p.shape != (dim, dim):
        raise ChannelError(f"projector of shape {p.shape} does not match dimension {dim}")
    projector_range(p)
    return p


def _check_support(alg: StarAlgebra, p: np.ndarray, atol: float) -> None:
    if alg.dim_h != p.shape[0]:
        raise ChannelError(f"algebra acts on dimension {alg.dim_h}, projector on {p.shape[0]}")
    for i, x in enumerate(alg.basis):
        err = float(np.linalg.norm(p @ x @ p - x))
        if err > atol:
            raise SupportError(f"algebra basis element {i} is not supported on the code subspace "
                               f"(|PXP - X| = {err:.3e})")


def _scan(ops: list[tuple[tuple[int, ...], np.ndarray]], basis: np.ndarray):
    """Maximum commutator norm over ops x basis, first maximiser wins."""
    worst, witness = 0.0, None
    for idx, m in ops:
        comms = m[None] @ basis - basis @ m[None]
        norms = np.linalg.norm(comms, ord=2, axis=(1, 2)) if len(basis) else np.zeros(0)
        for j, value in enumerate(norms):
            if witness is None or value > worst:
                worst, witness = float(value), (idx + (j,), comms[j])
    return worst, witness


def _square(ch: Channel) -> None:
    if ch.dim_in != ch.dim_out:
        raise ChannelError(f"expected a channel on one space, got {ch.dim_in} -> {ch.dim_out}")


def is_conserved(ch: Channel, alg: StarAlgebra, p=None, tol: float = DEFAULT_ATOL) -> CorrectionReport:
    """Commutator test ``[E_a P, X] = 0``, cross-checked against ``P E^dag(X) P = P X P``.

    ``details`` carries the direct residual and whether the two tests agree.
    """
    _square(ch)
    p = _projector(p, ch.dim_in)
    _check_support(alg, p, max(tol, 1e-8))
    ops = [((a,), e @ p) for a, e in enumerate(ch.kraus)]
    worst, witness = _scan(ops, alg.basis)
    direct = max((float(np.linalg.norm(p @ dual_apply(ch, x) @ p - p @ x @ p, 2)) for x in alg.basis),
                 default=0.0)
    passed = worst <= tol
    details = {"direct_residual": direct, "tests_agree": passed == (direct <= 10 * tol)}
    return CorrectionReport(passed, worst, tol, witness if not passed else None, details)


def is_correctable(ch: Channel, alg: StarAlgebra, p=None, tol: float = DEFAULT_ATOL) -> CorrectionReport:
    """Test ``[P E_c^dag E_b P, X] = 0`` for all Kraus pairs and basis elements."""
    p = _projector(p, ch.dim_in)
    _check_support(alg, p, max(tol, 1e-8))
    k = ch.stacked()
    ops = [((c, b), p @ dagger(k[c]) @ k[b] @ p) for c in range(len(k)) for b in range(len(k))]
    worst, witness = _scan(ops, alg.basis)
    passed = worst <= tol
    return CorrectionReport(passed, worst, tol, witness if not passed else None)


def max_conserved_algebra(ch: Channel, p=None, tol: Tolerance = DEFAULT_TOL) -> StarAlgebra:
    """Largest *-algebra on ``P H`` whose elements commute with every ``E_a P``.

    The unit is ``P`` when ``P`` itself qualifies, otherwise the support
    projector of the result.
    """
    _square(ch)
    p = _projector(p, ch.dim_in)
    return commutant([e @ p for e in ch.kraus], p, tol)


def max_correctable_algebra(ch: Channel, p=None, tol: Tolerance = DEFAULT_TOL) -> StarAlgebra:
    """Commutant, inside ``P L(H) P``, of all ``P E_c^dag E_b P``.

    Every subalgebra of the result is correctable and every correctable
    algebra is contained in it. The result is unital with unit ``P``; it is
    the largest unital object, which also bounds any non-unital code.
    """
    p = _projector(p, ch.dim_in)
    k = ch.stacked()
    errs = orthonormalize([p @ dagger(c) @ b @ p for c in k for b in k], ch.dim_in, tol)
    return commutant(list(errs.basis), p, tol)


def is_noiseless_subsystem(ch: Channel, isometry, dims: tuple[int, int], tol: float = DEFAULT_ATOL) -> CorrectionReport:
    """Check that factor A of ``V(A (x) B)`` passes through ``ch`` undisturbed.

    ``passed`` uses ``|P E^dag(V(X (x) 1)V^dag) P - V(X (x) 1)V^dag|`` over the
    matrix units ``X`` of ``L(A)``; the commutator form of the same test is
    reported in ``details``.
    """
    _square(ch)
    v = as_matrix(isometry, "isometry")
    d_a, d_b = (int(d) for d in dims)
    if v.shape != (ch.dim_in, d_a * d_b):
        raise ChannelError(f"isometry of shape {v.shape} does not map C^{d_a}(x)C^{d_b} into dimension {ch.dim_in}")
    if not is_isometry(v):
        raise ChannelError("V is not an isometry")
    p = v @ dagger(v)
    worst, witness = 0.0, None
    embedded = []
    for i in range(d_a):
        for j in range(d_a):
            unit = np.zeros((d_a, d_a), dtype=np.complex128)
            unit[i, j] = 1
            y = v @ np.kron(unit, np.eye(d_b)) @ dagger(v)
            embedded.append(y)
            diff = p @ dual_apply(ch, y) @ p - y
            r = float(np.linalg.norm(diff, 2))
            if witness is None or r > worst:
                worst, witness = r, ((i, j), diff)
    comm_worst, _ = _scan([((a,), e @ p) for a, e in enumerate(ch.kraus)], np.stack(embedded))
    passed = worst <= tol
    return CorrectionReport(passed, worst, tol, witness if not passed else None,
                            {"commutator_residual": comm_worst})


def petz_recovery(ch: Channel, p=None, tol: Tolerance = DEFAULT_TOL) -> Channel:
    """Transpose-channel recovery ``R_a = P E_a^dag E(P)^{-1/2}``.

    One completion element ``|v><k|`` per kernel vector ``k`` of ``E(P)``
    makes the map trace preserving; ``v`` is the first basis vector of the
    range of ``P``.
    """
    p = _projector(p, ch.dim_in)
    ep = apply(ch, p)
    if np.linalg.norm(ep) == 0:
        raise ChannelError("the channel annihilates the code subspace: E(P) = 0")
    w, sup, ker = psd_decompose(ep, tol)
    if w.size == 0:
        raise ChannelError("the channel annihilates the code subspace: E(P) = 0")
    s = (sup * (1.0 / np.sqrt(w))) @ dagger(sup)
    kraus = [p @ dagger(e) @ s for e in ch.kraus]
    anchor = projector_range(p)[:, :1]
    kraus += [anchor @ dagger(ker[:, [i]]) for i in range(ker.shape[1])]
    return Channel(ch.dim_out, ch.dim_in, tuple(kraus))


def verify_correction(r: Channel, e: Channel, alg: StarAlgebra, p=None, tol: float = DEFAULT_ATOL) -> CorrectionReport:
    """Residual of ``P E^dag(R^dag(X)) P = P X P`` over the algebra basis."""
    if e.dim_out != r.dim_in or r.dim_out != e.dim_in:
        raise ChannelError(f"recovery {r.dim_in}->{r.dim_out} does not invert channel {e.dim_in}->{e.dim_out}")
    p = _projector(p, e.dim_in)
    if alg.dim_h != e.dim_in:
        raise ChannelError(f"algebra acts on dimension {alg.dim_h}, channel input is {e.dim_in}")
    worst, witness = 0.0, None
    for i, x in enumerate(alg.basis):
        diff = p @ dual_apply(e, dual_apply(r, x)) @ p - p @ x @ p
        value = float(np.linalg.norm(diff, 2))
        if witness is None or value > worst:
            worst, witness = value, ((i,), diff)
    passed = worst <= tol
    return CorrectionReport(passed, worst, tol, witness if not passed else None)


def robustness_check(ch: Channel, r: Channel, alg: StarAlgebra, p=None, mixing=None,
                     tol: float = DEFAULT_ATOL) -> CorrectionReport:
    """Re-run :func:`verify_correction` with the same ``r`` on mixed Kraus elements."""
    if mixing is None:
        mixing = np.eye(len(ch))
    mixed = mix_kraus(ch, mixing)
    return verify_correction(r, mixed, alg, p, tol)
