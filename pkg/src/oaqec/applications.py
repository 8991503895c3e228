"""Worked applications: classical codes, (noisy) teleportation, information flow."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import (
    Channel,
    ChannelError,
    check_stochastic,
    classical_channel,
    compose,
    dual_apply,
    from_unitary_interaction,
    identity_channel,
    tensor,
)
from .correction import CorrectionReport, is_correctable, max_correctable_algebra
from .numerics import DEFAULT_TOL, Tolerance, as_matrix, dagger, is_unitary
from .opspace import OperatorSpace, StarAlgebra, commutant, intersect, orthonormalize

CONFUSION_TOL = 1e-12


@dataclass(frozen=True)
class Partition:
    """Disjoint classes covering ``0..n-1``, sorted by smallest member."""

    classes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        classes = tuple(sorted(tuple(sorted(c)) for c in self.classes))
        members = [i for c in classes for i in c]
        if any(not c for c in classes) or sorted(members) != list(range(len(members))):
            raise ValueError(f"not a partition of 0..n-1: {classes}")
        object.__setattr__(self, "classes", classes)

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.classes)

    def label(self, i: int) -> int:
        for k, c in enumerate(self.classes):
            if i in c:
                return k
        raise IndexError(i)


def confusability_classes(p, tol: float = CONFUSION_TOL) -> Partition:
    """Inputs ``j ~ k`` when some output ``i`` has ``p[i,j] > tol`` and ``p[i,k] > tol``.

    Returns the classes of the transitive closure of ``~``.
    """
    p = check_stochastic(p)
    n = p.shape[1]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for row in p:
        hit = np.nonzero(row > tol)[0]
        for j in hit[1:]:
            a, b = find(int(hit[0])), find(int(j))
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for j in range(n):
        groups.setdefault(find(j), []).append(j)
    return Partition(tuple(tuple(g) for g in groups.values()))


def classical_correctable(p, alpha: Sequence[float], tol: float = CONFUSION_TOL, value_tol: float = 1e-9) -> bool:
    """Whether the diagonal observable ``alpha`` is correctable for ``p``.

    True iff ``alpha`` is constant (within ``value_tol``) on every
    confusability class.
    """
    alpha = np.asarray(alpha, dtype=float)
    p = check_stochastic(p)
    if alpha.shape != (p.shape[1],):
        raise ValueError(f"observable has {alpha.size} entries, channel has {p.shape[1]} inputs")
    part = confusability_classes(p, tol)
    return all(np.ptp(alpha[list(c)]) <= value_tol for c in part.classes)


def _check_unitaries(unitaries) -> list[np.ndarray]:
    us = [as_matrix(u, "unitary") for u in unitaries]
    if not us:
        raise ChannelError("need at least one unitary")
    d = us[0].shape[0]
    for i, u in enumerate(us):
        if u.shape != (d, d):
            raise ChannelError(f"unitary {i} has shape {u.shape}, expected {(d, d)}")
        if not is_unitary(u):
            raise ChannelError(f"matrix {i} is not unitary")
    return us


def teleport_channel(unitaries) -> Channel:
    """Channel ``C^d -> C^N (x) C^d`` with elements ``|i> (x) U_i / sqrt(N)``.

    The first factor is the classical register carrying the outcome ``i``.
    """
    us = _check_unitaries(unitaries)
    n = len(us)
    kraus = []
    for i, u in enumerate(us):
        flag = np.zeros((n, 1))
        flag[i, 0] = 1
        kraus.append(np.kron(flag, u) / np.sqrt(n))
    return Channel.from_kraus(kraus)


def noisy_teleport_channel(unitaries, p) -> Channel:
    """Teleportation followed by the classical channel ``p`` on the register."""
    us = _check_unitaries(unitaries)
    p = check_stochastic(p)
    if p.shape != (len(us), len(us)):
        raise ChannelError(f"stochastic matrix of shape {p.shape} does not match {len(us)} flags")
    noise = tensor(classical_channel(p), identity_channel(us[0].shape[0]))
    return compose(noise, teleport_channel(us))


def correctable_after_noisy_teleport(unitaries, p, tol: Tolerance = DEFAULT_TOL) -> StarAlgebra:
    """Commutant of ``{U_h^dag U_h'}`` over confusable flag pairs ``h, h'``."""
    us = _check_unitaries(unitaries)
    part = confusability_classes(p)
    if part.n != len(us):
        raise ChannelError(f"stochastic matrix has {part.n} flags, got {len(us)} unitaries")
    gens = [dagger(us[h]) @ us[g] for c in part.classes for h in c for g in c]
    return commutant(gens, np.eye(us[0].shape[0]), tol)


@dataclass(frozen=True)
class FlowReport:
    """Where the information about S ends up after the interaction.

    ``a_ss`` is kept by the system, ``a_sa`` reaches the apparatus and
    ``pointer`` is their intersection.
    """

    a_ss: StarAlgebra
    a_sa: StarAlgebra
    pointer: OperatorSpace
    pointer_commutative: bool
    commutator_residual: float
    sa_check: CorrectionReport = field(repr=False)


def information_flow(u, dims: tuple[int, int], rho_a, tol: Tolerance = DEFAULT_TOL) -> FlowReport:
    """Analyse the interaction ``u`` on ``S (x) A`` with apparatus state ``rho_a``."""
    d_s, _ = dims
    e_ss = from_unitary_interaction(u, dims, rho_a, keep="S")
    e_sa = from_unitary_interaction(u, dims, rho_a, keep="A")
    eye = np.eye(d_s, dtype=np.complex128)

    units = []
    for i in range(d_s):
        for j in range(d_s):
            y = np.zeros((d_s, d_s), dtype=np.complex128)
            y[i, j] = 1
            units.append(dual_apply(e_ss, y))
    dual_range = orthonormalize(units, d_s, tol)
    a_sa = commutant(list(dual_range.basis), eye, tol)
    a_ss = max_correctable_algebra(e_ss, eye, tol)
    pointer = intersect(a_ss.space, a_sa.space, tol)

    worst = 0.0
    for x in pointer.basis:
        for y in pointer.basis:
            worst = max(worst, float(np.linalg.norm(x @ y - y @ x)))
    sa_check = is_correctable(e_sa, a_sa, eye)
    return FlowReport(a_ss, a_sa, pointer, worst <= 1e-8, worst, sa_check)
