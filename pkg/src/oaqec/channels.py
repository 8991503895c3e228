"""Quantum channels in Kraus form, in the Schroedinger and Heisenberg pictures.

Stochastic matrices follow the column convention: ``p[i, j]`` is the
probability of a transition from classical state ``j`` to state ``i``, so
columns sum to one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import as_matrix, dagger, is_unitary, op_norm

TP_ATOL = 1e-8
PRUNE_NORM = 1e-12
STOCHASTIC_ATOL = 1e-10
DENSITY_CUTOFF = 1e-12


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Channel:
    """Completely positive map ``rho -> sum_a E_a rho E_a^dag``.

    Kraus elements with operator norm below ``PRUNE_NORM`` are dropped. The
    map must be trace preserving within ``TP_ATOL`` unless ``subnormalized``
    is set.
    """

    dim_in: int
    dim_out: int
    kraus: tuple
    subnormalized: bool = False

    def __post_init__(self):
        if self.dim_in <= 0 or self.dim_out <= 0:
            raise ChannelError(f"dimensions must be positive, got {self.dim_in} -> {self.dim_out}")
        ops = []
        for a, k in enumerate(self.kraus):
            k = as_matrix(k, f"Kraus element {a}")
            if k.shape != (self.dim_out, self.dim_in):
                raise ChannelError(f"Kraus element {a} has shape {k.shape}, expected {(self.dim_out, self.dim_in)}")
            if op_norm(k) >= PRUNE_NORM:
                k = k.copy()
                k.setflags(write=False)
                ops.append(k)
        if not ops:
            if not self.kraus:
                raise ChannelError("a channel needs at least one Kraus element")
            zero = np.zeros((self.dim_out, self.dim_in), dtype=np.complex128)
            zero.setflags(write=False)
            ops = [zero]
        object.__setattr__(self, "kraus", tuple(ops))
        err = self.tp_error()
        if err > TP_ATOL and not self.subnormalized:
            raise ChannelError(f"channel is not trace preserving: |sum E^dag E - I| = {err:.3e}")

    @classmethod
    def from_kraus(cls, kraus: Sequence, subnormalized: bool = False) -> "Channel":
        kraus = [as_matrix(k, "Kraus element") for k in kraus]
        if not kraus:
            raise ChannelError("a channel needs at least one Kraus element")
        dim_out, dim_in = kraus[0].shape
        return cls(dim_in, dim_out, tuple(kraus), subnormalized)

    def __len__(self) -> int:
        return len(self.kraus)

    def stacked(self) -> np.ndarray:
        return np.stack(self.kraus)

    def tp_error(self) -> float:
        total = sum(dagger(k) @ k for k in self.kraus)
        return float(np.linalg.norm(total - np.eye(self.dim_in)))


def identity_channel(dim: int) -> Channel:
    return Channel(dim, dim, (np.eye(dim, dtype=np.complex128),))


def unitary_channel(u) -> Channel:
    u = as_matrix(u, "unitary")
    if not is_unitary(u):
        raise ChannelError("matrix is not unitary")
    return Channel.from_kraus([u])


def apply(ch: Channel, rho) -> np.ndarray:
    rho = as_matrix(rho, "state")
    if rho.shape != (ch.dim_in, ch.dim_in):
        raise ChannelError(f"input of shape {rho.shape} does not match channel input dimension {ch.dim_in}")
    k = ch.stacked()
    return np.einsum("aij,jk,alk->il", k, rho, k.conj())


def dual_apply(ch: Channel, x) -> np.ndarray:
    """Heisenberg-picture action ``X -> sum_a E_a^dag X E_a``."""
    x = as_matrix(x, "observable")
    if x.shape != (ch.dim_out, ch.dim_out):
        raise ChannelError(f"observable of shape {x.shape} does not match channel output dimension {ch.dim_out}")
    k = ch.stacked()
    return np.einsum("aji,jk,akl->il", k.conj(), x, k)


def compose(second: Channel, first: Channel) -> Channel:
    """The channel ``second o first`` with Kraus elements ``F_b E_a``."""
    if first.dim_out != second.dim_in:
        raise ChannelError(f"cannot compose: first outputs dimension {first.dim_out}, "
                           f"second expects {second.dim_in}")
    kraus = [f @ e for e in first.kraus for f in second.kraus]
    return Channel(first.dim_in, second.dim_out, tuple(kraus),
                   subnormalized=first.subnormalized or second.subnormalized)


def tensor(a: Channel, b: Channel) -> Channel:
    kraus = [np.kron(x, y) for x in a.kraus for y in b.kraus]
    return Channel(a.dim_in * b.dim_in, a.dim_out * b.dim_out, tuple(kraus),
                   subnormalized=a.subnormalized or b.subnormalized)


def mix_kraus(ch: Channel, mixing) -> Channel:
    """Channel with elements ``E'_b = sum_a mixing[b, a] E_a``.

    ``mixing`` must be an isometry on the Kraus index space, which leaves the
    map unchanged.
    """
    mixing = as_matrix(mixing, "mixing")
    if mixing.shape[1] != len(ch):
        raise ChannelError(f"mixing has {mixing.shape[1]} columns but the channel has {len(ch)} Kraus elements")
    if np.linalg.norm(dagger(mixing) @ mixing - np.eye(len(ch))) > TP_ATOL:
        raise ChannelError("mixing matrix is not an isometry")
    kraus = np.einsum("ba,aij->bij", mixing, ch.stacked())
    return Channel(ch.dim_in, ch.dim_out, tuple(kraus), ch.subnormalized)


def choi(ch: Channel) -> np.ndarray:
    """Unnormalized Choi matrix ``sum_ij |i><j| (x) ch(|i><j|)``."""
    vecs = np.stack([k.T.reshape(-1) for k in ch.kraus])
    return vecs.T @ vecs.conj()


def same_map(a: Channel, b: Channel, atol: float = 1e-10) -> bool:
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        return False
    return float(np.linalg.norm(choi(a) - choi(b))) <= atol


def check_stochastic(p, atol: float = STOCHASTIC_ATOL) -> np.ndarray:
    """Validate a column-stochastic matrix and return it as a float array."""
    arr = np.asarray(p)
    if np.iscomplexobj(arr):
        if np.any(np.abs(arr.imag) > atol):
            raise ChannelError("stochastic matrix has complex entries")
        arr = arr.real
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2:
        raise ChannelError(f"stochastic matrix must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ChannelError("stochastic matrix contains non-finite entries")
    neg = np.argwhere(arr < 0)
    if neg.size:
        i, j = neg[0]
        raise ChannelError(f"stochastic matrix has negative entry p[{i},{j}] = {arr[i, j]}")
    sums = arr.sum(axis=0)
    bad = np.nonzero(np.abs(sums - 1) > atol)[0]
    if bad.size:
        j = bad[0]
        raise ChannelError(f"column {j} of the stochastic matrix sums to {sums[j]!r}, not 1")
    return arr


def classical_channel(p) -> Channel:
    """Channel with elements ``sqrt(p_ij) |i><j|`` for every nonzero ``p_ij``."""
    p = check_stochastic(p)
    rows, cols = p.shape
    kraus = []
    for i, j in zip(*np.nonzero(p > 0)):
        e = np.zeros((rows, cols), dtype=np.complex128)
        e[i, j] = np.sqrt(p[i, j])
        kraus.append(e)
    return Channel(cols, rows, tuple(kraus))


def check_density(rho, atol: float = 1e-8) -> np.ndarray:
    rho = as_matrix(rho, "density matrix")
    if rho.shape[0] != rho.shape[1]:
        raise ChannelError(f"density matrix must be square, got shape {rho.shape}")
    if np.linalg.norm(rho - dagger(rho)) > atol:
        raise ChannelError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ChannelError(f"density matrix has trace {np.trace(rho).real:.6g}, not 1")
    w = np.linalg.eigvalsh((rho + dagger(rho)) / 2)
    if w[0] < -atol:
        raise ChannelError(f"density matrix is not positive: eigenvalue {w[0]:.3e}")
    return rho


def from_unitary_interaction(u, dims: tuple[int, int], rho_a, keep: str = "S") -> Channel:
    """Reduced dynamics of ``U (rho_S (x) rho_A) U^dag`` on S or on A.

    ``U`` acts on ``C^dim_S (x) C^dim_A`` with the system factor first.
    ``keep="S"`` traces out the apparatus and gives a channel S -> S;
    ``keep="A"`` traces out the system and gives a channel S -> A.
    """
    d_s, d_a = (int(d) for d in dims)
    u = as_matrix(u, "interaction unitary")
    if u.shape != (d_s * d_a, d_s * d_a):
        raise ChannelError(f"interaction of shape {u.shape} does not act on dimension {d_s}*{d_a}")
    if not is_unitary(u):
        raise ChannelError("interaction is not unitary")
    rho_a = check_density(rho_a)
    if rho_a.shape != (d_a, d_a):
        raise ChannelError(f"apparatus state of shape {rho_a.shape} does not match dim_A = {d_a}")
    keep = keep.upper()
    if keep not in ("S", "A"):
        raise ChannelError(f"keep must be 'S' or 'A', got {keep!r}")

    q, vecs = np.linalg.eigh((rho_a + dagger(rho_a)) / 2)
    u4 = u.reshape(d_s, d_a, d_s, d_a)
    kraus = []
    for qm, m in zip(q, vecs.T):
        if qm <= DENSITY_CUTOFF:
            continue
        # (s, a, s') with the input apparatus leg contracted against |m>
        t = np.sqrt(qm) * np.einsum("iajb,b->iaj", u4, m)
        if keep == "S":
            kraus += [t[:, a, :] for a in range(d_a)]
        else:
            kraus += [t[s, :, :] for s in range(d_s)]
    return Channel.from_kraus(kraus)
