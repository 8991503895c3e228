"""Shared fixtures-by-function: standard operators and random planted instances."""
import numpy as np

from oaqec import Channel, generate_algebra

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = [I2, X, Y, Z]

Z1 = np.kron(Z, I2)
X1 = np.kron(X, I2)
P1 = np.diag([1, 1, 0, 0]).astype(complex)
P2 = np.diag([0, 0, 1, 1]).astype(complex)
CNOT = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def ket(i, n):
    v = np.zeros((n, 1), dtype=complex)
    v[i, 0] = 1
    return v


def unit(i, j, n):
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1
    return m


def phase_flip(p):
    return Channel.from_kraus([np.sqrt(1 - p) * np.eye(4), np.sqrt(p) * Z1])


def hybrid_code():
    """L(C1) + L(C2) with C1 = span{|00>,|01>}, C2 = span{|10>,|11>}."""
    return generate_algebra([unit(i, j, 4) for blk in ((0, 1), (2, 3)) for i in blk for j in blk])


def full_algebra(n):
    return generate_algebra([unit(i, j, n) for i in range(n) for j in range(n)])


def haar_unitary(n, rng):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def ginibre(rows, cols, rng):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def inv_sqrt(h):
    w, v = np.linalg.eigh(h)
    return (v / np.sqrt(w)) @ v.conj().T


def random_tp_kraus(count, d_in, d_out, rng):
    if count * d_out < d_in:
        raise ValueError(f"{count} elements of shape {d_out}x{d_in} cannot be trace preserving")
    g = [ginibre(d_out, d_in, rng) for _ in range(count)]
    t = inv_sqrt(sum(k.conj().T @ k for k in g))
    return [k @ t for k in g]


def random_projector(n, rank, rng):
    v = haar_unitary(n, rng)[:, :rank]
    return v @ v.conj().T


def planted_algebra(blocks, dim_c, rng):
    """V (sum_k L(C^d_k) (x) 1_{m_k} + 0_C) V^dag for a Haar-random V.

    Returns ``(algebra_generators, unit, V)``.
    """
    n = sum(d * m for d, m in blocks) + dim_c
    v = haar_unitary(n, rng)
    gens, pos = [], 0
    for d, m in blocks:
        for i in range(d):
            for j in range(d):
                e = np.zeros((n, n), dtype=complex)
                e[pos:pos + d * m, pos:pos + d * m] = np.kron(unit(i, j, d), np.eye(m))
                gens.append(v @ e @ v.conj().T)
        pos += d * m
    unit_p = v @ np.diag([1.0] * pos + [0.0] * dim_c) @ v.conj().T
    return gens, unit_p, v


def random_blocks(rng, max_dim):
    """A random block pattern with total dimension (incl. C) <= max_dim and rank >= 2."""
    while True:
        blocks = [(int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(int(rng.integers(1, 4)))]
        rank = sum(d * m for d, m in blocks)
        dim_c = int(rng.integers(0, 3))
        if 2 <= rank and rank + dim_c <= max_dim:
            return blocks, dim_c


def planted_conserving_channel(blocks, dim_c, n_kraus, rng):
    """A channel whose Kraus elements commute with a planted algebra.

    Returns ``(channel, algebra, P)``.
    """
    from oaqec import commutant

    gens, p, _ = planted_algebra(blocks, dim_c, rng)
    alg = generate_algebra(gens, p)
    comm = commutant(list(alg.basis), np.eye(alg.dim_h))
    raw = []
    for _ in range(n_kraus):
        c = rng.standard_normal(comm.dim) + 1j * rng.standard_normal(comm.dim)
        raw.append(np.einsum("k,kij->ij", c, comm.basis))
    t = inv_sqrt(sum(k.conj().T @ k for k in raw))
    return Channel.from_kraus([k @ t for k in raw]), alg, p


def planted_correctable_channel(blocks, env_out, dim_c, n_kraus, rng, dim_c_out=1):
    """Channel on which the planted hybrid code is correctable but generally not conserved.

    Sector ``k`` is mapped to ``C^d_k (x) C^{env_out[k]}`` with noise acting
    only on the second factor; sectors land in orthogonal output subspaces.
    Returns ``(channel, algebra, P)``.
    """
    gens, p, v_in = planted_algebra(blocks, dim_c, rng)
    alg = generate_algebra(gens, p)
    d_in = p.shape[0]
    d_out = sum(d * mo for (d, _), mo in zip(blocks, env_out)) + (dim_c_out if dim_c else 0)
    v_out = haar_unitary(d_out, rng)
    kraus = [np.zeros((d_out, d_in), dtype=complex) for _ in range(n_kraus)]
    ri = ro = 0
    for (d, m), mo in zip(blocks, env_out):
        f = random_tp_kraus(n_kraus, m, mo, rng)
        for a in range(n_kraus):
            kraus[a][ro:ro + d * mo, ri:ri + d * m] = np.kron(np.eye(d), f[a])
        ri += d * m
        ro += d * mo
    if dim_c:
        g = random_tp_kraus(n_kraus, dim_c, dim_c_out, rng)
        for a in range(n_kraus):
            kraus[a][ro:, ri:] = g[a]
    kraus = [v_out @ k @ v_in.conj().T for k in kraus]
    return Channel.from_kraus(kraus), alg, p


def random_stochastic(n, rng, zero_prob=0.4):
    """Column-stochastic matrix with randomly zeroed entries (each column keeps one)."""
    p = rng.uniform(0.05, 1.0, size=(n, n))
    p[rng.random((n, n)) < zero_prob] = 0
    for j in range(n):
        if not p[:, j].any():
            p[rng.integers(n), j] = 1.0
    return p / p.sum(axis=0)


def reachability_classes(p, tol=1e-12):
    """Brute-force confusability oracle: shared-row adjacency, closure by repeated squaring."""
    n = p.shape[1]
    nz = (p > tol).astype(int)
    adj = ((nz.T @ nz) > 0).astype(int) | np.eye(n, dtype=int)
    while True:
        nxt = ((adj @ adj) > 0).astype(int)
        if np.array_equal(nxt, adj):
            break
        adj = nxt
    classes = {tuple(np.nonzero(adj[j])[0]) for j in range(n)}
    return tuple(sorted(classes))
