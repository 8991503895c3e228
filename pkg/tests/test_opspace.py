import threading

import numpy as np
import pytest

from oaqec.opspace import (
    DecompositionError,
    OperatorSpace,
    StarAlgebra,
    center,
    commutant,
    contains,
    generate_algebra,
    intersect,
    orthonormalize,
    same_span,
    structure_decomposition,
)

from helpers import I2, P1, P2, PAULIS, X, Y, Z, Z1, full_algebra, ginibre, haar_unitary, planted_algebra, \
    random_blocks, random_projector, unit


def test_orthonormalize_collinear():
    s = orthonormalize([I2, 2 * I2], 2)
    assert s.dim == 1
    assert np.isclose(abs(np.vdot(s.basis[0], I2 / np.sqrt(2))), 1.0)


def test_orthonormalize_two_and_four_paulis():
    assert orthonormalize([I2, Z], 2).dim == 2
    # Pauli Gram matrix is 2 I, so the four are independent
    gram = np.array([[np.vdot(a, b) for b in PAULIS] for a in PAULIS])
    np.testing.assert_allclose(gram, 2 * np.eye(4))
    s = orthonormalize(PAULIS, 2)
    assert s.dim == 4 and s.gram_error() < 1e-12


def test_orthonormalize_empty():
    assert orthonormalize([], 3).dim == 0


def test_generate_algebra_examples():
    a = generate_algebra([Z1])
    assert a.dim == 2
    assert same_span(a.space, orthonormalize([np.eye(4), Z1], 4))[0]
    assert generate_algebra([X, Z]).dim == 4
    p = np.diag([1, 1, 0]).astype(complex)
    a = generate_algebra([], p)
    assert a.dim == 1 and contains(a.space, p)[0]


def test_generate_algebra_compresses_generators():
    p = np.diag([1, 1, 0]).astype(complex)
    g = np.ones((3, 3))
    a = generate_algebra([g], p)
    assert a.compressed
    for x in a.basis:
        np.testing.assert_allclose(p @ x @ p, x, atol=1e-12)
    assert not generate_algebra([p @ g @ p], p).compressed


@pytest.mark.parametrize("seed", range(5))
def test_generate_algebra_is_closed_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    blocks, dim_c = random_blocks(rng, 8)
    gens, p, _ = planted_algebra(blocks, dim_c, rng)
    mixed = [sum(rng.standard_normal() * g for g in gens) for _ in range(2)]
    a = generate_algebra(mixed, p)
    assert a.closure_residual() < 1e-8
    assert generate_algebra(list(a.basis), p).dim == a.dim


def test_commutant_of_full_algebra_is_scalars():
    c = commutant(list(full_algebra(3).basis))
    assert c.dim == 1
    assert contains(c.space, np.eye(3))[0]


def test_commutant_of_phase_flip_is_hybrid_code():
    c = commutant([Z1])
    assert c.dim == 8
    block = [unit(i, j, 4) for blk in ((0, 1), (2, 3)) for i in blk for j in blk]
    assert same_span(c.space, orthonormalize(block, 4))[0]
    # and back again: the commutant of the code is C P1 + C P2
    cc = commutant(list(c.basis))
    assert same_span(cc.space, orthonormalize([P1, P2], 4))[0]


def test_commutant_of_nothing_is_compressed_full_algebra():
    p = np.diag([1, 0, 1]).astype(complex)
    c = commutant([], p)
    assert c.dim == 4
    np.testing.assert_allclose(c.unit, p)


def test_commutant_unit_falls_back_to_support():
    # s = |0><1| does not commute with P = I, but the commutant is still unital on its support
    s = unit(0, 1, 3)
    c = commutant([s])
    assert c.closure_residual() < 1e-8


def test_intersect_examples():
    a = orthonormalize([I2, X], 2)
    assert same_span(intersect(a, a), a)[0]
    common = intersect(a, orthonormalize([I2, Z], 2))
    assert common.dim == 1 and contains(common, I2)[0]
    assert intersect(orthonormalize([X], 2), orthonormalize([Z], 2)).dim == 0
    with pytest.raises(ValueError):
        intersect(a, orthonormalize([np.eye(3)], 3))


def test_contains_examples():
    s = orthonormalize([I2, Z], 2)
    ok, res = contains(s, s.basis[1])
    assert ok and res < 1e-14
    ok, res = contains(s, Y)
    assert not ok and np.isclose(res, np.linalg.norm(Y))
    a = generate_algebra([X + Z])
    assert contains(a.space, a.basis[0] @ a.basis[-1])[0]


def test_center_of_hybrid_code():
    a = commutant([Z1])
    z = center(a)
    assert same_span(z, orthonormalize([P1, P2], 4))[0]


def test_structure_full_matrix_algebra():
    bs = structure_decomposition(full_algebra(3))
    assert bs.blocks == ((3, 1),) and bs.dim_c == 0
    assert bs.residual < 1e-8


def test_structure_diagonal_algebra():
    bs = structure_decomposition(generate_algebra([np.diag([1.0, 2.0, 3.0])]))
    assert bs.blocks == ((1, 1),) * 3 and bs.dim_c == 0


def test_structure_planted_with_kernel():
    rng = np.random.default_rng(7)
    gens, p, _ = planted_algebra([(2, 3)], 1, rng)
    alg = generate_algebra(gens, p)
    bs = structure_decomposition(alg)
    assert bs.blocks == ((2, 3),) and bs.dim_c == 1
    w = bs.intertwiner
    np.testing.assert_allclose(w.conj().T @ w, np.eye(7), atol=1e-10)
    for x in alg.basis:
        y = w.conj().T @ x @ w
        assert np.linalg.norm(y[6:, :]) < 1e-8 and np.linalg.norm(y[:, 6:]) < 1e-8
        assert bs.block_residual(x) < 1e-8


def test_structure_canonical_ordering_and_phase():
    rng = np.random.default_rng(3)
    gens, p, _ = planted_algebra([(1, 1), (2, 1), (1, 2)], 0, rng)
    bs = structure_decomposition(generate_algebra(gens, p))
    assert bs.blocks == ((2, 1), (1, 2), (1, 1))
    for off in bs.offsets:
        col = bs.intertwiner[:, off]
        peak = col[np.argmax(np.abs(col))]
        assert abs(peak.imag) < 1e-12 and peak.real > 0


def test_structure_is_reproducible():
    rng = np.random.default_rng(11)
    gens, p, _ = planted_algebra([(2, 2), (1, 1)], 1, rng)
    alg = generate_algebra(gens, p)
    a, b = structure_decomposition(alg, seed=5), structure_decomposition(alg, seed=5)
    np.testing.assert_array_equal(a.intertwiner, b.intertwiner)


def test_structure_dimension_identities():
    rng = np.random.default_rng(4)
    for _ in range(5):
        blocks, dim_c = random_blocks(rng, 9)
        gens, p, _ = planted_algebra(blocks, dim_c, rng)
        alg = generate_algebra(gens, p)
        bs = alg.structure
        assert sum(d * m for d, m in bs.blocks) + bs.dim_c == alg.dim_h
        assert sum(d * d for d, _ in bs.blocks) == alg.dim
        assert sorted(bs.blocks) == sorted(blocks)


def test_structure_cache_is_shared_between_threads():
    alg = commutant([Z1])
    seen = []
    threads = [threading.Thread(target=lambda: seen.append(alg.structure)) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(s is seen[0] for s in seen)


def test_structure_rejects_non_algebra():
    # a span that is not closed under products cannot be decomposed
    space = orthonormalize([np.eye(3), unit(0, 1, 3) + unit(1, 0, 3)], 3)
    fake = StarAlgebra(space, np.eye(3, dtype=complex))
    with pytest.raises(DecompositionError) as info:
        structure_decomposition(fake)
    assert info.value.worst_residual >= 0


@pytest.mark.parametrize("seed", range(8))
def test_double_commutant(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(3, 9))
    p = random_projector(n, int(rng.integers(2, n + 1)), rng)
    gens = [ginibre(n, n, rng) for _ in range(int(rng.integers(1, 3)))]
    if seed % 2:
        gens = [g + g.conj().T for g in gens[:1]]  # one Hermitian generator: commutative algebra
    a = generate_algebra(gens, p)
    back = commutant(list(commutant(list(a.basis), p).basis), p)
    ok, res = same_span(a.space, back.space, 1e-8)
    assert ok, res
    assert commutant(list(a.basis), p).closure_residual() < 1e-8


def test_operator_space_is_read_only():
    s = orthonormalize([I2], 2)
    with pytest.raises(ValueError):
        s.basis[0, 0, 0] = 5
    assert isinstance(s, OperatorSpace)


def test_generate_algebra_needs_dimension():
    with pytest.raises(ValueError):
        generate_algebra([])


def test_random_conjugation_preserves_dimension():
    rng = np.random.default_rng(9)
    v = haar_unitary(4, rng)
    a = commutant([v @ Z1 @ v.conj().T])
    assert a.dim == 8
