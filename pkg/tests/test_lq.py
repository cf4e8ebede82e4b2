"""LQ factorization, causal split, latent past solves, and binary dumps.

Covers:
  * exact reconstruction ``L @ Q`` of the stacked Hankel matrix, the
    orthonormal-row property of ``Q``, lower-triangularity and the
    nonnegative-diagonal sign convention of ``L``.
  * the fixed point: a stack that is already lower-triangular with an
    orthonormal right factor comes back unchanged.
  * rank-deficiency errors for unexciting inputs and too-short records.
  * causal_split worked examples, exact complementarity, the mask versus
    a loop-built oracle, and the strict-upper parameter count
    ``p*m*L_f*(L_f-1)/2``.
  * gamma1_of forward-substitution and minimum-norm fallback behavior.
  * residual ordering ``||L32' Q2 + L33 Q3||_F >= ||L33 Q3||_F``.
  * byte-exact save/load round-trips and format validation.
"""

from __future__ import annotations

import struct

import numpy as np
import pytest

from conftest import demo_model, make_blocks, make_partition, seeded
from oracles import causal_mask_by_loops

from ddpc import (
    CausalSplit,
    DimensionMismatch,
    HorizonSpec,
    LqBlocks,
    RankDeficient,
    causal_split,
    collect_open_loop,
    factorize,
    gamma1_of,
    load_lq_blocks,
    partition,
    save_lq_blocks,
)
from ddpc.lq import causal_block_mask


def _fabricate_blocks(L: np.ndarray, Q: np.ndarray, m: int, p: int,
                      L_p: int, L_f: int) -> LqBlocks:
    d1 = (m + p) * L_p
    d2 = m * L_f
    return LqBlocks(
        L11=L[:d1, :d1], L21=L[d1:d1 + d2, :d1],
        L22=L[d1:d1 + d2, d1:d1 + d2], L31=L[d1 + d2:, :d1],
        L32=L[d1 + d2:, d1:d1 + d2], L33=L[d1 + d2:, d1 + d2:],
        Q1=Q[:d1], Q2=Q[d1:d1 + d2], Q3=Q[d1 + d2:],
        m=m, p=p, L_p=L_p, L_f=L_f, M=Q.shape[1],
    )


def _stack(blocks: LqBlocks) -> tuple[np.ndarray, np.ndarray]:
    d1, d2, d3 = blocks.dim_past, blocks.dim_u, blocks.dim_y
    L = np.zeros((d1 + d2 + d3, d1 + d2 + d3))
    L[:d1, :d1] = blocks.L11
    L[d1:d1 + d2, :d1] = blocks.L21
    L[d1:d1 + d2, d1:d1 + d2] = blocks.L22
    L[d1 + d2:, :d1] = blocks.L31
    L[d1 + d2:, d1:d1 + d2] = blocks.L32
    L[d1 + d2:, d1 + d2:] = blocks.L33
    Q = np.vstack([blocks.Q1, blocks.Q2, blocks.Q3])
    return L, Q


# ---------------------------------------------------------------------------
# factorize
# ---------------------------------------------------------------------------


def test_factorize_reconstructs_stack():
    model = demo_model()
    part = make_partition(model, 120, L_p=4, L_f=3, rng=seeded(20))
    blocks = factorize(part)
    L, Q = _stack(blocks)
    stack = np.vstack([part.Z_p, part.U_f, part.Y_f])
    np.testing.assert_allclose(L @ Q, stack, atol=1e-10 * np.abs(stack).max())


def test_factorize_q_has_orthonormal_rows():
    blocks = make_blocks(demo_model(), 150, L_p=3, L_f=4, rng=seeded(21))
    _, Q = _stack(blocks)
    np.testing.assert_allclose(Q @ Q.T, np.eye(Q.shape[0]), atol=1e-12)
    # cross-block orthogonality in particular
    np.testing.assert_allclose(blocks.Q1 @ blocks.Q3.T, 0.0, atol=1e-12)
    np.testing.assert_allclose(blocks.Q2 @ blocks.Q3.T, 0.0, atol=1e-12)


def test_factorize_sign_convention_and_triangularity():
    blocks = make_blocks(demo_model(), 100, L_p=2, L_f=5, rng=seeded(22))
    L, _ = _stack(blocks)
    assert np.all(np.diag(L) >= 0.0)
    assert np.allclose(L, np.tril(L))
    # strictly-upper entries inside each diagonal block are exact zeros
    np.testing.assert_array_equal(blocks.L11, np.tril(blocks.L11))
    np.testing.assert_array_equal(blocks.L22, np.tril(blocks.L22))
    np.testing.assert_array_equal(blocks.L33, np.tril(blocks.L33))


def test_factorize_triangular_fixed_point():
    """A stack that is already L @ [I 0] comes back unchanged."""
    rng = seeded(23)
    L0 = np.tril(rng.standard_normal((6, 6)))
    np.fill_diagonal(L0, np.abs(np.diag(L0)) + 1.0)
    S = np.hstack([L0, np.zeros((6, 2))])
    spec = HorizonSpec(L_p=1, L_f=2)
    from ddpc.trajectory import HankelPartition
    part = HankelPartition(Z_p=S[:2], U_p=S[:1], Y_p=S[1:2], U_f=S[2:4],
                           Y_f=S[4:6], m=1, p=1, spec=spec)
    blocks = factorize(part)
    L, Q = _stack(blocks)
    np.testing.assert_allclose(L, L0, atol=1e-12)
    np.testing.assert_allclose(Q, np.hstack([np.eye(6), np.zeros((6, 2))]),
                               atol=1e-12)


def test_factorize_determinism():
    model = demo_model()
    part = make_partition(model, 140, L_p=5, L_f=5, rng=seeded(24))
    b1 = factorize(part)
    b2 = factorize(part)
    for name in ("L11", "L21", "L22", "L31", "L32", "L33", "Q1", "Q2", "Q3"):
        np.testing.assert_array_equal(getattr(b1, name), getattr(b2, name))


def test_factorize_constant_input_rank_deficient():
    model = demo_model(sigma_e=0.1)
    traj = collect_open_loop(model, np.ones((1, 80)), rng=seeded(25))
    part = partition(traj, HorizonSpec(L_p=3, L_f=4))
    with pytest.raises(RankDeficient):
        factorize(part)


def test_factorize_short_record_rank_deficient():
    model = demo_model()
    # L = 10 -> 20 stacked rows, but only 15 - 10 + 1 = 6 columns
    traj = collect_open_loop(model, seeded(26).standard_normal((1, 15)),
                             rng=seeded(26))
    part = partition(traj, HorizonSpec(L_p=5, L_f=5))
    with pytest.raises(RankDeficient):
        factorize(part)


def test_past_block_singular_for_noise_free_data():
    """Deterministic records make L11 structurally singular (the joint
    past has rank m*L_p + n < (m+p)*L_p) while L22 stays healthy."""
    blocks = make_blocks(demo_model(sigma_e=0.0), 200, L_p=8, L_f=4,
                         rng=seeded(27))
    assert not blocks.past_is_nonsingular()
    noisy = make_blocks(demo_model(sigma_e=0.2), 200, L_p=8, L_f=4,
                        rng=seeded(27))
    assert noisy.past_is_nonsingular()


# ---------------------------------------------------------------------------
# causal_split
# ---------------------------------------------------------------------------


def _blocks_with_l32(L32: np.ndarray, m: int, p: int, L_f: int) -> LqBlocks:
    d3, d2 = L32.shape
    d1 = 2
    M = d1 + d2 + d3
    zeros = np.zeros
    return LqBlocks(L11=np.eye(d1), L21=zeros((d2, d1)), L22=np.eye(d2),
                    L31=zeros((d3, d1)), L32=L32, L33=np.eye(d3),
                    Q1=zeros((d1, M)), Q2=zeros((d2, M)), Q3=zeros((d3, M)),
                    m=m, p=p, L_p=1, L_f=L_f, M=M)


def test_causal_split_siso_example():
    blocks = _blocks_with_l32(np.array([[1.0, 9.0], [3.0, 4.0]]),
                              m=1, p=1, L_f=2)
    split = causal_split(blocks)
    np.testing.assert_array_equal(split.causal, [[1.0, 0.0], [3.0, 4.0]])
    np.testing.assert_array_equal(split.noncausal, [[0.0, 9.0], [0.0, 0.0]])


def test_causal_split_lower_triangular_is_fixed_point():
    rng = seeded(28)
    L32 = np.tril(rng.standard_normal((3, 3)))
    split = causal_split(_blocks_with_l32(L32, m=1, p=1, L_f=3))
    np.testing.assert_array_equal(split.causal, L32)
    np.testing.assert_array_equal(split.noncausal, np.zeros((3, 3)))


def test_causal_split_exact_complement():
    blocks = make_blocks(demo_model(), 160, L_p=4, L_f=6, rng=seeded(29))
    split = causal_split(blocks)
    np.testing.assert_array_equal(split.causal + split.noncausal, blocks.L32)
    # no overlap: wherever one is nonzero the other is exactly zero
    assert not np.any((split.causal != 0.0) & (split.noncausal != 0.0))


@pytest.mark.parametrize("m,p,L_f", [(1, 1, 4), (2, 1, 3), (1, 3, 3),
                                     (2, 2, 5)])
def test_causal_mask_matches_loop_oracle(m, p, L_f):
    np.testing.assert_array_equal(causal_block_mask(p, m, L_f),
                                  causal_mask_by_loops(m, p, L_f))


@pytest.mark.parametrize("m,p,L_f", [(1, 1, 5), (2, 3, 4)])
def test_causal_split_parameter_count(m, p, L_f):
    mask = causal_block_mask(p, m, L_f)
    n_free = int(mask.size - mask.sum())
    assert n_free == p * m * L_f * (L_f - 1) // 2


# ---------------------------------------------------------------------------
# gamma1_of
# ---------------------------------------------------------------------------


def test_gamma1_zero_past():
    blocks = make_blocks(demo_model(), 120, L_p=3, L_f=3, rng=seeded(30))
    np.testing.assert_array_equal(gamma1_of(blocks, np.zeros(blocks.dim_past)),
                                  np.zeros(blocks.dim_past))


def test_gamma1_identity_past_block():
    L32 = np.zeros((2, 2))
    blocks = _blocks_with_l32(L32, m=1, p=1, L_f=2)   # L11 = I by fabrication
    z = np.array([0.3, -1.7])
    np.testing.assert_allclose(gamma1_of(blocks, z), z, atol=1e-15)


def test_gamma1_solves_triangular_system():
    blocks = make_blocks(demo_model(), 150, L_p=4, L_f=3, rng=seeded(31))
    rng = seeded(32)
    z = rng.standard_normal(blocks.dim_past)
    g1 = gamma1_of(blocks, z)
    assert np.linalg.norm(blocks.L11 @ g1 - z) < 1e-10 * np.linalg.norm(z)


def test_gamma1_minimum_norm_fallback():
    """With a singular past block the returned solution matches the
    pseudoinverse: least residual first, then least norm."""
    blocks = make_blocks(demo_model(sigma_e=0.0), 200, L_p=8, L_f=4,
                         rng=seeded(33))
    assert not blocks.past_is_nonsingular()
    # a consistent right-hand side: an actual past window from fresh data
    fresh = make_partition(demo_model(sigma_e=0.0), 60, L_p=8, L_f=4,
                           rng=seeded(34))
    z = fresh.Z_p[:, 5]
    g1 = gamma1_of(blocks, z)
    ref = np.linalg.pinv(blocks.L11, rcond=1e-10) @ z
    np.testing.assert_allclose(g1, ref, atol=1e-8)
    assert np.linalg.norm(blocks.L11 @ g1 - z) < 1e-6 * np.linalg.norm(z)


def test_gamma1_dimension_mismatch():
    blocks = make_blocks(demo_model(), 120, L_p=3, L_f=3, rng=seeded(35))
    with pytest.raises(DimensionMismatch):
        gamma1_of(blocks, np.zeros(blocks.dim_past + 1))


# ---------------------------------------------------------------------------
# residual ordering
# ---------------------------------------------------------------------------


def test_noncausal_residual_dominates_full_residual():
    """Zeroing the non-causal part can only increase the fit residual:
    ||L32' Q2 + L33 Q3||_F >= ||L33 Q3||_F, with the products formed
    explicitly rather than via orthonormality."""
    for tag in range(5):
        blocks = make_blocks(demo_model(sigma_e=0.25), 150, L_p=4, L_f=5,
                             rng=seeded(36, tag))
        split = causal_split(blocks)
        with_nc = np.linalg.norm(split.noncausal @ blocks.Q2
                                 + blocks.L33 @ blocks.Q3)
        without = np.linalg.norm(blocks.L33 @ blocks.Q3)
        assert with_nc >= without
        assert with_nc > without  # noisy data: strictly larger


def test_residual_equality_when_noncausal_vanishes():
    blocks = make_blocks(demo_model(sigma_e=0.25), 150, L_p=4, L_f=5,
                         rng=seeded(37))
    zeroed = CausalSplit(causal=blocks.L32,
                         noncausal=np.zeros_like(blocks.L32))
    with_nc = np.linalg.norm(zeroed.noncausal @ blocks.Q2
                             + blocks.L33 @ blocks.Q3)
    assert with_nc == pytest.approx(np.linalg.norm(blocks.L33 @ blocks.Q3))


# ---------------------------------------------------------------------------
# save / load
# ---------------------------------------------------------------------------


def test_save_load_roundtrip_bitwise(tmp_path):
    blocks = make_blocks(demo_model(), 130, L_p=3, L_f=4, rng=seeded(38))
    path = tmp_path / "blocks.lqb"
    save_lq_blocks(blocks, path)
    back = load_lq_blocks(path)
    assert (back.m, back.p, back.L_p, back.L_f, back.M) == \
        (blocks.m, blocks.p, blocks.L_p, blocks.L_f, blocks.M)
    for name in ("L11", "L21", "L22", "L31", "L32", "L33", "Q1", "Q2", "Q3"):
        np.testing.assert_array_equal(getattr(back, name),
                                      getattr(blocks, name))


def test_save_format_header(tmp_path):
    blocks = make_blocks(demo_model(), 110, L_p=2, L_f=3, rng=seeded(39))
    path = tmp_path / "blocks.lqb"
    save_lq_blocks(blocks, path)
    raw = path.read_bytes()
    assert raw[:4] == b"LQB1"
    m, p, L_p, L_f, M = struct.unpack_from("<5q", raw, 4)
    assert (m, p, L_p, L_f, M) == (1, 1, 2, 3, blocks.M)
    d1, d2, d3 = blocks.dim_past, blocks.dim_u, blocks.dim_y
    n_floats = (d1 * d1 + d2 * d1 + d2 * d2 + d3 * d1 + d3 * d2 + d3 * d3
                + (d1 + d2 + d3) * M)
    assert len(raw) == 4 + 40 + 8 * n_floats


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.lqb"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError):
        load_lq_blocks(path)


def test_load_rejects_truncation_and_trailing(tmp_path):
    blocks = make_blocks(demo_model(), 110, L_p=2, L_f=3, rng=seeded(40))
    path = tmp_path / "blocks.lqb"
    save_lq_blocks(blocks, path)
    raw = path.read_bytes()
    (tmp_path / "short.lqb").write_bytes(raw[:-9])
    with pytest.raises(ValueError):
        load_lq_blocks(tmp_path / "short.lqb")
    (tmp_path / "long.lqb").write_bytes(raw + b"\x00")
    with pytest.raises(ValueError):
        load_lq_blocks(tmp_path / "long.lqb")
