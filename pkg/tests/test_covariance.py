import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ebsgd.batching import BatchMeans, offline_batch_means
from ebsgd.covariance import (
    CovEstimate,
    Kind,
    ebs2b_estimate,
    ebs_estimate,
    ibs_estimate,
    lugsail_estimate,
    pair_merge,
    psd_project,
)


def bm_of(means, b, n=None):
    means = np.asarray(means, dtype=float)
    if means.ndim == 1:
        means = means[:, None]
    return BatchMeans(means, b, n if n is not None else b * len(means))


def literal_general_estimator(chain, boundaries, center):
    """Direct double loop over batches and their iterates."""
    d = chain.shape[1]
    out = np.zeros((d, d))
    start = 0
    for end in boundaries:
        seg = chain[start:end]
        mean = np.zeros(d)
        for row in seg:
            mean += row
        mean /= len(seg)
        dev = mean - center
        out += len(seg) * np.outer(dev, dev)
        start = end
    return out / len(boundaries)


def test_hand_example_ebs():
    bm = offline_batch_means(np.array([[1.0], [3.0], [2.0], [4.0]]), 2)
    est = ebs_estimate(bm)
    assert est.matrix[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert (est.batch_size, est.n_batches, est.kind) == (2, 2, Kind.EBS)


def test_constant_chain_gives_zero():
    bm = offline_batch_means(np.full((40, 3), 2.5), 4)
    assert np.all(ebs_estimate(bm).matrix == 0)
    assert np.all(lugsail_estimate(bm).matrix == 0)


def test_ebs_matches_literal_sum():
    chain = np.random.default_rng(0).normal(size=(100, 3))
    est = ebs_estimate(offline_batch_means(chain, 4))
    center = chain.reshape(25, 4, 3).mean(axis=1).mean(axis=0)
    ref = literal_general_estimator(chain, list(range(4, 101, 4)), center)
    np.testing.assert_allclose(est.matrix, ref, rtol=1e-12, atol=1e-14)


def test_ebs_needs_two_batches():
    with pytest.raises(ValueError, match="insufficient"):
        ebs_estimate(bm_of([1.0], 3))


def test_pair_merge_examples():
    with pytest.raises(ValueError, match="lugsail needs >= 4 batches"):
        pair_merge(bm_of([2.0, 3.0], 2))
    m = pair_merge(bm_of([1, 3, 5, 7], 2))
    np.testing.assert_array_equal(m.means[:, 0], [2, 6])
    assert m.batch_size == 4
    odd = pair_merge(bm_of([1, 3, 5, 7, 9], 2))
    np.testing.assert_array_equal(odd.means[:, 0], [2, 6])
    assert odd.center[0] == 4


def test_lugsail_hand_example():
    bm = bm_of([1, 3, 5, 7], 2)
    assert ebs_estimate(bm).matrix[0, 0] == pytest.approx(10.0)
    assert ebs2b_estimate(bm).matrix[0, 0] == pytest.approx(16.0)
    lug = lugsail_estimate(bm)
    assert lug.matrix[0, 0] == pytest.approx(22.0)
    assert psd_project(lug) is lug


def test_lugsail_matches_offline_chain():
    chain = np.random.default_rng(1).normal(size=(400, 2)).cumsum(axis=0) * 0.1
    lug = lugsail_estimate(offline_batch_means(chain, 8))
    s_b = ebs_estimate(offline_batch_means(chain, 8)).matrix
    s_2b = ebs_estimate(offline_batch_means(chain, 16)).matrix
    np.testing.assert_allclose(lug.matrix, 2 * s_2b - s_b, rtol=1e-12, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(4, 40), st.integers(1, 8), st.integers(1, 4), st.integers(0, 2**31))
def test_lugsail_identity_is_exact(a, b, d, seed):
    means = np.random.default_rng(seed).normal(size=(a, d))
    bm = BatchMeans(means, b, a * b)
    lug = lugsail_estimate(bm)
    ref = 2.0 * ebs_estimate(pair_merge(bm)).matrix - ebs_estimate(bm).matrix
    np.testing.assert_array_equal(lug.matrix, 0.5 * (ref + ref.T))
    np.testing.assert_array_equal(lug.matrix, lug.matrix.T)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2**31))
def test_ebs_is_psd_and_symmetric(a, d, seed):
    rng = np.random.default_rng(seed)
    est = ebs_estimate(BatchMeans(rng.normal(size=(a, d)), 3, 3 * a))
    np.testing.assert_array_equal(est.matrix, est.matrix.T)
    v = rng.normal(size=(100, d))
    assert np.all(np.einsum("ki,ij,kj->k", v, est.matrix, v) >= -1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_affine_equivariance(seed):
    rng = np.random.default_rng(seed)
    chain = rng.normal(size=(160, 3))
    M = rng.normal(size=(3, 3))
    v = rng.normal(size=3)
    moved = chain @ M.T + v
    for fn in (ebs_estimate, lugsail_estimate, ebs2b_estimate):
        a = fn(offline_batch_means(chain, 5)).matrix
        b = fn(offline_batch_means(moved, 5)).matrix
        np.testing.assert_allclose(b, M @ a @ M.T, rtol=1e-9, atol=1e-10)
    bounds = [1, 8, 29, 71, 160]
    sizes = np.diff([0] + bounds)

    def ibs(c):
        means = np.stack([c[s:e].mean(axis=0) for s, e in zip([0] + bounds[:-1], bounds)])
        return ibs_estimate(means, sizes).matrix

    np.testing.assert_allclose(ibs(moved), M @ ibs(chain) @ M.T, rtol=1e-9, atol=1e-10)


def test_batch_permutation_and_reversal_invariance():
    rng = np.random.default_rng(2)
    chain = rng.normal(size=(60, 2))
    base = ebs_estimate(offline_batch_means(chain, 6)).matrix
    blocks = chain.reshape(10, 6, 2)
    perm = blocks[rng.permutation(10)].reshape(60, 2)
    np.testing.assert_allclose(ebs_estimate(offline_batch_means(perm, 6)).matrix, base, rtol=1e-12)
    rev = blocks[:, ::-1].reshape(60, 2)
    np.testing.assert_allclose(ebs_estimate(offline_batch_means(rev, 6)).matrix, base, rtol=1e-12)


def test_ibs_matches_literal_sum():
    chain = np.random.default_rng(3).normal(size=(100, 2))
    bounds = [1, 8, 29, 71, 100]
    starts = [0] + bounds[:-1]
    means = np.stack([chain[s:e].mean(axis=0) for s, e in zip(starts, bounds)])
    est = ibs_estimate(means, np.diff([0] + bounds))
    ref = literal_general_estimator(chain, bounds, chain.mean(axis=0))
    np.testing.assert_allclose(est.matrix, ref, rtol=1e-12, atol=1e-14)
    assert est.batch_size == 0 and est.n_batches == 5 and est.n == 100


def test_ibs_reduces_to_known_cases():
    chain = np.random.default_rng(4).normal(size=(48, 3))
    bm = offline_batch_means(chain, 6)
    eq = ibs_estimate(bm.means, np.full(8, 6))
    np.testing.assert_allclose(eq.matrix, ebs_estimate(bm).matrix, rtol=1e-12)
    ones = ibs_estimate(chain, np.ones(48))
    np.testing.assert_allclose(ones.matrix, np.cov(chain.T, bias=True), rtol=1e-12)
    with pytest.raises(ValueError):
        ibs_estimate(chain[:1], [1])


def test_psd_project_clips_negative_eigenvalues():
    est = CovEstimate(np.diag([2.0, -1.0]), Kind.LUGSAIL, 2, 4, 8)
    assert est.indefinite
    out = psd_project(est)
    eps = 1e-10 * 0.5
    np.testing.assert_allclose(out.matrix, np.diag([2.0, eps]), atol=1e-15)
    assert out.projected and not out.indefinite
    pd = CovEstimate(np.eye(2), Kind.EBS, 2, 4, 8)
    assert psd_project(pd) is pd


def test_batched_estimates_match_single_chains():
    means = np.random.default_rng(5).normal(size=(12, 4, 3))
    bm = BatchMeans(means, 8, 96)
    for fn in (ebs_estimate, lugsail_estimate):
        stacked = fn(bm).matrix
        for r in range(4):
            single = fn(BatchMeans(means[:, r], 8, 96)).matrix
            np.testing.assert_allclose(stacked[r], single, rtol=1e-14, atol=1e-15)


def test_serialization_round_trip():
    est = lugsail_estimate(bm_of(np.random.default_rng(6).normal(size=(10, 2)), 4))
    back = CovEstimate.from_json(est.to_json())
    np.testing.assert_array_equal(back.matrix, est.matrix)
    assert (back.kind, back.batch_size, back.n_batches, back.n) == (Kind.LUGSAIL, 4, 10, 40)
    obj = json.loads(est.to_json())
    assert {"kind", "b_n", "a_n", "n", "matrix"} <= set(obj)
    lines = est.to_csv().strip().splitlines()
    assert lines[0] == "i,j,value" and len(lines) == 1 + 3
