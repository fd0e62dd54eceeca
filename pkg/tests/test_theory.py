import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import box as sbox

from nnreach.network import rng_from_seed
from nnreach.theory import (
    Parallelotope,
    SplitSpec,
    bounding_box_volume,
    optimal_ratio_scan,
    repeated_split_reduction,
    vred_brute,
    vred_closed_form,
)

V_FIXED = [[2.0, 1.0], [3.0, 1.0]]


def vertex_box(corner, gens):
    """Independent oracle: enumerate vertices with itertools and take min/max."""
    gens = np.asarray(gens, float)
    verts = [corner + sum(c * gens[:, j] for j, c in enumerate(choice))
             for choice in itertools.product((0.0, 1.0), repeat=gens.shape[1])]
    verts = np.array(verts)
    return verts.min(axis=0), verts.max(axis=0)


def oracle_vred(V, k, r):
    V = np.asarray(V, float)
    lo, hi = vertex_box(np.zeros(V.shape[0]), V)
    left, right = V.copy(), V.copy()
    left[:, k] *= r
    right[:, k] *= 1 - r
    llo, lhi = vertex_box(np.zeros(V.shape[0]), left)
    rlo, rhi = vertex_box(r * V[:, k], right)
    ilo, ihi = np.maximum(llo, rlo), np.minimum(lhi, rhi)
    inter = np.prod(np.clip(ihi - ilo, 0, None))
    return np.prod(hi - lo) - (np.prod(lhi - llo) + np.prod(rhi - rlo) - inter)


def rel_close(a, b):
    return abs(a - b) <= max(1e-12, 1e-9 * max(abs(a), abs(b)))


class TestBoundingBox:
    def test_identity(self):
        assert bounding_box_volume(np.eye(2)) == 1.0

    def test_fixed(self):
        assert bounding_box_volume(V_FIXED) == 12.0
        lo, hi = vertex_box(np.zeros(2), V_FIXED)
        assert np.prod(hi - lo) == 12.0

    def test_zero_row(self):
        assert bounding_box_volume([[0, 0], [1, 2]]) == 0.0

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_vertex_oracle(self, seed):
        rng = rng_from_seed(seed)
        V = rng.normal(size=(int(rng.integers(2, 5)), int(rng.integers(2, 5))))
        lo, hi = vertex_box(np.zeros(V.shape[0]), V)
        assert bounding_box_volume(V) == pytest.approx(np.prod(hi - lo), rel=1e-12)
        plo, phi = Parallelotope(np.zeros(V.shape[0]), V).bounding_box()
        np.testing.assert_allclose(plo, lo, atol=1e-12)
        np.testing.assert_allclose(phi, hi, atol=1e-12)


class TestReduction:
    def test_fixed_case(self):
        assert vred_brute(V_FIXED, SplitSpec(0, 0.5)) == pytest.approx(3.0, abs=1e-12)
        assert vred_closed_form(V_FIXED, SplitSpec(0, 0.5)) == pytest.approx(3.0, abs=1e-12)

    def test_fixed_case_pieces_with_shapely(self):
        # halves of u1: boxes [0,2]x[0,2.5] and [1,3]x[1.5,4] overlap in a 1x1 square
        llo, lhi = vertex_box(np.zeros(2), [[1, 1], [1.5, 1]])
        rlo, rhi = vertex_box(np.array([1.0, 1.5]), [[1, 1], [1.5, 1]])
        assert np.prod(lhi - llo) == 5.0 and np.prod(rhi - rlo) == 5.0
        union = sbox(*llo, *lhi).union(sbox(*rlo, *rhi)).area
        assert 12.0 - union == pytest.approx(3.0)

    @pytest.mark.parametrize("r", [0.0, 1.0])
    def test_degenerate_ratio(self, r):
        V = rng_from_seed(3).normal(size=(3, 3))
        assert vred_brute(V, SplitSpec(1, r)) == pytest.approx(0.0, abs=1e-12)
        assert vred_closed_form(V, SplitSpec(1, r)) == 0.0

    def test_oracle_sweep(self):
        rng = rng_from_seed(2024)
        for _ in range(150):
            V = rng.normal(size=(int(rng.integers(2, 5)), int(rng.integers(2, 5))))
            k, r = int(rng.integers(V.shape[1])), float(rng.random())
            closed = vred_closed_form(V, SplitSpec(k, r))
            assert rel_close(closed, oracle_vred(V, k, r))
            assert rel_close(closed, vred_brute(V, SplitSpec(k, r)))
            assert closed >= 0

    @settings(max_examples=100, deadline=None)
    @given(r=st.floats(0, 1), seed=st.integers(0, 10_000))
    def test_symmetric_in_r(self, r, seed):
        V = rng_from_seed(seed).normal(size=(3, 2))
        a = vred_closed_form(V, SplitSpec(0, r))
        b = vred_closed_form(V, SplitSpec(0, 1 - r))
        assert rel_close(a, b)

    def test_two_output_case(self):
        rng = rng_from_seed(5)
        for _ in range(100):
            V = rng.normal(size=(2, int(rng.integers(2, 5))))
            r = float(rng.random())
            scale = abs(V[0, 0]) * abs(V[1, 0])
            got = vred_closed_form(V, SplitSpec(0, r))
            assert abs(got - 2 * r * (1 - r) * scale) <= 4 * np.finfo(float).eps * scale

    def test_invalid(self):
        with pytest.raises(ValueError):
            SplitSpec(0, 1.5)
        with pytest.raises(ValueError):
            vred_brute(V_FIXED, SplitSpec(2, 0.5))
        with pytest.raises(ValueError):
            vred_brute(np.ones((2, 21)), SplitSpec(0, 0.5))


class TestOptimalRatio:
    @pytest.mark.parametrize("n_out", [2, 3])
    @pytest.mark.parametrize("seed", range(5))
    def test_half(self, n_out, seed):
        V = rng_from_seed(seed).normal(size=(n_out, 3))
        assert optimal_ratio_scan(V, 1000) == 0.5

    def test_flat_objective(self):
        assert optimal_ratio_scan([[0.0, 1.0], [0.0, 2.0]], 1000) == 0.5

    def test_rejects_n_out(self):
        with pytest.raises(ValueError):
            optimal_ratio_scan(np.ones((4, 2)))


class TestRepeatedSplit:
    def test_limit(self):
        per_round, cumulative = repeated_split_reduction(V_FIXED, 20)
        assert per_round[0] == 3.0
        assert abs(cumulative - 6.0) <= 1e-5

    def test_geometric_partial_sum(self):
        for rounds in range(1, 30):
            _, cumulative = repeated_split_reduction(V_FIXED, rounds)
            assert cumulative == pytest.approx(sum(0.5 ** (j - 1) * 3.0 for j in range(1, rounds + 1)), rel=1e-15)

    def test_increasing_and_bounded(self):
        values = [repeated_split_reduction(V_FIXED, n)[1] for n in range(1, 40)]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert all(v <= 6.0 for v in values)
        assert all(b > a for a, b in zip(values[:20], values[1:21]))

    def test_second_round_by_oracle(self):
        # round 2 splits both halves again; each half's generator is u1/2
        half = np.array(V_FIXED)
        half[:, 0] *= 0.5
        per_round, _ = repeated_split_reduction(V_FIXED, 2)
        assert per_round[1] == pytest.approx(2 * oracle_vred(half, 0, 0.5))

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            repeated_split_reduction(np.ones((3, 2)), 5)
        with pytest.raises(ValueError):
            repeated_split_reduction(V_FIXED, 0)
