import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unbalanced_decomp import (GlobalCoordinate, GridShape, SizeGuardError, Transform,
                               analytic_estimate, balanced_plan, compare_estimate,
                               compound_index, exact_transfer_map, shared_domain,
                               total_size, unbalanced_plan)
from unbalanced_decomp.grid import DIMS
from unbalanced_decomp.redistribution import shared_ownership, trans_data

from conftest import layouts, small_shapes

TRANSFORMS = [t.value for t in Transform]


def naive_owner(plan, flat):
    for rank, (lo, hi) in enumerate(plan.ranges):
        if lo <= flat < hi:
            return rank
    raise AssertionError("unowned index")


def naive_transfer(plan_src, plan_dst):
    """Element-by-element reference over the full 7-D shared box."""
    s = plan_src.shape
    per_space = {
        "g_lo": {"x": s.nakx, "y": s.naky},
        "xxf_lo": {"x": s.inx, "y": s.naky},
        "yxf_lo": {"x": s.inx, "y": s.iny},
    }
    ext = {"ig": s.nig, "isgn": s.nsign, "l": s.nlambda, "e": s.negrid, "s": s.nspec}
    ext["x"] = min(per_space[plan_src.space.value]["x"], per_space[plan_dst.space.value]["x"])
    ext["y"] = min(per_space[plan_src.space.value]["y"], per_space[plan_dst.space.value]["y"])
    counts = np.zeros((plan_src.nprocs, plan_dst.nprocs), dtype=np.int64)
    for values in itertools.product(*(range(ext[d]) for d in DIMS)):
        c = GlobalCoordinate(**dict(zip(DIMS, values)))
        a = naive_owner(plan_src, compound_index(plan_src.space, s, plan_src.layout, c))
        b = naive_owner(plan_dst, compound_index(plan_dst.space, s, plan_dst.layout, c))
        counts[a, b] += 1
    return counts


TINY = GridShape(nakx=2, naky=3, inx=4, iny=5, nig=3, nlambda=2, negrid=1, nspec=2)


class TestSharedDomain:
    def test_g2xxf_reconstruction(self, recon_shape):
        dom = shared_domain("g2xxf", recon_shape)
        assert dom.size == 32 * 32 * 31 * 2 * 32 * 8 * 2

    def test_no_dealiasing_gap(self):
        s = GridShape(nakx=3, naky=4, inx=3, iny=4, nig=3, nlambda=2, negrid=1, nspec=1)
        for t in TRANSFORMS:
            dom = shared_domain(t, s)
            src = Transform(t).source
            full = total_size(src, s, "xyles") * (s.nig * 2 if src.value == "g_lo"
                                                   else s.inx if src.value == "xxf_lo" else s.iny)
            assert dom.size == full

    def test_xxf2yxf_small(self):
        s = GridShape(nakx=4, naky=4, inx=6, iny=6, nig=5, nlambda=2, negrid=2, nspec=2)
        dom = shared_domain("xxf2yxf", s)
        assert dom.size == 6 * 4 * 5 * 2 * 8 == 1920 == s.inx * total_size("xxf_lo", s, "xyles")

    def test_inverse_same_domain(self, desk_shape):
        assert shared_domain("g2xxf", desk_shape) == shared_domain("xxf2g", desk_shape)
        assert shared_domain("xxf2yxf", desk_shape) == shared_domain("yxf2xxf", desk_shape)


class TestExactTransferMap:
    @pytest.mark.parametrize("transform", TRANSFORMS)
    @pytest.mark.parametrize("layout", ["xyles", "lexys", "yxels"])
    @pytest.mark.parametrize("nprocs, unbalanced", [(1, False), (5, False), (7, True), (12, True)])
    def test_matches_naive_oracle(self, transform, layout, nprocs, unbalanced):
        t = Transform(transform)
        make = unbalanced_plan if unbalanced else balanced_plan
        kwargs = {"max_imbalance": 10.0} if unbalanced else {}
        src = make(t.source, TINY, layout, nprocs, **kwargs)
        dst = make(t.target, TINY, layout, nprocs, **kwargs)
        tmap = exact_transfer_map(src, dst, t)
        assert np.array_equal(tmap.counts, naive_transfer(src, dst))

    def test_identity_is_diagonal(self, desk_shape):
        plan = balanced_plan("xxf_lo", desk_shape, "xyles", 37)
        tmap = exact_transfer_map(plan, plan)
        assert tmap.off_diagonal_elements == 0 and tmap.bytes == 0 and tmap.message_count == 0
        assert tmap.total_elements == desk_shape.inx * total_size("xxf_lo", desk_shape, "xyles")

    def test_mismatched_transform(self, desk_shape):
        a = balanced_plan("xxf_lo", desk_shape, "xyles", 4)
        b = balanced_plan("yxf_lo", desk_shape, "xyles", 4)
        with pytest.raises(ValueError, match="transform"):
            exact_transfer_map(a, b, "g2xxf")

    def test_mismatched_layout(self, desk_shape):
        a = balanced_plan("xxf_lo", desk_shape, "xyles", 4)
        b = balanced_plan("yxf_lo", desk_shape, "yxels", 4)
        with pytest.raises(ValueError, match="layout"):
            exact_transfer_map(a, b)

    def test_mismatched_shape(self, desk_shape):
        other = GridShape(nakx=8, naky=8, inx=12, iny=12, nig=9, nlambda=4, negrid=2, nspec=2)
        a = balanced_plan("xxf_lo", desk_shape, "xyles", 4)
        b = balanced_plan("yxf_lo", other, "xyles", 4)
        with pytest.raises(ValueError, match="shape"):
            exact_transfer_map(a, b)

    def test_size_guard(self, recon_shape):
        a = balanced_plan("xxf_lo", recon_shape, "xyles", 64)
        b = balanced_plan("yxf_lo", recon_shape, "xyles", 64)
        with pytest.raises(SizeGuardError, match="size-guard"):
            exact_transfer_map(a, b, size_guard=10**6)

    def test_balanced_even_split_is_mostly_local(self):
        # xxf and yxf both divide exactly with zero idle ranks on both sides
        s = GridShape(nakx=8, naky=8, inx=12, iny=12, nig=15, nlambda=4, negrid=2, nspec=2)
        n = 64
        a = balanced_plan("xxf_lo", s, "xyles", n)
        b = balanced_plan("yxf_lo", s, "xyles", n)
        assert a.extents.min() == a.extents.max() and b.extents.min() == b.extents.max()
        tmap = exact_transfer_map(a, b)
        assert tmap.off_diagonal_elements / tmap.total_elements <= 0.05

    def test_unbalanced_same_units_is_diagonal(self, desk_shape):
        a = unbalanced_plan("xxf_lo", desk_shape, "yxles", 48)
        b = unbalanced_plan("yxf_lo", desk_shape, "yxles", 48)
        tmap = exact_transfer_map(a, b, "xxf2yxf")
        assert tmap.off_diagonal_elements == 0 and tmap.diagonal_fraction == 1.0

    def test_chunking_and_workers_do_not_change_result(self, desk_shape):
        a = balanced_plan("g_lo", desk_shape, "lexys", 23)
        b = balanced_plan("xxf_lo", desk_shape, "lexys", 23)
        ref = exact_transfer_map(a, b)
        for chunk, workers in [(1, 1), (97, 3), (1000, 4), (10**7, 2)]:
            other = exact_transfer_map(a, b, chunk_size=chunk, workers=workers)
            assert np.array_equal(ref.counts, other.counts)

    def test_send_profile_rises_then_saturates(self, desk_shape):
        n = 96
        a = balanced_plan("xxf_lo", desk_shape, "yxles", n)
        b = balanced_plan("yxf_lo", desk_shape, "yxles", n)
        assert analytic_estimate(desk_shape, "yxles", n).delta_idle_proc > 1
        tmap = exact_transfer_map(a, b)
        owned = tmap.counts.sum(axis=1)
        frac = tmap.sent_per_rank[owned > 0] / owned[owned > 0]
        assert np.all(frac >= np.maximum.accumulate(frac) - 0.1)
        quarter = len(frac) // 4
        assert frac[:quarter].mean() < frac[-quarter:].mean()
        assert np.all(frac[-10:] == 1.0)

    @settings(max_examples=60, deadline=None)
    @given(small_shapes(max_extent=4), layouts, st.sampled_from(TRANSFORMS),
           st.integers(1, 40), st.integers(1, 40), st.booleans())
    def test_conservation_and_symmetry(self, s, layout, transform, n_src, n_dst, unbalanced):
        t = Transform(transform)
        make = (lambda *a: unbalanced_plan(*a, max_imbalance=1.0)) if unbalanced else balanced_plan
        src = make(t.source, s, layout, n_src)
        dst = make(t.target, s, layout, n_dst)
        dom = shared_domain(t, s)
        tmap = exact_transfer_map(src, dst, t)
        assert np.array_equal(tmap.counts.sum(axis=1), shared_ownership(src, dom))
        assert np.array_equal(tmap.counts.sum(axis=0), shared_ownership(dst, dom))
        assert tmap.total_elements == dom.size
        back = exact_transfer_map(dst, src)
        assert np.array_equal(back.counts, tmap.counts.T)


class TestTransferMapMetrics:
    def test_counts(self):
        from unbalanced_decomp.redistribution import TransferMap
        tmap = TransferMap(np.array([[5, 2, 0], [0, 4, 1], [3, 0, 0]]), element_bytes=8)
        assert tmap.total_elements == 15
        assert tmap.off_diagonal_elements == 6
        assert tmap.message_count == 3
        assert tmap.bytes == 48
        assert tmap.sent_per_rank.tolist() == [2, 1, 3]
        assert tmap.max_send == 3
        assert list(tmap.nonzero_entries()) == [(0, 0, 5), (0, 1, 2), (1, 1, 4), (1, 2, 1),
                                                (2, 0, 3)]


class TestAnalyticEstimate:
    def test_zero_delta(self, recon_shape):
        est = analytic_estimate(recon_shape, "xyles", 1024)
        assert est.delta_idle_proc == 0 and est.total_trans_data == 0

    def test_delta_one(self):
        assert trans_data(Fraction(1), 1000) == 500

    @given(st.integers(1, 10**9))
    def test_continuity_at_one(self, total):
        assert trans_data(Fraction(1), total) == Fraction(total, 2)
        # the >1 branch evaluated at exactly 1
        assert (1 - Fraction(1, 2)) * total == Fraction(total, 2)

    @given(st.fractions(0, 50), st.fractions(0, 50))
    def test_monotone_and_bounded(self, a, b):
        lo, hi = sorted((a, b))
        assert 0 <= trans_data(lo, 100) <= trans_data(hi, 100) <= 100

    def test_reconstruction_yxles_1536(self, recon_shape):
        est = analytic_estimate(recon_shape, "yxles", 1536)
        delta = Fraction(512, 331)
        assert est.xxf_idle == delta and est.yxf_idle == 0
        assert est.delta_idle_proc == delta
        assert est.total_redist_data == 48 * 1_015_808
        assert est.total_trans_data == (1 - 1 / (2 * delta)) * 48 * 1_015_808
        assert math.isclose(float(est.delta_idle_proc), 1.5468, abs_tol=1e-4)


class TestCompareEstimate:
    def test_exact_split_small_values(self):
        s = GridShape(nakx=8, naky=8, inx=12, iny=12, nig=15, nlambda=4, negrid=2, nspec=2)
        cmp = compare_estimate(s, "xyles", 64)
        assert cmp.estimate.total_trans_data == 0
        assert cmp.oracle_off_diagonal / cmp.oracle_total <= 0.05
        assert cmp.relative_error == -1.0

    def test_uneven_case(self, desk_shape):
        cmp = compare_estimate(desk_shape, "yxles", 48)
        assert abs(cmp.relative_error) <= 0.25

    def test_rejects_g_transform(self, desk_shape):
        with pytest.raises(ValueError):
            compare_estimate(desk_shape, "xyles", 4, "g2xxf")

    def test_size_guard(self, recon_shape):
        with pytest.raises(SizeGuardError):
            compare_estimate(recon_shape, "xyles", 1536, size_guard=1000)
