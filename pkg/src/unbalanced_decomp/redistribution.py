"""Exact and estimated data movement between two decompositions.

The exact route enumerates every element of the logical domain that both
spaces store (dealiasing padding is generated locally and never moved),
resolves its owner in each plan and accumulates a source x destination count
matrix. The analytic route predicts the off-diagonal volume of the
``xxf_lo <-> yxf_lo`` transpose from the idle-process counts alone.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .decomposition import DecompositionPlan, balanced_plan, idle_report
from .grid import DIMS, GridShape, Space, geometry, total_size

DEFAULT_SIZE_GUARD = 10**8
DEFAULT_CHUNK = 1 << 21


class SizeGuardError(ValueError):
    """The exhaustive oracle would enumerate more cells than allowed."""


class Transform(str, Enum):
    G2XXF = "g2xxf"
    XXF2G = "xxf2g"
    XXF2YXF = "xxf2yxf"
    YXF2XXF = "yxf2xxf"

    @property
    def source(self) -> Space:
        return _ENDPOINTS[self][0]

    @property
    def target(self) -> Space:
        return _ENDPOINTS[self][1]

    @classmethod
    def parse(cls, token) -> "Transform":
        if isinstance(token, Transform):
            return token
        try:
            return cls(str(token).lower())
        except ValueError:
            allowed = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown transform {token!r}; expected one of: {allowed}") from None


_ENDPOINTS = {
    Transform.G2XXF: (Space.G, Space.XXF),
    Transform.XXF2G: (Space.XXF, Space.G),
    Transform.XXF2YXF: (Space.XXF, Space.YXF),
    Transform.YXF2XXF: (Space.YXF, Space.XXF),
}


def _space_extents(space: Space, shape: GridShape) -> dict[str, int]:
    # layout only permutes the compound order, extents do not depend on it
    return geometry(space, shape, "xyles").extents


@dataclass(frozen=True)
class SharedDomain:
    """Box of coordinates stored by both endpoint spaces."""

    extents: dict[str, int]

    @property
    def size(self) -> int:
        return math.prod(self.extents.values())

    def contains(self, coords: dict) -> np.ndarray:
        inside = None
        for d, n in self.extents.items():
            if d in coords:
                ok = np.asarray(coords[d]) < n
                inside = ok if inside is None else inside & ok
        return inside


def shared_domain(transform, shape: GridShape) -> SharedDomain:
    transform = Transform.parse(transform)
    return shared_domain_between(transform.source, transform.target, shape)


def shared_domain_between(src, dst, shape: GridShape) -> SharedDomain:
    a = _space_extents(Space.parse(src), shape)
    b = _space_extents(Space.parse(dst), shape)
    return SharedDomain({d: min(a[d], b[d]) for d in DIMS})


@dataclass(frozen=True, eq=False)
class TransferMap:
    """Element counts moved from each source rank to each destination rank."""

    counts: np.ndarray
    element_bytes: int = 16

    @property
    def nprocs_src(self) -> int:
        return self.counts.shape[0]

    @property
    def nprocs_dst(self) -> int:
        return self.counts.shape[1]

    @property
    def total_elements(self) -> int:
        return int(self.counts.sum())

    @property
    def diagonal_elements(self) -> int:
        return int(np.trace(self.counts))

    @property
    def off_diagonal_elements(self) -> int:
        return self.total_elements - self.diagonal_elements

    @property
    def message_count(self) -> int:
        off = self.counts.copy()
        n = min(off.shape)
        off[np.arange(n), np.arange(n)] = 0
        return int(np.count_nonzero(off))

    @property
    def bytes(self) -> int:
        """Bytes that leave their rank."""
        return self.off_diagonal_elements * self.element_bytes

    @property
    def diagonal_fraction(self) -> float:
        total = self.total_elements
        return self.diagonal_elements / total if total else 1.0

    @property
    def sent_per_rank(self) -> np.ndarray:
        kept = np.zeros(self.nprocs_src, dtype=np.int64)
        n = min(self.counts.shape)
        kept[:n] = np.diagonal(self.counts)[:n]
        return self.counts.sum(axis=1) - kept

    @property
    def max_send(self) -> int:
        return int(self.sent_per_rank.max(initial=0))

    def nonzero_entries(self):
        """Yield ``(src, dst, elements)`` for every nonzero entry, row-major."""
        for src, dst in zip(*np.nonzero(self.counts)):
            yield int(src), int(dst), int(self.counts[src, dst])


def _check_plans(plan_src: DecompositionPlan, plan_dst: DecompositionPlan, transform):
    if plan_src.shape != plan_dst.shape:
        raise ValueError("plans were built over different grid shapes")
    if plan_src.layout is not plan_dst.layout:
        raise ValueError(f"plans use different layouts ({plan_src.layout.value} vs "
                         f"{plan_dst.layout.value})")
    if transform is not None:
        transform = Transform.parse(transform)
        if (plan_src.space, plan_dst.space) != (transform.source, transform.target):
            raise ValueError(f"transform {transform.value} needs {transform.source.value} -> "
                             f"{transform.target.value} plans, got {plan_src.space.value} -> "
                             f"{plan_dst.space.value}")


def exact_transfer_map(plan_src: DecompositionPlan, plan_dst: DecompositionPlan,
                       transform=None, *, size_guard: int = DEFAULT_SIZE_GUARD,
                       chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> TransferMap:
    """Brute-force transfer matrix between two plans.

    Only dimensions that are compound in at least one of the two spaces are
    enumerated; ownership is constant along the rest, whose shared extent
    multiplies each count.
    """
    _check_plans(plan_src, plan_dst, transform)
    shape = plan_src.shape
    geo_s = geometry(plan_src.space, shape, plan_src.layout)
    geo_d = geometry(plan_dst.space, shape, plan_dst.layout)
    dom = shared_domain_between(plan_src.space, plan_dst.space, shape)

    relevant = [d for d in DIMS if d in geo_s.strides or d in geo_d.strides]
    box = [dom.extents[d] for d in relevant]
    multiplier = math.prod(dom.extents[d] for d in DIMS if d not in relevant)
    ncells = math.prod(box)
    if ncells > size_guard:
        raise SizeGuardError(f"oracle would enumerate {ncells} cells, above the size guard "
                             f"of {size_guard} (raise it with --size-guard)")

    stride_s = np.array([geo_s.strides.get(d, 0) for d in relevant], dtype=np.int64)
    stride_d = np.array([geo_d.strides.get(d, 0) for d in relevant], dtype=np.int64)
    nsrc, ndst = plan_src.nprocs, plan_dst.nprocs

    def accumulate(bounds):
        lo, hi = bounds
        idx = np.unravel_index(np.arange(lo, hi, dtype=np.int64), box)
        flat_s = sum(i * st for i, st in zip(idx, stride_s))
        flat_d = sum(i * st for i, st in zip(idx, stride_d))
        pair = plan_src.owner(flat_s) * ndst + plan_dst.owner(flat_d)
        return np.bincount(pair, minlength=nsrc * ndst)

    chunks = [(lo, min(lo + chunk_size, ncells)) for lo in range(0, ncells, chunk_size)]
    counts = np.zeros(nsrc * ndst, dtype=np.int64)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(accumulate, chunks):
                counts += part
    else:
        for c in chunks:
            counts += accumulate(c)
    counts *= multiplier
    return TransferMap(counts.reshape(nsrc, ndst), shape.element_bytes)


def shared_ownership(plan: DecompositionPlan, domain: SharedDomain) -> np.ndarray:
    """Shared-domain elements held by each rank, counted over the plan's own space."""
    geo = geometry(plan.space, plan.shape, plan.layout)
    local = math.prod(min(n, domain.extents[d]) for d, n in geo.local)
    flat = np.arange(geo.total_size, dtype=np.int64)
    coords = dict(zip([d for d, _ in geo.compound[::-1]],
                      np.unravel_index(flat, [n for _, n in geo.compound[::-1]])))
    inside = domain.contains(coords)
    owners = plan.owner(flat[inside])
    return np.bincount(owners, minlength=plan.nprocs) * local


@dataclass(frozen=True)
class TransferEstimate:
    xxf_idle: Fraction
    yxf_idle: Fraction
    delta_idle_proc: Fraction
    total_redist_data: int
    total_trans_data: Fraction

    @property
    def transferred_fraction(self) -> Fraction:
        return self.total_trans_data / self.total_redist_data


def trans_data(delta: Fraction, total_redist: int) -> Fraction:
    """Predicted elements moved for a given idle-count difference."""
    delta = Fraction(delta)
    if delta <= 1:
        return delta / 2 * total_redist
    return (1 - 1 / (2 * delta)) * total_redist


def analytic_estimate(shape: GridShape, layout, nprocs: int) -> TransferEstimate:
    xxf = idle_report(Space.XXF, shape, layout, nprocs).idle_procs
    yxf = idle_report(Space.YXF, shape, layout, nprocs).idle_procs
    delta = abs(yxf - xxf)
    redist = shape.inx * total_size(Space.XXF, shape, layout)
    return TransferEstimate(xxf, yxf, delta, redist, trans_data(delta, redist))


@dataclass(frozen=True)
class EstimateComparison:
    estimate: TransferEstimate
    oracle_off_diagonal: int
    oracle_total: int

    @property
    def relative_error(self) -> float:
        """(estimate - oracle) / oracle; infinite when only the oracle is zero."""
        est = self.estimate.total_trans_data
        if self.oracle_off_diagonal == 0:
            return 0.0 if est == 0 else math.inf
        return float((est - self.oracle_off_diagonal) / self.oracle_off_diagonal)


def compare_estimate(shape: GridShape, layout, nprocs: int, transform=Transform.XXF2YXF, *,
                     size_guard: int = DEFAULT_SIZE_GUARD, workers: int = 1
                     ) -> EstimateComparison:
    """Analytic estimate against the oracle for balanced plans on both sides."""
    transform = Transform.parse(transform)
    if {transform.source, transform.target} != {Space.XXF, Space.YXF}:
        raise ValueError("the analytic estimate only covers xxf2yxf / yxf2xxf")
    src = balanced_plan(transform.source, shape, layout, nprocs)
    dst = balanced_plan(transform.target, shape, layout, nprocs)
    tmap = exact_transfer_map(src, dst, transform, size_guard=size_guard, workers=workers)
    return EstimateComparison(analytic_estimate(shape, layout, nprocs),
                              tmap.off_diagonal_elements, tmap.total_elements)
