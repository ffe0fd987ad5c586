"""Balanced and unbalanced block decompositions of a compound index space."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

import numpy as np

from .grid import GridShape, Layout, Space, geometry

DEFAULT_MAX_IMBALANCE = 0.25


class PlanKind(str, Enum):
    BALANCED = "balanced"
    UNBALANCED = "unbalanced"
    FALLBACK = "unbalanced-fallback-to-balanced"


@dataclass(frozen=True, eq=False)
class DecompositionPlan:
    """Contiguous per-rank ranges of a flattened compound index space.

    Rank ``r`` owns ``[offsets[r], offsets[r + 1])``.
    """

    space: Space
    shape: GridShape
    layout: Layout
    nprocs: int
    offsets: np.ndarray
    kind: PlanKind
    small_block: int
    large_block: int
    unit: int = 1
    degenerate: bool = False

    @property
    def total_size(self) -> int:
        return int(self.offsets[-1])

    @property
    def ranges(self) -> list[tuple[int, int]]:
        o = self.offsets.tolist()
        return list(zip(o[:-1], o[1:]))

    @property
    def extents(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def empty_ranks(self) -> int:
        return int(np.count_nonzero(self.extents == 0))

    @property
    def imbalance(self) -> Fraction:
        if self.small_block == 0:
            return Fraction(0)
        return Fraction(self.large_block - self.small_block, self.small_block)

    def owner(self, flat) -> np.ndarray:
        """Rank owning each flat compound index."""
        return np.searchsorted(self.offsets, flat, side="right") - 1

    def same_ranges(self, other: "DecompositionPlan") -> bool:
        return np.array_equal(self.offsets, other.offsets)


def balanced_blocksize(total: int, nprocs: int) -> int:
    if total < 1 or nprocs < 1:
        raise ValueError("total and nprocs must be positive")
    return (total - 1) // nprocs + 1


def _offsets(extents) -> np.ndarray:
    offsets = np.zeros(len(extents) + 1, dtype=np.int64)
    np.cumsum(extents, out=offsets[1:])
    offsets.setflags(write=False)
    return offsets


def balanced_plan(space, shape: GridShape, layout, nprocs: int) -> DecompositionPlan:
    if nprocs < 1:
        raise ValueError(f"nprocs must be >= 1, got {nprocs}")
    geo = geometry(space, shape, layout)
    total = geo.total_size
    block = balanced_blocksize(total, nprocs)
    starts = np.minimum(np.arange(nprocs + 1, dtype=np.int64) * block, total)
    starts.setflags(write=False)
    return DecompositionPlan(geo.space, shape, Layout.parse(layout), nprocs, starts,
                             PlanKind.BALANCED, block, block)


def _threshold(value) -> "Fraction | float":
    # decimal reading, so a threshold of 0.3 admits an imbalance of exactly 3/10
    if isinstance(value, Fraction) or math.isinf(value):
        return value
    return Fraction(repr(float(value)))


def unbalanced_plan(space, shape: GridShape, layout, nprocs: int,
                    max_imbalance: float = DEFAULT_MAX_IMBALANCE) -> DecompositionPlan:
    """Two-blocksize plan that never splits the intact fast-dimension unit.

    The slowest compound dimensions are divided out of ``nprocs`` while the
    division stays exact, giving identical rank groups. Inside each group the
    next dimension (merged with faster ones until it has at least as many
    entries as the group has ranks) is shared out as evenly as possible,
    larger shares going to the lower ranks. Falls back to the balanced plan
    when the resulting imbalance exceeds ``max_imbalance``.
    """
    if nprocs < 1:
        raise ValueError(f"nprocs must be >= 1, got {nprocs}")
    if max_imbalance < 0:
        raise ValueError(f"max_imbalance must be >= 0, got {max_imbalance}")
    geo = geometry(space, shape, layout)
    balanced = balanced_plan(geo.space, shape, layout, nprocs)
    fallback = replace(balanced, kind=PlanKind.FALLBACK)
    total = geo.total_size
    if nprocs > total:
        return replace(fallback, degenerate=True)

    extents = [n for _, n in geo.slowest_first]
    remaining = nprocs
    k = 0
    while k < len(extents) and remaining % extents[k] == 0:
        remaining //= extents[k]
        k += 1
    if k == len(extents):
        return fallback

    per_group = remaining
    groups = nprocs // per_group
    merged = extents[k]
    j = k + 1
    while merged < per_group and j < len(extents):
        merged *= extents[j]
        j += 1
    unit = math.prod(extents[j:])
    q, r = divmod(merged, per_group)
    small = q * unit
    large = (q + 1) * unit if r else small
    if Fraction(large - small, small) > _threshold(max_imbalance):
        return fallback

    group_units = [q + 1] * r + [q] * (per_group - r)
    extents_per_rank = np.tile(np.asarray(group_units, dtype=np.int64) * unit, groups)
    return DecompositionPlan(geo.space, shape, Layout.parse(layout), nprocs,
                             _offsets(extents_per_rank), PlanKind.UNBALANCED,
                             small, large, unit=unit)


def make_plan(space, shape: GridShape, layout, nprocs: int, unbalanced: bool = False,
              max_imbalance: float = DEFAULT_MAX_IMBALANCE) -> DecompositionPlan:
    if unbalanced:
        return unbalanced_plan(space, shape, layout, nprocs, max_imbalance)
    return balanced_plan(space, shape, layout, nprocs)


@dataclass(frozen=True)
class IdleReport:
    used_procs: Fraction
    idle_procs: Fraction
    blocksize: int


def idle_report(space, shape: GridShape, layout, nprocs: int) -> IdleReport:
    """Used and idle process counts of the balanced plan, as exact fractions."""
    total = geometry(space, shape, layout).total_size
    block = balanced_blocksize(total, nprocs)
    used = Fraction(total, block)
    return IdleReport(used, nprocs - used, block)


@dataclass(frozen=True)
class SweetSpots:
    g_lo: tuple[int, ...]
    xxf_lo: tuple[int, ...]
    yxf_lo: tuple[int, ...]
    # rank counts that completely split the slowest g_lo dimensions
    prefix_products: tuple[int, ...]

    def for_space(self, space) -> tuple[int, ...]:
        return getattr(self, Space.parse(space).name.lower() + "_lo")

    def common(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.g_lo) & set(self.xxf_lo) & set(self.yxf_lo)))

    def is_prefix_product(self, p: int) -> bool:
        return p in self.prefix_products


def divisors_upto(n: int, limit: int) -> tuple[int, ...]:
    small, large = [], []
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return tuple(d for d in small + large[::-1] if d <= limit)


def sweetspots(shape: GridShape, layout, max_procs: int) -> SweetSpots:
    """Process counts up to ``max_procs`` that divide each space exactly."""
    if max_procs < 1:
        raise ValueError(f"max_procs must be >= 1, got {max_procs}")
    lists = {sp: divisors_upto(geometry(sp, shape, layout).total_size, max_procs)
             for sp in Space}
    prefix = []
    running = 1
    for _, n in geometry(Space.G, shape, layout).slowest_first:
        running *= n
        if running > max_procs:
            break
        if n > 1:
            prefix.append(running)
    return SweetSpots(lists[Space.G], lists[Space.XXF], lists[Space.YXF], tuple(prefix))
