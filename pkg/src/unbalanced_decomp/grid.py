"""Grid extents, layouts and compound-index flattening.

The simulation domain has seven indices: ``x``, ``y`` (Fourier modes),
``ig`` (parallel coordinate), ``isgn`` (sign of parallel velocity),
``l`` (pitch angle), ``e`` (energy) and ``s`` (species).  Each of the three
index spaces keeps some of them local to a rank and flattens the rest into
a single compound index that is split across ranks in contiguous blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

DIMS = ("x", "y", "ig", "isgn", "l", "e", "s")


class Layout(str, Enum):
    """Admissible orderings of ``x, y, l, e, s``; leftmost varies fastest."""

    XYLES = "xyles"
    YXLES = "yxles"
    LYXES = "lyxes"
    YXELS = "yxels"
    LXYES = "lxyes"
    LEXYS = "lexys"

    @classmethod
    def parse(cls, token: "str | Layout") -> "Layout":
        if isinstance(token, Layout):
            return token
        try:
            return cls(str(token).lower())
        except ValueError:
            allowed = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown layout {token!r}; expected one of: {allowed}") from None

    @property
    def velocity_order(self) -> tuple[str, ...]:
        """``l``, ``e``, ``s`` in the relative order they take in the layout."""
        return tuple(c for c in self.value if c in "les")


class Space(str, Enum):
    G = "g_lo"
    XXF = "xxf_lo"
    YXF = "yxf_lo"

    @classmethod
    def parse(cls, token: "str | Space") -> "Space":
        if isinstance(token, Space):
            return token
        try:
            return cls(str(token).lower())
        except ValueError:
            allowed = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown space {token!r}; expected one of: {allowed}") from None


def dealiased_full_extent(n: int) -> int:
    """Full (padded) FFT extent for ``n`` retained modes: ceil(3n/2)."""
    return -(-3 * n // 2)


@dataclass(frozen=True)
class GridShape:
    nakx: int
    naky: int
    inx: int
    iny: int
    nig: int
    nlambda: int
    negrid: int
    nspec: int
    nsign: int = 2
    element_bytes: int = 16

    def __post_init__(self):
        for name in ("nakx", "naky", "inx", "iny", "nig", "nlambda", "negrid", "nspec",
                     "element_bytes"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.nsign != 2:
            raise ValueError(f"nsign must be 2, got {self.nsign!r}")
        if self.nig % 2 == 0:
            raise ValueError(f"nig must be odd, got {self.nig}")
        if self.inx < self.nakx:
            raise ValueError(f"inx ({self.inx}) must be >= nakx ({self.nakx})")
        if self.iny < self.naky:
            raise ValueError(f"iny ({self.iny}) must be >= naky ({self.naky})")

    @classmethod
    def from_dealiased(cls, nakx: int, naky: int, nig: int, nlambda: int, negrid: int,
                       nspec: int, inx: int | None = None, iny: int | None = None,
                       element_bytes: int = 16) -> "GridShape":
        """Build a shape, deriving missing full extents as ceil(3n/2)."""
        return cls(nakx=nakx, naky=naky,
                   inx=dealiased_full_extent(nakx) if inx is None else inx,
                   iny=dealiased_full_extent(naky) if iny is None else iny,
                   nig=nig, nlambda=nlambda, negrid=negrid, nspec=nspec,
                   element_bytes=element_bytes)

    @property
    def velocity_extents(self) -> dict[str, int]:
        return {"l": self.nlambda, "e": self.negrid, "s": self.nspec}


@dataclass(frozen=True)
class GlobalCoordinate:
    x: int = 0
    y: int = 0
    ig: int = 0
    isgn: int = 0
    l: int = 0  # noqa: E741
    e: int = 0
    s: int = 0

    def as_dict(self) -> dict[str, int]:
        return {d: getattr(self, d) for d in DIMS}


@dataclass(frozen=True)
class SpaceGeometry:
    """Compound dimensions (fastest first) and local dimensions of one space."""

    space: Space
    compound: tuple[tuple[str, int], ...]
    local: tuple[tuple[str, int], ...]
    strides: Mapping[str, int] = field(repr=False)

    @property
    def total_size(self) -> int:
        return math.prod(n for _, n in self.compound)

    @property
    def local_size(self) -> int:
        return math.prod(n for _, n in self.local)

    @property
    def extents(self) -> dict[str, int]:
        return dict(self.compound + self.local)

    @property
    def compound_names(self) -> tuple[str, ...]:
        return tuple(d for d, _ in self.compound)

    @property
    def slowest_first(self) -> tuple[tuple[str, int], ...]:
        return self.compound[::-1]


def geometry(space: "Space | str", shape: GridShape, layout: "Layout | str") -> SpaceGeometry:
    space = Space.parse(space)
    layout = Layout.parse(layout)
    vel = shape.velocity_extents
    if space is Space.G:
        ext = {"x": shape.nakx, "y": shape.naky, **vel}
        compound = tuple((c, ext[c]) for c in layout.value)
        local = (("ig", shape.nig), ("isgn", shape.nsign))
    else:
        tail = tuple((c, vel[c]) for c in layout.velocity_order)
        if space is Space.XXF:
            compound = (("y", shape.naky), ("ig", shape.nig), ("isgn", shape.nsign)) + tail
            local = (("x", shape.inx),)
        else:
            compound = (("x", shape.inx), ("ig", shape.nig), ("isgn", shape.nsign)) + tail
            local = (("y", shape.iny),)
    strides = {}
    stride = 1
    for name, n in compound:
        strides[name] = stride
        stride *= n
    return SpaceGeometry(space, compound, local, strides)


def total_size(space, shape: GridShape, layout) -> int:
    """Number of compound cells of ``space`` (local dimensions excluded)."""
    return geometry(space, shape, layout).total_size


def compound_index(space, shape: GridShape, layout, coord: GlobalCoordinate) -> int:
    geo = geometry(space, shape, layout)
    flat = 0
    for name, n in geo.compound:
        value = getattr(coord, name)
        if not 0 <= value < n:
            raise IndexError(f"{name}={value} out of range [0, {n}) in {geo.space.value}")
        flat += value * geo.strides[name]
    return flat


def coordinate_of(space, shape: GridShape, layout, flat: int) -> GlobalCoordinate:
    """Inverse of :func:`compound_index`; local dimensions are returned as 0."""
    geo = geometry(space, shape, layout)
    if not 0 <= flat < geo.total_size:
        raise IndexError(f"flat index {flat} out of range [0, {geo.total_size})")
    values = {}
    for name, n in geo.compound:
        flat, values[name] = divmod(flat, n)
    return GlobalCoordinate(**values)


def compound_index_array(geo: SpaceGeometry, coords: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorised flattening; ``coords`` must hold every compound dimension."""
    flat = None
    for name, _ in geo.compound:
        term = np.asarray(coords[name], dtype=np.int64) * geo.strides[name]
        flat = term if flat is None else flat + term
    return flat


def coordinates_array(geo: SpaceGeometry, flat: np.ndarray) -> dict[str, np.ndarray]:
    dims = [n for _, n in geo.compound]
    parts = np.unravel_index(np.asarray(flat, dtype=np.int64), dims[::-1])
    return {name: part for (name, _), part in zip(geo.compound[::-1], parts)}
