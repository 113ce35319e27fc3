"""Rectangles, site configurations and Bernoulli sampling on the square lattice."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple

import numpy as np

SEED_RULE_ID = "seedseq-philox-v1"


@dataclass(frozen=True, order=True)
class Rectangle:
    """Axis-aligned box ``[(x_min, y_min), (x_max, y_max)]`` of lattice sites, inclusive."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not isinstance(v, (int, np.integer)):
                raise TypeError(f"rectangle coordinates must be integers, got {v!r}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"empty rectangle {self!r}")

    @classmethod
    def from_dims(cls, width: int, height: int, x0: int = 1, y0: int = 1) -> "Rectangle":
        """The ``width x height`` box with lower-left corner ``(x0, y0)``.

        ``Rectangle.from_dims(n, n)`` is the grid ``[n]^2 = {1..n}^2``.
        """
        return cls(x0, y0, x0 + width - 1, y0 + height - 1)

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def sh(self) -> int:
        return min(self.dims)

    @property
    def lg(self) -> int:
        return max(self.dims)

    @property
    def phi(self) -> int:
        """Semi-perimeter ``sh + lg``."""
        return self.width + self.height

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains_site(self, x: int, y: int) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def contains(self, other: "Rectangle") -> bool:
        return (self.x_min <= other.x_min and self.y_min <= other.y_min
                and other.x_max <= self.x_max and other.y_max <= self.y_max)

    def sites(self) -> Iterator[tuple[int, int]]:
        for x in range(self.x_min, self.x_max + 1):
            for y in range(self.y_min, self.y_max + 1):
                yield (x, y)

    def local(self, outer: "Rectangle") -> tuple[slice, slice]:
        """Array slices selecting this box inside a grid whose bounds are ``outer``."""
        return (slice(self.x_min - outer.x_min, self.x_max - outer.x_min + 1),
                slice(self.y_min - outer.y_min, self.y_max - outer.y_min + 1))

    def translate(self, dx: int, dy: int) -> "Rectangle":
        return Rectangle(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def sub_rectangles(self) -> Iterator["Rectangle"]:
        """Every non-empty sub-box, in lexicographic coordinate order."""
        for x0 in range(self.x_min, self.x_max + 1):
            for y0 in range(self.y_min, self.y_max + 1):
                for x1 in range(x0, self.x_max + 1):
                    for y1 in range(y0, self.y_max + 1):
                        yield Rectangle(x0, y0, x1, y1)

    def __str__(self):
        return f"[({self.x_min},{self.y_min}),({self.x_max},{self.y_max})]"


class RectMetrics(NamedTuple):
    dims: tuple[int, int]
    sh: int
    lg: int
    phi: int


def rect_metrics(R: Rectangle) -> RectMetrics:
    return RectMetrics(R.dims, R.sh, R.lg, R.phi)


class Configuration:
    """A set of infected sites inside a bounding rectangle.

    Stored as a read-only boolean grid with ``grid[x - x_min, y - y_min]``.
    """

    __slots__ = ("bounds", "grid")

    def __init__(self, bounds: Rectangle, grid=None):
        if grid is None:
            grid = np.zeros(bounds.dims, dtype=bool)
        grid = np.array(grid, dtype=bool, copy=True)
        if grid.shape != bounds.dims:
            raise ValueError(f"grid shape {grid.shape} does not match bounds dims {bounds.dims}")
        grid.flags.writeable = False
        self.bounds = bounds
        self.grid = grid

    @classmethod
    def from_sites(cls, bounds: Rectangle, sites: Iterable[tuple[int, int]]) -> "Configuration":
        grid = np.zeros(bounds.dims, dtype=bool)
        for x, y in sites:
            if not bounds.contains_site(x, y):
                raise ValueError(f"site {(x, y)} lies outside {bounds}")
            grid[x - bounds.x_min, y - bounds.y_min] = True
        return cls(bounds, grid)

    @classmethod
    def full(cls, bounds: Rectangle) -> "Configuration":
        return cls(bounds, np.ones(bounds.dims, dtype=bool))

    def sites(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.grid)
        return [(int(x) + self.bounds.x_min, int(y) + self.bounds.y_min) for x, y in zip(xs, ys)]

    def __len__(self):
        return int(self.grid.sum())

    def __contains__(self, site):
        x, y = site
        return self.bounds.contains_site(x, y) and bool(self.grid[x - self.bounds.x_min, y - self.bounds.y_min])

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.bounds == other.bounds and np.array_equal(self.grid, other.grid)

    def __hash__(self):
        return hash((self.bounds, self.grid.tobytes()))

    def __le__(self, other: "Configuration") -> bool:
        """Subset test (same bounds)."""
        if self.bounds != other.bounds:
            raise ValueError("configurations have different bounds")
        return bool(np.all(other.grid[self.grid]))

    def restrict(self, S: Rectangle) -> "Configuration":
        """``A ∩ S`` with bounds ``S``."""
        if not self.bounds.contains(S):
            raise ValueError(f"{S} is not inside {self.bounds}")
        return Configuration(S, self.grid[S.local(self.bounds)])

    def union(self, other: "Configuration") -> "Configuration":
        if self.bounds != other.bounds:
            raise ValueError("configurations have different bounds")
        return Configuration(self.bounds, self.grid | other.grid)

    def with_box(self, S: Rectangle) -> "Configuration":
        """This configuration with every site of ``S`` infected."""
        g = self.grid.copy()
        g[S.local(self.bounds)] = True
        return Configuration(self.bounds, g)

    @property
    def is_full(self) -> bool:
        return bool(self.grid.all())

    def __repr__(self):
        return f"Configuration({self.bounds}, |A|={len(self)})"


# -- sampling ---------------------------------------------------------------

def philox_key(seed: int, *spawn: int) -> np.ndarray:
    """Two-word Philox key derived from ``seed`` and an optional spawn path.

    ``philox_key(seed, i)`` is the per-trial key for trial ``i``; distinct
    spawn paths give statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**128 - 1), spawn_key=tuple(int(s) for s in spawn))
    return ss.generate_state(2, dtype=np.uint64)


def site_uniforms(dims: tuple[int, int], key: np.ndarray) -> np.ndarray:
    """Uniform variates, one per site, block ``x``-major; the i-th draw belongs to site index i."""
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(dims[0] * dims[1]).reshape(dims)


def sample_configuration(R: Rectangle, p: float, seed: int, *spawn: int) -> Configuration:
    """Each site of ``R`` infected independently with probability ``p``.

    Site ``(x, y)`` is decided by the draw at index ``(x - x_min) * height + (y - y_min)``
    of a Philox stream keyed by ``(seed, *spawn)``, so the result depends only
    on those inputs.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p == 0.0:
        return Configuration(R)
    if p == 1.0:
        return Configuration.full(R)
    return Configuration(R, site_uniforms(R.dims, philox_key(seed, *spawn)) < p)


# -- relative deficiency ------------------------------------------------------

class Deficiency(NamedTuple):
    d1: Fraction
    d2: Fraction

    @property
    def d(self) -> Fraction:
        return max(self.d1, self.d2)


def deficiency(S: Rectangle, R: Rectangle) -> Deficiency:
    """Relative side deficits ``(b_j - a_j) / b_j`` of ``S`` inside ``R``."""
    if not R.contains(S):
        raise ValueError(f"{S} is not contained in {R}")
    return dims_deficiency(S.dims, R.dims)


def dims_deficiency(s_dims, r_dims) -> Deficiency:
    (a1, a2), (b1, b2) = s_dims, r_dims
    if not (1 <= a1 <= b1 and 1 <= a2 <= b2):
        raise ValueError(f"dims {s_dims} do not nest in {r_dims}")
    return Deficiency(Fraction(b1 - a1, b1), Fraction(b2 - a2, b2))
