"""Lattice geometry: site indexing and nearest-neighbor tables.

Sites of a 1D/2D/3D rectangular lattice are enumerated in row-major order
(last axis fastest), so ``site_index`` / ``site_coords`` are inverse
bijections against ``numpy.ravel_multi_index`` conventions.  Neighbor tables
are undirected and deduplicated: site k never lists itself, and j in
neighbors[i] implies i in neighbors[j].

Design notes:
  * periodic wrap with an extent of 2 would make the +1 and -1 neighbors the
    same site (a duplicated bond) and an extent of 1 a self-loop, so periodic
    extents below 3 are rejected outright;
  * ``n_nn`` is the bulk coordination number 2*dims used by the empirical
    variance and ergodization-time formulas; for open boundaries edge sites
    have fewer neighbors than n_nn.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

BOUNDARIES = ("periodic", "open")


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of a rectangular lattice.

    dims: 1, 2 or 3.
    extents: sites along each axis, one entry per dimension.
    boundary: "periodic" (default) or "open".
    """

    dims: int
    extents: tuple[int, ...]
    boundary: str = "periodic"

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise ValueError(f"dims must be 1, 2 or 3, got {self.dims}")
        ext = tuple(int(e) for e in self.extents)
        object.__setattr__(self, "extents", ext)
        if len(ext) != self.dims:
            raise ValueError(
                f"extents {ext} must have exactly dims={self.dims} entries"
            )
        if any(e < 1 for e in ext):
            raise ValueError(f"extents must be positive, got {ext}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(
                f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}"
            )
        if self.boundary == "periodic" and any(e < 3 for e in ext):
            raise ValueError(
                f"periodic extents must be >= 3 to avoid self-loops and "
                f"duplicate bonds, got {ext}"
            )

    @property
    def n_sites(self) -> int:
        n = 1
        for e in self.extents:
            n *= e
        return n

    def site_index(self, coords) -> int:
        """Row-major site index (last axis fastest) of a coordinate tuple."""
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.dims:
            raise ValueError(f"coords {coords} must have {self.dims} entries")
        for c, e in zip(coords, self.extents):
            if not 0 <= c < e:
                raise ValueError(f"coords {coords} out of range for {self.extents}")
        idx = 0
        for c, e in zip(coords, self.extents):
            idx = idx * e + c
        return idx

    def site_coords(self, index: int) -> tuple[int, ...]:
        """Inverse of site_index."""
        if not 0 <= index < self.n_sites:
            raise ValueError(f"site index {index} out of range 0..{self.n_sites - 1}")
        coords = []
        for e in reversed(self.extents):
            coords.append(index % e)
            index //= e
        return tuple(reversed(coords))


@dataclass(frozen=True)
class NeighborTable:
    """Nearest-neighbor adjacency of a lattice.

    neighbors[i] is a sorted tuple of the sites adjacent to i.  n_nn is the
    bulk coordination number 2*dims (every site's degree on a periodic
    lattice).
    """

    spec: LatticeSpec
    neighbors: tuple[tuple[int, ...], ...]
    n_nn: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_nn", 2 * self.spec.dims)

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    @property
    def n_bonds(self) -> int:
        return sum(len(nb) for nb in self.neighbors) // 2

    def adjacency_matrix(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix (float64)."""
        n = self.n_sites
        a = np.zeros((n, n))
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                a[i, j] = 1.0
        return a

    def neighbor_array(self) -> tuple[np.ndarray, int]:
        """Padded (n_sites, max_degree) int index array for vectorized
        neighbor sums.  Missing entries point at a phantom site ``n_sites``
        whose amplitude callers must keep at zero; returns (array, pad_index).
        """
        n = self.n_sites
        max_deg = max((len(nb) for nb in self.neighbors), default=0)
        arr = np.full((n, max_deg), n, dtype=np.intp)
        for i, nbrs in enumerate(self.neighbors):
            arr[i, : len(nbrs)] = nbrs
        return arr, n


def build_neighbor_table(spec: LatticeSpec) -> NeighborTable:
    """Enumerate nearest-neighbor bonds of the lattice.

    For each axis the +1/-1 shifted sites are linked, wrapping when periodic
    and dropping out-of-range partners when open.
    """
    nbrs: list[set[int]] = [set() for _ in range(spec.n_sites)]
    for coords in itertools.product(*(range(e) for e in spec.extents)):
        i = spec.site_index(coords)
        for axis in range(spec.dims):
            for shift in (-1, +1):
                c = list(coords)
                c[axis] += shift
                if spec.boundary == "periodic":
                    c[axis] %= spec.extents[axis]
                elif not 0 <= c[axis] < spec.extents[axis]:
                    continue
                j = spec.site_index(c)
                if j == i:
                    continue
                nbrs[i].add(j)
                nbrs[j].add(i)
    return NeighborTable(
        spec=spec, neighbors=tuple(tuple(sorted(s)) for s in nbrs)
    )
