"""Uniform Cartesian voxel mesh over a box domain."""
from __future__ import annotations

from dataclasses import dataclass

from .model import BoxDomain

# Face offsets in (axis, direction) order; kept stable so event streams
# are reproducible for a fixed seed.
FACE_OFFSETS = (
    (-1, 0, 0), (1, 0, 0),
    (0, -1, 0), (0, 1, 0),
    (0, 0, -1), (0, 0, 1),
)


@dataclass(frozen=True)
class CartesianMesh:
    """A uniform cubic-voxel grid that exactly tiles a BoxDomain.

    Voxel geometry is implicit (never materialised per voxel), so large
    grids cost nothing to construct.
    """

    domain: BoxDomain
    dims: tuple[int, int, int]
    h: float

    @staticmethod
    def from_dims(domain: BoxDomain, dims: tuple[int, int, int]) -> "CartesianMesh":
        ext = domain.extent
        hs = [e / n for e, n in zip(ext, dims)]
        h = hs[0]
        for other in hs[1:]:
            if abs(other - h) > 1e-9 * h:
                raise ValueError(f"voxels must be cubes; got spacings {hs}")
        return CartesianMesh(domain, tuple(int(n) for n in dims), h)

    @staticmethod
    def from_h(domain: BoxDomain, h: float) -> "CartesianMesh":
        ext = domain.extent
        dims = []
        for e in ext:
            n = round(e / h)
            if n < 1 or abs(n * h - e) > 1e-9 * e:
                raise ValueError(f"box extent {e} is not an integer multiple of h={h}")
            dims.append(n)
        return CartesianMesh(domain, tuple(dims), h)

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def voxel_volume(self) -> float:
        return self.h ** 3

    def voxel_of(self, pos) -> tuple[int, int, int]:
        """Voxel containing a position; faces are lower-inclusive.

        Positions on the domain's upper boundary map into the last voxel.
        """
        out = []
        for x, lo, n in zip(pos, self.domain.lower, self.dims):
            i = int((x - lo) / self.h)
            out.append(min(max(i, 0), n - 1))
        return tuple(out)

    def voxel_center(self, voxel) -> tuple[float, float, float]:
        return tuple(lo + (i + 0.5) * self.h
                     for i, lo in zip(voxel, self.domain.lower))

    def voxel_lower(self, voxel) -> tuple[float, float, float]:
        return tuple(lo + i * self.h for i, lo in zip(voxel, self.domain.lower))

    def open_neighbors(self, voxel) -> list[tuple[int, int, int]]:
        """Adjacent voxels reachable by one jump (reflecting walls drop
        the outward channels)."""
        ix, iy, iz = voxel
        nx, ny, nz = self.dims
        out = []
        if ix > 0:
            out.append((ix - 1, iy, iz))
        if ix < nx - 1:
            out.append((ix + 1, iy, iz))
        if iy > 0:
            out.append((ix, iy - 1, iz))
        if iy < ny - 1:
            out.append((ix, iy + 1, iz))
        if iz > 0:
            out.append((ix, iy, iz - 1))
        if iz < nz - 1:
            out.append((ix, iy, iz + 1))
        return out


def jump_rate(D: float, h: float) -> float:
    """Diffusive jump rate per face neighbor: D / h^2."""
    if h <= 0:
        raise ValueError("h must be > 0")
    if D < 0:
        raise ValueError("D must be >= 0")
    return D / (h * h)
