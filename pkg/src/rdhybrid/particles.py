"""Shared particle container.

Both solvers operate on one particle list: lattice particles carry a
voxel index, off-lattice particles carry a continuous position, and the
hybrid loop flips the scale tag.  Count changes are appended to a log
so trajectories can be sampled event-exactly.
"""
from __future__ import annotations

import numpy as np

from .model import MESO, MICRO


class Particle:
    __slots__ = ("pid", "species", "scale", "voxel", "pos", "birth", "gen", "alive")

    def __init__(self, pid, species, scale, voxel, pos, birth):
        self.pid = pid
        self.species = species      # species index
        self.scale = scale          # MESO or MICRO
        self.voxel = voxel          # (ix, iy, iz) or None
        self.pos = pos              # np.ndarray(3) or None
        self.birth = birth
        self.gen = 0                # bumped on moves and death
        self.alive = True

    def __repr__(self):
        where = self.voxel if self.scale == MESO else self.pos
        return f"<P{self.pid} s{self.species} {self.scale} @ {where}>"


class ParticleStore:
    """Owns particles, live species counts, and the event log."""

    def __init__(self, n_species: int):
        self.n_species = n_species
        self.particles: dict[int, Particle] = {}
        self.counts = np.zeros(n_species, dtype=np.int64)
        self.log: list[tuple[float, int, int]] = []   # (time, species, delta)
        self._next = 0

    def create(self, species: int, scale: str, t: float, *, voxel=None, pos=None) -> Particle:
        p = Particle(self._next, species, scale, voxel, pos, t)
        self._next += 1
        self.particles[p.pid] = p
        self.counts[species] += 1
        self.log.append((t, species, 1))
        return p

    def remove(self, p: Particle, t: float) -> None:
        if not p.alive:
            raise RuntimeError(f"double removal of {p!r}")
        p.alive = False
        p.gen += 1
        del self.particles[p.pid]
        self.counts[p.species] -= 1
        self.log.append((t, p.species, -1))

    def live(self) -> list[Particle]:
        return list(self.particles.values())

    def live_scale(self, scale: str) -> list[Particle]:
        return [p for p in self.particles.values() if p.scale == scale]

    @property
    def total(self) -> int:
        return len(self.particles)


def sample_counts(counts0: np.ndarray, log, sample_times) -> np.ndarray:
    """Species counts at each sample time from an initial state and a
    time-sorted (or sortable) event log.

    Returns an array of shape (n_species, n_times).
    """
    times = list(sample_times)
    out = np.empty((len(counts0), len(times)), dtype=np.int64)
    counts = np.asarray(counts0, dtype=np.int64).copy()
    entries = sorted(log, key=lambda e: e[0])
    j = 0
    for k, t in enumerate(times):
        while j < len(entries) and entries[j][0] <= t:
            _, s, d = entries[j]
            counts[s] += d
            j += 1
        out[:, k] = counts
    return out
