"""Particle-keyed event-driven lattice solver.

Every mobile particle owns its next jump event; every co-located
reactive pair owns a tentative reaction event; unimolecular channels
run on per-particle exponential clocks.  Events live in one binary heap
and are invalidated lazily: each entry carries the generation stamps of
its participants and is discarded on pop if any stamp is stale.
"""
from __future__ import annotations

import heapq
import math

from .mesh import CartesianMesh
from .model import MESO, ReactionNetwork
from .particles import Particle, ParticleStore
from .rates import RateTable

_DIFF, _UNI, _PAIR = 0, 1, 2


class NpmTables:
    """Static per-species rate tables for one mesh resolution."""

    def __init__(self, network: ReactionNetwork, rate_table: RateTable):
        self.jump = rate_table.jump_rates
        n = network.n_species
        # unimolecular: per species, list of (rate, product indices)
        self.uni: list[list[tuple[float, tuple[int, ...]]]] = [[] for _ in range(n)]
        for _, r in network.unimolecular_reactions():
            s = network.species_index(r.reactants[0])
            prods = tuple(network.species_index(p) for p in r.products)
            self.uni[s].append((r.rate, prods))
        # bimolecular: per species, list of (partner species, k_meso, products)
        self.pair_by_species: list[list[tuple[int, float, tuple[int, ...]]]] = [[] for _ in range(n)]
        for ch in rate_table.channels:
            r = network.reactions[ch.reaction_index]
            sa, sb = (network.species_index(x) for x in r.reactants)
            prods = tuple(network.species_index(p) for p in r.products)
            self.pair_by_species[sa].append((sb, ch.k_meso, prods))
            if sa != sb:
                self.pair_by_species[sb].append((sa, ch.k_meso, prods))


class NextParticleSolver:
    """Event loop over the lattice subset of a ParticleStore.

    The solver only reads and mutates particles whose scale tag is
    ``meso``; everything else is invisible to it, which is what the
    hybrid loop's frozen-subset semantics require.
    """

    def __init__(self, tables: NpmTables, mesh: CartesianMesh, store: ParticleStore, rng):
        self.tables = tables
        self.mesh = mesh
        self.store = store
        self.rng = rng
        self.heap: list = []
        self.occupancy: dict[tuple, list[Particle]] = {}
        self.time = 0.0
        self._seq = 0
        self.executed_events = 0

    # ── scheduling ──────────────────────────────────────────────────

    def _push(self, t, kind, a, ga, b, gb, aux):
        self._seq += 1
        heapq.heappush(self.heap, (t, self._seq, kind, a, ga, b, gb, aux))

    def _schedule_motion(self, p: Particle, now: float):
        d = self.tables.jump[p.species]
        if d <= 0.0:
            return
        neighbors = self.mesh.open_neighbors(p.voxel)
        rate = d * len(neighbors)
        if rate <= 0.0:
            return
        t = now + self.rng.exponential(1.0 / rate)
        dest = neighbors[int(self.rng.integers(len(neighbors)))]
        self._push(t, _DIFF, p, p.gen, None, 0, dest)

    def _schedule_uni(self, p: Particle, now: float):
        # Unimolecular clocks are tied to the particle's life, not its
        # position; they survive jumps (validity checked via p.alive).
        for rate, prods in self.tables.uni[p.species]:
            t = now + self.rng.exponential(1.0 / rate)
            self._push(t, _UNI, p, 0, None, 0, prods)

    def _schedule_pairs(self, p: Particle, now: float):
        """Tentative reaction events between p and the reactive partners
        already occupying its voxel."""
        for sb, k_meso, prods in self.tables.pair_by_species[p.species]:
            partners = self.occupancy.get((p.voxel, sb))
            if not partners:
                continue
            for q in partners:
                if q is p:
                    continue
                t = now + self.rng.exponential(1.0 / k_meso)
                self._push(t, _PAIR, p, p.gen, q, q.gen, prods)

    def _occ_add(self, p: Particle):
        self.occupancy.setdefault((p.voxel, p.species), []).append(p)

    def _occ_remove(self, p: Particle):
        key = (p.voxel, p.species)
        lst = self.occupancy[key]
        lst.remove(p)
        if not lst:
            del self.occupancy[key]

    # ── lifecycle ───────────────────────────────────────────────────

    def load(self, t0: float):
        """(Re)build occupancy and the event heap from the store's
        current lattice particles."""
        self.heap.clear()
        self.occupancy.clear()
        self.time = t0
        self._seq = 0
        for p in self.store.particles.values():
            if p.scale == MESO:
                self._occ_add(p)
        for key in list(self.occupancy):
            for p in self.occupancy[key]:
                self._schedule_motion(p, t0)
                self._schedule_uni(p, t0)
        # pair events once per unordered pair per channel: scan voxel lists
        done = set()
        for (voxel, sa), plist in self.occupancy.items():
            for p in plist:
                for xb, k_meso, prods in self.tables.pair_by_species[sa]:
                    partners = self.occupancy.get((voxel, xb))
                    if not partners:
                        continue
                    for q in partners:
                        if q is p:
                            continue
                        key = (min(p.pid, q.pid), max(p.pid, q.pid), id(prods))
                        if key in done:
                            continue
                        done.add(key)
                        t = t0 + self.rng.exponential(1.0 / k_meso)
                        self._push(t, _PAIR, p, p.gen, q, q.gen, prods)

    def _spawn(self, species: int, voxel, t: float):
        p = self.store.create(species, MESO, t, voxel=voxel)
        self._occ_add(p)
        self._schedule_motion(p, t)
        self._schedule_uni(p, t)
        self._schedule_pairs(p, t)
        return p

    def _kill(self, p: Particle, t: float):
        self._occ_remove(p)
        self.store.remove(p, t)

    # ── event execution ─────────────────────────────────────────────

    def run_until(self, t_end: float):
        heap = self.heap
        while heap:
            t = heap[0][0]
            if t > t_end:
                break
            _, _, kind, a, ga, b, gb, aux = heapq.heappop(heap)
            if not a.alive:
                continue
            if kind != _UNI and a.gen != ga:
                continue
            if kind == _PAIR and (not b.alive or b.gen != gb):
                continue
            self.time = t
            self.executed_events += 1
            if kind == _DIFF:
                self._occ_remove(a)
                a.voxel = aux
                a.gen += 1
                self._occ_add(a)
                self._schedule_motion(a, t)
                self._schedule_pairs(a, t)
            elif kind == _UNI:
                voxel = a.voxel
                self._kill(a, t)
                for s in aux:
                    self._spawn(s, voxel, t)
            else:  # _PAIR
                voxel = a.voxel
                self._kill(a, t)
                self._kill(b, t)
                for s in aux:
                    self._spawn(s, voxel, t)
        self.time = t_end
