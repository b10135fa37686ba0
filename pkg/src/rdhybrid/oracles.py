"""Independent ground-truth generators.

Two reference paths that share no kernels with the production solvers:

* a conservative finite-volume solve of the spherically symmetric
  diffusion equation with a partially absorbing inner boundary, giving
  isolated-pair survival curves, and
* a fixed-step brute-force Brownian-dynamics simulator whose contact
  handling is a per-crossing acceptance probability matched to the
  radiation condition.

Both are test/acceptance machinery; they may be orders of magnitude
slower than the solvers they check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .model import BIMOLECULAR, MESO, Model, UNIMOLECULAR
from .particles import sample_counts


class GridResolutionError(RuntimeError):
    """Doubling the radial resolution moved the answer by more than the
    requested tolerance."""


@dataclass(frozen=True)
class RadialGrid:
    """Geometrically graded finite-volume grid on [sigma, r_max]."""

    sigma: float
    r_max: float
    faces: np.ndarray      # n_r + 1 face radii, faces[0] == sigma
    centers: np.ndarray    # n_r cell centers
    volumes: np.ndarray    # 4/3 pi (f_{i+1}^3 - f_i^3)

    @property
    def n_r(self) -> int:
        return len(self.centers)

    @staticmethod
    def build(sigma: float, r_max: float, *, n_r: int = 600, first_width: float | None = None) -> "RadialGrid":
        if n_r < 400:
            raise ValueError("n_r must be >= 400")
        if first_width is None:
            first_width = sigma / 150.0
        span = r_max - sigma
        if span <= n_r * first_width:
            # uniform grid already resolves everything
            faces = np.linspace(sigma, r_max, n_r + 1)
        else:
            # growth factor g solving first_width (g^n - 1)/(g - 1) = span
            lo, hi = 1.0 + 1e-12, 2.0
            for _ in range(200):
                g = 0.5 * (lo + hi)
                total = first_width * (g ** n_r - 1.0) / (g - 1.0)
                if total < span:
                    lo = g
                else:
                    hi = g
            g = 0.5 * (lo + hi)
            widths = first_width * g ** np.arange(n_r)
            faces = sigma + np.concatenate(([0.0], np.cumsum(widths)))
            faces *= 1.0  # keep contiguous
            faces[-1] = r_max
        centers = 0.5 * (faces[:-1] + faces[1:])
        volumes = 4.0 * math.pi / 3.0 * (faces[1:] ** 3 - faces[:-1] ** 3)
        return RadialGrid(sigma, r_max, faces, centers, volumes)


def _build_operator(grid: RadialGrid, D: float, k_a: float):
    """Tridiagonal generator M with dp/dt = M p.

    Interior fluxes are conservative two-point fluxes on face areas; the
    inner face removes probability at rate k_a p(sigma) with a one-sided
    closure for p(sigma); the outer face is held at zero density.
    """
    n = grid.n_r
    c = grid.centers
    f = grid.faces
    V = grid.volumes
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    area = 4.0 * math.pi * f ** 2
    for i in range(n - 1):
        g = D * area[i + 1] / (c[i + 1] - c[i])
        diag[i] -= g / V[i]
        upper[i] += g / V[i]
        diag[i + 1] -= g / V[i + 1]
        lower[i + 1] += g / V[i + 1]
    # inner radiation flux: k_a p(sigma), p(sigma) closed from p_0
    if k_a > 0.0:
        kappa = k_a / (4.0 * math.pi * grid.sigma ** 2)
        gamma = k_a / (1.0 + (c[0] - grid.sigma) * kappa / D)
        diag[0] -= gamma / V[0]
    # outer boundary: zero density just outside the last face
    g_out = D * area[-1] / (f[-1] - c[-1])
    diag[-1] -= g_out / V[-1]
    return lower, diag, upper


def _step_theta(p, lower, diag, upper, dt, theta):
    """One theta-scheme step of dp/dt = M p (theta=1: backward Euler,
    theta=0.5: trapezoidal)."""
    n = len(p)
    # rhs = (I + (1-theta) dt M) p
    rhs = p + (1.0 - theta) * dt * (diag * p)
    rhs[:-1] += (1.0 - theta) * dt * upper[:-1] * p[1:]
    rhs[1:] += (1.0 - theta) * dt * lower[1:] * p[:-1]
    ab = np.zeros((3, n))
    ab[0, 1:] = -theta * dt * upper[:-1]
    ab[1, :] = 1.0 - theta * dt * diag
    ab[2, :-1] = -theta * dt * lower[1:]
    return solve_banded((1, 1), ab, rhs)


def pde_survival(
    r0: float,
    sigma: float,
    k_a: float,
    D: float,
    times,
    *,
    n_r: int = 600,
    r_max: float | None = None,
    steps_per_decade: int = 48,
    t_start: float | None = None,
    check_resolution: bool = False,
    resolution_tol: float = 1e-4,
) -> np.ndarray:
    """Survival probability of an isolated pair from a radial PDE solve.

    Solves the spherically symmetric diffusion equation on
    [sigma, r_max] with radiation condition at sigma (flux
    4 pi sigma^2 D dp/dr = k_a p) and an absorbing far boundary, from a
    delta initial condition at r0.  Time stepping is trapezoidal with a
    damped (backward Euler) start and geometrically growing steps.
    """
    times = np.asarray(times, dtype=float)
    t_max = float(times.max())
    if r_max is None:
        r_max = 20.0 * sigma + 6.0 * math.sqrt(2.0 * D * t_max)

    def solve(n_r_use: int) -> np.ndarray:
        grid = RadialGrid.build(sigma, r_max, n_r=n_r_use)
        lower, diag, upper = _build_operator(grid, D, k_a)
        # delta at r0: all mass in the containing cell
        i0 = int(np.searchsorted(grid.faces, max(r0, sigma), side="right") - 1)
        i0 = min(max(i0, 0), grid.n_r - 1)
        p = np.zeros(grid.n_r)
        p[i0] = 1.0 / grid.volumes[i0]

        t0 = t_start if t_start is not None else min(1e-10, t_max * 1e-8, float(times.min()) / 32.0 or 1e-12)
        t0 = max(t0, 1e-300)
        # geometric time grid hitting every requested time exactly
        n_steps = max(1, int(math.ceil(steps_per_decade * math.log10(t_max / t0))))
        tgrid = np.geomspace(t0, t_max, n_steps + 1)
        tgrid = np.unique(np.concatenate([[0.0], tgrid, times]))

        out = np.empty(len(times))
        want = {float(t): i for i, t in enumerate(times)}
        if 0.0 in want:
            out[want[0.0]] = 1.0
        t_prev = 0.0
        rannacher = 4
        for t_next in tgrid[1:]:
            dt = t_next - t_prev
            if dt > 0:
                if rannacher > 0:
                    # damped half-steps kill the delta's high modes
                    p = _step_theta(p, lower, diag, upper, 0.5 * dt, 1.0)
                    p = _step_theta(p, lower, diag, upper, 0.5 * dt, 1.0)
                    rannacher -= 1
                else:
                    p = _step_theta(p, lower, diag, upper, dt, 0.5)
            if float(t_next) in want:
                out[want[float(t_next)]] = float(np.dot(grid.volumes, p))
            t_prev = t_next
        return np.clip(out, 0.0, 1.0)

    s = solve(n_r)
    if check_resolution:
        s2 = solve(2 * n_r)
        err = float(np.max(np.abs(s - s2)))
        if err > resolution_tol:
            raise GridResolutionError(
                f"survival changed by {err:.2e} (> {resolution_tol:g}) when doubling n_r")
        return s2
    return s


def sample_times_from_survival(t_grid: np.ndarray, s_grid: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-transform reaction times from a tabulated survival curve.

    Draws with u < 1 - S(t_max) get a time interpolated on the curve
    (log-t linear interpolation); the rest return +inf.
    """
    q = 1.0 - np.asarray(s_grid)
    q = np.maximum.accumulate(q)
    out = np.full(u.shape, np.inf)
    hit = u < q[-1]
    if np.any(hit):
        out[hit] = np.exp(np.interp(u[hit], q, np.log(t_grid)))
    return out


# ── Brute-force Brownian dynamics ───────────────────────────────────────


def reflect_fold(pos: np.ndarray, lower: np.ndarray, extent: np.ndarray) -> np.ndarray:
    """Reflect positions into the box by folding the free-space move.

    The triangle-wave fold is the exact update of reflected Brownian
    motion at the endpoint level, for any move length.
    """
    y = np.mod(pos - lower, 2.0 * extent)
    y = np.where(y > extent, 2.0 * extent - y, y)
    return lower + y


def crossing_probability(k_a: float, sigma: float, D: float, dt: float) -> float:
    """Acceptance probability for one attempted crossing of the contact
    sphere in a step of length dt.

    Matching the mean absorbed flux of the discrete scheme to the
    radiation condition gives P = kappa sqrt(pi dt / D) with
    kappa = k_a / (4 pi sigma^2).  Must stay below 1 for the scheme to
    represent the target rate.
    """
    kappa = k_a / (4.0 * math.pi * sigma ** 2)
    p = kappa * math.sqrt(math.pi * dt / D)
    if p > 1.0:
        raise ValueError(
            f"dt_bd={dt:g} too coarse: crossing probability {p:.3g} > 1")
    return p


def bd_pair_survival(sigma: float, D: float, k_a: float, r0: float, dt: float,
                     times, n_pairs: int, rng) -> np.ndarray:
    """Monte Carlo survival curve of an isolated pair (relative
    coordinate only), for convergence checks against pde_survival."""
    times = np.asarray(times, dtype=float)
    p_acc = crossing_probability(k_a, sigma, D, dt)
    std = math.sqrt(2.0 * D * dt)
    rel = np.zeros((n_pairs, 3))
    rel[:, 0] = r0
    alive = np.ones(n_pairs, dtype=bool)
    out = np.empty(len(times))
    t = 0.0
    order = np.argsort(times)
    for idx in order:
        target = times[idx]
        while t < target - 1e-15 * max(target, 1.0):
            t += dt
            na = int(alive.sum())
            if na == 0:
                break
            live = np.nonzero(alive)[0]
            prop = rel[live] + rng.standard_normal((na, 3)) * std
            r = np.linalg.norm(prop, axis=1)
            inside = r < sigma
            if np.any(inside):
                hit = live[inside]
                react = rng.random(len(hit)) < p_acc
                alive[hit[react]] = False
                # reflect non-reacting crossers radially out of the sphere
                stay = hit[~react]
                if len(stay) > 0:
                    ri = r[inside][~react]
                    scale = (2.0 * sigma - ri) / np.maximum(ri, 1e-300)
                    prop_in = prop[inside][~react] * scale[:, None]
                    prop[np.nonzero(inside)[0][~react]] = prop_in
            rel[live[alive[live]]] = prop[alive[live]]
        out[idx] = alive.mean()
    return out


class BatchedBD:
    """Replica-parallel fixed-step BD for whole (small) systems.

    Each replica owns a fixed block of particle slots; every step all
    live particles take a Gaussian move, are folded into the box,
    unimolecular channels fire with exponential step probabilities, and
    reactive pairs that ended up overlapping react with the calibrated
    crossing probability (or are reflected apart).
    """

    def __init__(self, model: Model, dt: float, *, max_slots: int | None = None):
        net = model.network
        self.model = model
        self.dt = dt
        ns = net.n_species
        self.D = np.array([s.D for s in net.species])
        self.sigma = np.array([s.sigma for s in net.species])
        self.std = np.sqrt(2.0 * self.D * dt)
        # unimolecular: per species total rate, channel list
        self.uni_rate = np.zeros(ns)
        self.uni_channels: list[list[tuple[float, tuple[int, ...]]]] = [[] for _ in range(ns)]
        for _, r in net.unimolecular_reactions():
            s = net.species_index(r.reactants[0])
            self.uni_rate[s] += r.rate
            self.uni_channels[s].append((r.rate, tuple(net.species_index(p) for p in r.products)))
        self.p_uni = 1.0 - np.exp(-self.uni_rate * dt)
        # bimolecular channels
        self.channels = []
        for _, r in net.bimolecular_reactions():
            sa, sb = (net.species_index(x) for x in r.reactants)
            sig = self.sigma[sa] + self.sigma[sb]
            d_rel = self.D[sa] + self.D[sb]
            self.channels.append({
                "sa": sa, "sb": sb, "sigma": sig,
                "p_acc": crossing_probability(r.rate, sig, d_rel, dt),
                "products": tuple(net.species_index(p) for p in r.products),
            })
        if max_slots is None:
            base = sum(s.initial_count for s in net.species)
            max_slots = max(4, 2 * base + 4)
        self.max_slots = max_slots
        self.lower = np.array(model.domain.lower)
        self.extent = np.array(model.domain.extent)

    def _place_initial(self, n_rep: int, rng):
        species = np.full((n_rep, self.max_slots), -1, dtype=np.int16)
        pos = np.zeros((n_rep, self.max_slots, 3))
        slot = 0
        for si, s in enumerate(self.model.species):
            for _ in range(s.initial_count):
                species[:, slot] = si
                if s.fixed_position is not None:
                    pos[:, slot, :] = np.asarray(s.fixed_position)
                else:
                    pos[:, slot, :] = self.lower + rng.random((n_rep, 3)) * self.extent
                slot += 1
        return species, pos

    def _first_free(self, species_row: np.ndarray) -> int:
        free = np.nonzero(species_row < 0)[0]
        if len(free) == 0:
            raise RuntimeError("out of particle slots; raise max_slots")
        return int(free[0])

    def run(self, n_rep: int, t_final: float, sample_times, rng) -> np.ndarray:
        """Simulate n_rep replicas; returns counts of shape
        (n_rep, n_species, n_times)."""
        sample_times = np.asarray(sample_times, dtype=float)
        ns = self.model.network.n_species
        species, pos = self._place_initial(n_rep, rng)
        out = np.zeros((n_rep, ns, len(sample_times)), dtype=np.int32)
        pair_i, pair_j = np.triu_indices(self.max_slots, k=1)

        def record(idx):
            for s in range(ns):
                out[:, s, idx] = (species == s).sum(axis=1)

        next_sample = 0
        while next_sample < len(sample_times) and sample_times[next_sample] <= 0.0:
            record(next_sample)
            next_sample += 1
        t = 0.0
        n_steps = int(round(t_final / self.dt))
        for _ in range(n_steps):
            t += self.dt
            alive = species >= 0
            # unimolecular events (at most one per particle per step)
            pu = np.where(alive, self.p_uni[np.maximum(species, 0)], 0.0)
            fire = rng.random(species.shape) < pu
            if np.any(fire):
                for rep, slot in zip(*np.nonzero(fire)):
                    si = int(species[rep, slot])
                    chans = self.uni_channels[si]
                    if len(chans) == 1:
                        _, prods = chans[0]
                    else:
                        rates = np.array([c[0] for c in chans])
                        pick = rng.choice(len(chans), p=rates / rates.sum())
                        _, prods = chans[pick]
                    parent = pos[rep, slot].copy()
                    species[rep, slot] = -1
                    if len(prods) == 1:
                        species[rep, slot] = prods[0]
                    elif len(prods) == 2:
                        sep = self.sigma[prods[0]] + self.sigma[prods[1]]
                        u = rng.standard_normal(3)
                        u /= max(np.linalg.norm(u), 1e-300)
                        species[rep, slot] = prods[0]
                        pos[rep, slot] = parent + 0.5 * sep * u
                        free = self._first_free(species[rep])
                        species[rep, free] = prods[1]
                        pos[rep, free] = parent - 0.5 * sep * u
            # diffusion + reflective fold
            alive = species >= 0
            stdv = np.where(alive, self.std[np.maximum(species, 0)], 0.0)
            pos += rng.standard_normal(pos.shape) * stdv[:, :, None]
            pos = reflect_fold(pos, self.lower, self.extent)
            # contact events
            for ch in self.channels:
                sa, sb = ch["sa"], ch["sb"]
                spi = species[:, pair_i]
                spj = species[:, pair_j]
                match = (spi == sa) & (spj == sb) | (spi == sb) & (spj == sa)
                if not np.any(match):
                    continue
                d2 = ((pos[:, pair_i, :] - pos[:, pair_j, :]) ** 2).sum(axis=2)
                hits = match & (d2 < ch["sigma"] ** 2)
                if not np.any(hits):
                    continue
                for rep, k in zip(*np.nonzero(hits)):
                    i, j = int(pair_i[k]), int(pair_j[k])
                    if species[rep, i] < 0 or species[rep, j] < 0:
                        continue  # consumed earlier this step
                    xi, xj = pos[rep, i], pos[rep, j]
                    if rng.random() < ch["p_acc"]:
                        mid = 0.5 * (xi + xj)
                        prods = ch["products"]
                        species[rep, i] = -1
                        species[rep, j] = -1
                        if len(prods) >= 1:
                            species[rep, i] = prods[0]
                            pos[rep, i] = mid
                        if len(prods) == 2:
                            sep = self.sigma[prods[0]] + self.sigma[prods[1]]
                            u = rng.standard_normal(3)
                            u /= max(np.linalg.norm(u), 1e-300)
                            pos[rep, i] = mid + 0.5 * sep * u
                            species[rep, j] = prods[1]
                            pos[rep, j] = mid - 0.5 * sep * u
                    else:
                        # reflect the pair apart radially about contact
                        rel = xi - xj
                        r = float(np.linalg.norm(rel))
                        if r < 1e-300:
                            u = rng.standard_normal(3)
                            rel = u / max(np.linalg.norm(u), 1e-300) * 1e-300
                            r = 1e-300
                        scale = (2.0 * ch["sigma"] - r) / r
                        mid = 0.5 * (xi + xj)
                        pos[rep, i] = mid + 0.5 * scale * rel
                        pos[rep, j] = mid - 0.5 * scale * rel
            while next_sample < len(sample_times) and sample_times[next_sample] <= t + 1e-12 * max(t, 1.0):
                record(next_sample)
                next_sample += 1
        while next_sample < len(sample_times):
            record(next_sample)
            next_sample += 1
        return out


def bd_simulate(model: Model, dt_bd: float, rng, *, n_replicas: int = 1,
                sample_times=None, max_slots: int | None = None) -> np.ndarray:
    """Trajectory ensemble from the brute-force oracle.

    Returns per-replica species counts with shape
    (n_replicas, n_species, n_times).
    """
    cfg = model.config
    sample_times = cfg.sample_times if sample_times is None else sample_times
    sim = BatchedBD(model, dt_bd, max_slots=max_slots)
    return sim.run(n_replicas, cfg.t_final, sample_times, rng)
