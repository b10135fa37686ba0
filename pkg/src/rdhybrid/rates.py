"""Analytic rate calibration for the lattice model.

Mean binding times of a diffusing pair split into a search stage and a
reaction stage on both modeling scales.  Matching the total times gives
a mesh-corrected lattice association rate; the mismatch that remains in
the reaction stage alone is the resolution indicator W used for scale
selection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .mesh import CartesianMesh, jump_rate
from .model import BIMOLECULAR, ReactionNetwork

# Lattice Green's function constants for the simple cubic (C3) and
# square (C2) walks.
C2 = 0.1951
C3 = 1.5164


class NonPositiveDenominator(ValueError):
    """Raised when 1 + (k_a/D) G(h, sigma) <= 0.

    This happens for meshes far below the optimal width, where no local
    rate correction exists.
    """


def g3(h: float, sigma: float) -> float:
    """G(h, sigma) = 1/(4 pi sigma) - C3/(6 h) in 3D.

    Zero exactly at the optimal mesh width; negative below it.
    """
    return 1.0 / (4.0 * math.pi * sigma) - C3 / (6.0 * h)


def h_star(sigma: float, dim: int = 3) -> float:
    """Mesh width at which lattice and continuous mean binding times can
    be matched stage by stage (the accuracy-optimal resolution)."""
    if dim == 3:
        return (2.0 * C3 / 3.0) * math.pi * sigma
    if dim == 2:
        return math.sqrt(math.pi) * math.exp((3.0 + 2.0 * C2 * math.pi) / 4.0) * sigma
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def collins_kimball(k_a: float, D: float, sigma: float, V: float) -> float:
    """Well-mixed effective association rate per reactant pair."""
    return (1.0 / V) * 4.0 * math.pi * sigma * D * k_a / (4.0 * math.pi * sigma * D + k_a)


def meso_rate(k_a: float, D: float, sigma: float, h: float) -> float:
    """Mesh-corrected lattice association rate per co-located pair.

    k = (k_a / h^3) / (1 + (k_a / D) G(h, sigma)).  Values for h below
    the optimal width are still returned as long as the denominator is
    positive; accuracy degrades on both sides of the optimum.
    """
    denom = 1.0 + (k_a / D) * g3(h, sigma)
    if denom <= 0.0:
        raise NonPositiveDenominator(
            f"1 + (k_a/D) G = {denom:g} <= 0 at h={h:g}, sigma={sigma:g}; "
            "mesh too fine for a local rate correction")
    return (k_a / h ** 3) / denom


def resolution_w(k_a: float, D: float, sigma: float, h: float) -> float:
    """Relative error of the lattice reaction stage: W = (k_a/D) G(h, sigma).

    Negative values indicate h below the optimal width; report |W|
    together with a below-optimal flag in that regime.
    """
    return (k_a / D) * g3(h, sigma)


@dataclass(frozen=True)
class MeanTimes:
    tau_diff_micro: float
    tau_react_micro: float
    tau_diff_meso: float
    tau_react_meso: float


def mean_times(k_a: float, D: float, sigma: float, h: float, V: float, N: int) -> MeanTimes:
    """Stage-wise mean binding times for a uniform-start pair (3D).

    The lattice search stage uses the leading-order term only, matching
    the truncation used in the rate correction.
    """
    return MeanTimes(
        tau_diff_micro=V / (4.0 * math.pi * sigma * D),
        tau_react_micro=V / k_a,
        tau_diff_meso=C3 * V / (6.0 * D * h),
        tau_react_meso=N / meso_rate(k_a, D, sigma, h),
    )


# ── Per-model rate tables ───────────────────────────────────────────────


@dataclass(frozen=True)
class PairChannel:
    """One bimolecular channel evaluated on a given mesh."""

    reaction_index: int
    k_a: float
    sigma: float     # sum of the two reaction radii
    D: float         # sum of the two diffusion constants
    h_star: float
    k_meso: float
    w: float         # |W|; see below_optimal
    below_optimal: bool


@dataclass(frozen=True)
class RateTable:
    """Jump rates and corrected reaction rates for one mesh resolution."""

    mesh: CartesianMesh
    jump_rates: tuple[float, ...]          # per species, per face neighbor
    channels: tuple[PairChannel, ...]      # per bimolecular reaction

    def channel_for(self, reaction_index: int) -> PairChannel:
        for ch in self.channels:
            if ch.reaction_index == reaction_index:
                return ch
        raise KeyError(reaction_index)


def pair_parameters(network: ReactionNetwork, reaction_index: int) -> tuple[float, float, float]:
    """(k_a, sigma, D) of a bimolecular channel, with sigma and D the
    sums over the two reactants."""
    r = network.reactions[reaction_index]
    if r.kind != BIMOLECULAR:
        raise ValueError(f"reaction {reaction_index} is not bimolecular")
    a, b = (network.spec(n) for n in r.reactants)
    return r.rate, a.sigma + b.sigma, a.D + b.D


def build_rate_table(network: ReactionNetwork, mesh: CartesianMesh) -> RateTable:
    jumps = tuple(jump_rate(s.D, mesh.h) for s in network.species)
    channels = []
    for i, _ in network.bimolecular_reactions():
        k_a, sigma, D = pair_parameters(network, i)
        hs = h_star(sigma)
        w = resolution_w(k_a, D, sigma, mesh.h)
        channels.append(PairChannel(
            reaction_index=i, k_a=k_a, sigma=sigma, D=D, h_star=hs,
            k_meso=meso_rate(k_a, D, sigma, mesh.h),
            w=abs(w), below_optimal=mesh.h < hs,
        ))
    return RateTable(mesh, jumps, tuple(channels))
