"""Automatic scale assignment.

Bimolecular channels whose rebind kinetics the mesh cannot resolve
(W > epsilon) are traced back to the dissociation events that create
their reactants in spatial proximity.  The originating complex is kept
off-lattice permanently and its dissociation products are kept
off-lattice until they are old enough to be well mixed within a voxel.
"""
from __future__ import annotations

from dataclasses import dataclass

from .mesh import CartesianMesh
from .model import MESO, MICRO, Reaction, ReactionNetwork
from .rates import pair_parameters, resolution_w

ALWAYS_MESO = "always-meso"
ALWAYS_MICRO = "always-micro"
MICRO_UNTIL_AGE = "micro-until-age"


class UnresolvableReaction(RuntimeError):
    """An under-resolved bimolecular channel has no correlated source.

    Neither reactant descends from a dissociation, so keeping newly
    created molecules off-lattice cannot recover the lost rebind
    kinetics.
    """

    def __init__(self, reaction_index: int, reaction: Reaction, w: float):
        self.reaction_index = reaction_index
        self.reaction = reaction
        self.w = w
        super().__init__(
            f"reaction {reaction_index} ({reaction}) has W={w:.4g} above threshold "
            "but its reactants are never co-produced by a dissociation")


@dataclass(frozen=True)
class SpeciesPolicy:
    policy: str
    t_m: float = 0.0

    def scale_at(self, age: float) -> str:
        if self.policy == ALWAYS_MICRO:
            return MICRO
        if self.policy == MICRO_UNTIL_AGE and age <= self.t_m:
            return MICRO
        return MESO


@dataclass(frozen=True)
class FlaggedReaction:
    reaction_index: int
    w: float
    resolved: bool


@dataclass(frozen=True)
class SplitPlan:
    """Per-species scale policies plus the W table they were derived from."""

    policies: dict[str, SpeciesPolicy]
    w_table: tuple[FlaggedReaction, ...]

    def scale_at(self, species: str, age: float) -> str:
        return self.policies[species].scale_at(age)

    def policy(self, species: str) -> SpeciesPolicy:
        return self.policies[species]

    @property
    def all_meso(self) -> bool:
        return all(p.policy == ALWAYS_MESO for p in self.policies.values())

    def micro_species(self) -> list[str]:
        return [n for n, p in self.policies.items() if p.policy != ALWAYS_MESO]


def flag_reactions(network: ReactionNetwork, mesh: CartesianMesh, epsilon: float) -> list[tuple[int, float]]:
    """Bimolecular reactions with |W| > epsilon on this mesh.

    W is evaluated with sigma and D summed over the two reactants.
    Channels below the optimal mesh width are flagged on |W| since
    accuracy degrades on both sides of the optimum.
    """
    out = []
    for i, _ in network.bimolecular_reactions():
        k_a, sigma, D = pair_parameters(network, i)
        w = resolution_w(k_a, D, sigma, mesh.h)
        if abs(w) > epsilon:
            out.append((i, abs(w)))
    return out


def _coproducing_dissociations(network: ReactionNetwork, pair: tuple[str, str]) -> list[Reaction]:
    a, b = pair
    found = []
    for r in network.reactions:
        if not r.is_dissociation:
            continue
        p, q = r.products
        if (p == a and q == b) or (p == b and q == a):
            found.append(r)
    return found


def trace_origins(network: ReactionNetwork, reaction_index: int) -> set[str]:
    """Dissociating species from which both reactants of a bimolecular
    reaction are transitively co-producible.

    Breadth-first backward search over requirement pairs.  A pair that a
    dissociation co-produces records the dissociating species and is not
    expanded further; otherwise one requirement at a time is replaced by
    a reactant of a reaction producing it.  The visited set is bounded
    by the square of the species count, so the search terminates on
    cyclic networks.
    """
    target = network.reactions[reaction_index]
    if len(target.reactants) != 2:
        raise ValueError("trace_origins needs a bimolecular reaction")

    start = tuple(sorted(target.reactants))
    origins: set[str] = set()
    visited = {start}
    queue = [start]
    while queue:
        pair = queue.pop(0)
        hits = _coproducing_dissociations(network, pair)
        if hits:
            for r in hits:
                origins.add(r.reactants[0])
            continue
        for slot in range(2):
            needed = pair[slot]
            other = pair[1 - slot]
            for _, producer in network.producers_of(needed):
                for replacement in producer.reactants:
                    nxt = tuple(sorted((replacement, other)))
                    if nxt not in visited:
                        visited.add(nxt)
                        queue.append(nxt)
    return origins


def micro_residency_time(v_vox: float, D: float, K: float) -> float:
    """Minimum off-lattice age of dissociation products.

    K^2 V_vox^(2/3) / (6 D): proportional to the time to mix over one
    voxel.  D is the diffusion constant of the products' relative
    motion, i.e. the sum of the two products' diffusion constants.
    """
    if D <= 0:
        raise ValueError("relative diffusion constant must be > 0")
    return K * K * v_vox ** (2.0 / 3.0) / (6.0 * D)


def build_split(
    network: ReactionNetwork,
    mesh: CartesianMesh,
    epsilon: float,
    K: float,
    *,
    force_meso: bool = False,
    force_micro: tuple[str, ...] = (),
    t_m_override: float | None = None,
) -> SplitPlan:
    """Derive the per-species scale assignment for one mesh resolution.

    Origin species of flagged reactions become always-micro; their
    dissociation products become micro-until-age t_m; everything else
    stays on the lattice.  Raises UnresolvableReaction when a flagged
    reaction has no traceable origin (unless overridden).
    """
    flagged = flag_reactions(network, mesh, epsilon)
    flagged_idx = {i for i, _ in flagged}
    w_table = []
    for i, _ in network.bimolecular_reactions():
        k_a, sigma, D = pair_parameters(network, i)
        w_table.append(FlaggedReaction(i, abs(resolution_w(k_a, D, sigma, mesh.h)),
                                       resolved=i not in flagged_idx))

    policies: dict[str, SpeciesPolicy] = {s.name: SpeciesPolicy(ALWAYS_MESO) for s in network.species}

    if not force_meso:
        origin_names: list[str] = []
        for i, w in flagged:
            origins = trace_origins(network, i)
            if not origins:
                raise UnresolvableReaction(i, network.reactions[i], w)
            for name in sorted(origins):
                if name not in origin_names:
                    origin_names.append(name)

        micro_until: dict[str, float] = {}
        for name in origin_names:
            policies[name] = SpeciesPolicy(ALWAYS_MICRO)
            for _, r in network.unimolecular_reactions():
                if r.reactants[0] != name or not r.is_dissociation:
                    continue
                pa, pb = (network.spec(p) for p in r.products)
                d_rel = pa.D + pb.D
                t_m = t_m_override if t_m_override is not None else \
                    micro_residency_time(mesh.voxel_volume, d_rel, K)
                for p in r.products:
                    micro_until[p] = max(micro_until.get(p, 0.0), t_m)
        for name, t_m in micro_until.items():
            if policies[name].policy != ALWAYS_MICRO:
                policies[name] = SpeciesPolicy(MICRO_UNTIL_AGE, t_m)

    for name in force_micro:
        policies[name] = SpeciesPolicy(ALWAYS_MICRO)

    return SplitPlan(policies, tuple(w_table))
