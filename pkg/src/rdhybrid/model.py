"""Domain model: species, reactions, geometry, and run configuration.

All model objects are immutable after construction and safe to share
between concurrently running trajectory workers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

UNIMOLECULAR = "unimolecular"
BIMOLECULAR = "bimolecular"

SOLVERS = ("meso", "micro", "hybrid", "bd-oracle")

# Scale tags used throughout the solvers.
MESO = "meso"
MICRO = "micro"


@dataclass(frozen=True)
class SpeciesSpec:
    """One chemical species.

    Parameters
    ----------
    name : str
        Unique identifier within a model.
    D : float
        Diffusion constant (length^2/time).  D == 0 models a fixed
        (immobile) molecule; such particles never schedule jump or
        displacement events.
    sigma : float
        Reaction radius (length).  The contact distance of a pair is the
        sum of the two radii.
    initial_count : int
        Number of molecules placed at t = 0.
    initial_placement : "uniform" or (x, y, z)
        Either uniform over the domain or a fixed point.
    """

    name: str
    D: float
    sigma: float
    initial_count: int = 0
    initial_placement: str | tuple[float, float, float] = "uniform"

    @property
    def fixed_position(self) -> tuple[float, float, float] | None:
        if isinstance(self.initial_placement, tuple):
            return self.initial_placement
        return None


@dataclass(frozen=True)
class Reaction:
    """A unimolecular or bimolecular reaction channel.

    ``rate`` is the microscopic rate constant: 1/time for unimolecular
    channels, length^3/time (the intrinsic association rate k_a) for
    bimolecular channels.  A unimolecular channel with exactly two
    products is a dissociation; on the microscopic scale its products
    are born in contact.
    """

    kind: str
    reactants: tuple[str, ...]
    products: tuple[str, ...]
    rate: float

    @property
    def is_dissociation(self) -> bool:
        return self.kind == UNIMOLECULAR and len(self.products) == 2

    def __str__(self) -> str:
        lhs = " + ".join(self.reactants)
        rhs = " + ".join(self.products) if self.products else "0"
        return f"{lhs} -> {rhs} (k={self.rate:g})"


def unimolecular(reactant: str, products: Sequence[str], k: float) -> Reaction:
    return Reaction(UNIMOLECULAR, (reactant,), tuple(products), k)


def bimolecular(a: str, b: str, products: Sequence[str], k_a: float) -> Reaction:
    return Reaction(BIMOLECULAR, (a, b), tuple(products), k_a)


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box with reflective walls."""

    lower: tuple[float, float, float]
    upper: tuple[float, float, float]

    @property
    def extent(self) -> tuple[float, float, float]:
        return tuple(u - l for l, u in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        ex, ey, ez = self.extent
        return ex * ey * ez

    @property
    def min_extent(self) -> float:
        return min(self.extent)

    def contains(self, pos: Sequence[float]) -> bool:
        return all(l <= x <= u for x, l, u in zip(pos, self.lower, self.upper))


def cube(side: float, origin: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> BoxDomain:
    """Convenience constructor for a cube of the given side length."""
    return BoxDomain(origin, tuple(o + side for o in origin))


@dataclass(frozen=True)
class SimConfig:
    """Run-level configuration shared by all solvers."""

    t_final: float
    dt_split: float
    epsilon: float = 0.025
    kfactor: float = 6.0
    rng_seed: int = 0
    sample_times: tuple[float, ...] = ()
    solver: str = "hybrid"


@dataclass(frozen=True)
class ReactionNetwork:
    """Species list plus reaction channels, with index lookups."""

    species: tuple[SpeciesSpec, ...]
    reactions: tuple[Reaction, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {s.name: i for i, s in enumerate(self.species)}
        )

    @property
    def n_species(self) -> int:
        return len(self.species)

    def species_index(self, name: str) -> int:
        return self._index[name]

    def has_species(self, name: str) -> bool:
        return name in self._index

    def spec(self, name: str) -> SpeciesSpec:
        return self.species[self._index[name]]

    def bimolecular_reactions(self) -> list[tuple[int, Reaction]]:
        return [(i, r) for i, r in enumerate(self.reactions) if r.kind == BIMOLECULAR]

    def unimolecular_reactions(self) -> list[tuple[int, Reaction]]:
        return [(i, r) for i, r in enumerate(self.reactions) if r.kind == UNIMOLECULAR]

    def producers_of(self, name: str) -> list[tuple[int, Reaction]]:
        """Reactions having ``name`` among their products."""
        return [(i, r) for i, r in enumerate(self.reactions) if name in r.products]


@dataclass(frozen=True)
class Model:
    """A complete simulation problem: network + geometry + configuration."""

    network: ReactionNetwork
    domain: BoxDomain
    config: SimConfig

    @property
    def species(self) -> tuple[SpeciesSpec, ...]:
        return self.network.species

    @property
    def reactions(self) -> tuple[Reaction, ...]:
        return self.network.reactions

    def with_config(self, **kwargs) -> "Model":
        return Model(self.network, self.domain, replace(self.config, **kwargs))


@dataclass(frozen=True)
class Violation:
    """One well-formedness failure found by validate_model."""

    code: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.where}: {self.message}"


def validate_model(network: ReactionNetwork, domain: BoxDomain, config: SimConfig) -> list[Violation]:
    """Check model well-formedness.  An empty report means accepted.

    A negative diffusion constant is a violation but D == 0 is allowed
    (immobile molecules are part of the model class).
    """
    out: list[Violation] = []
    seen: set[str] = set()
    for s in network.species:
        if s.name in seen:
            out.append(Violation("duplicate-species", s.name, "species name declared twice"))
        seen.add(s.name)
        if s.D < 0:
            out.append(Violation("negative-diffusion", s.name, f"D must be >= 0, got {s.D!r}"))
        if not s.sigma > 0:
            out.append(Violation("nonpositive-sigma", s.name, f"sigma must be > 0, got {s.sigma!r}"))
        if s.initial_count < 0:
            out.append(Violation("negative-count", s.name, "initial_count must be >= 0"))
        fixed = s.fixed_position
        if fixed is not None and not domain.contains(fixed):
            out.append(Violation("placement-outside-domain", s.name, f"fixed point {fixed} not in box"))

    for i, r in enumerate(network.reactions):
        where = f"reaction {i}"
        if r.kind not in (UNIMOLECULAR, BIMOLECULAR):
            out.append(Violation("unknown-kind", where, f"unknown reaction kind {r.kind!r}"))
            continue
        want = 1 if r.kind == UNIMOLECULAR else 2
        if len(r.reactants) != want:
            out.append(Violation("bad-stoichiometry", where,
                                 f"{r.kind} reaction needs {want} reactant(s), got {len(r.reactants)}"))
        if len(r.products) > 2:
            out.append(Violation("bad-stoichiometry", where,
                                 f"at most 2 products supported, got {len(r.products)}"))
        if not r.rate > 0:
            out.append(Violation("nonpositive-rate", where, f"rate must be > 0, got {r.rate!r}"))
        for name in (*r.reactants, *r.products):
            if not network.has_species(name):
                out.append(Violation("unknown-species", where, f"undeclared species {name!r}"))
        if r.kind == BIMOLECULAR and all(network.has_species(n) for n in r.reactants):
            sig = sum(network.spec(n).sigma for n in r.reactants)
            if sig > 0.5 * domain.min_extent:
                out.append(Violation("sigma-too-large", where,
                                     f"reaction radius sum {sig:g} exceeds half the domain extent"))

    for ax, (l, u) in enumerate(zip(domain.lower, domain.upper)):
        if not u > l:
            out.append(Violation("empty-domain", f"axis {ax}", f"upper {u!r} must exceed lower {l!r}"))

    if not config.dt_split > 0 or config.dt_split > config.t_final:
        out.append(Violation("bad-dt-split", "config", "need 0 < dt_split <= t_final"))
    if not config.epsilon > 0:
        out.append(Violation("bad-epsilon", "config", "epsilon must be > 0"))
    if config.kfactor < 1:
        out.append(Violation("bad-kfactor", "config", "K must be >= 1"))
    if config.solver not in SOLVERS:
        out.append(Violation("bad-solver", "config", f"solver must be one of {SOLVERS}"))
    for t in config.sample_times:
        if t < 0 or t > config.t_final:
            out.append(Violation("bad-sample-time", "config", f"sample time {t!r} outside [0, t_final]"))
    return out


# ── JSON model files ────────────────────────────────────────────────────
#
# Top-level keys: domain, species, reactions, config.  The field names
# mirror the dataclasses above; see docs/model_format.md.


class ModelFormatError(ValueError):
    pass


def _placement_from_json(value) -> str | tuple[float, float, float]:
    if value == "uniform" or value is None:
        return "uniform"
    if isinstance(value, dict) and "fixed" in value:
        value = value["fixed"]
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return tuple(float(v) for v in value)
    raise ModelFormatError(f"bad initial_placement: {value!r}")


def model_from_dict(doc: dict) -> Model:
    try:
        dom = doc["domain"]
        domain = BoxDomain(tuple(float(v) for v in dom["lower"]),
                           tuple(float(v) for v in dom["upper"]))
        species = tuple(
            SpeciesSpec(
                name=str(s["name"]),
                D=float(s["D"]),
                sigma=float(s["sigma"]),
                initial_count=int(s.get("initial_count", 0)),
                initial_placement=_placement_from_json(s.get("initial_placement")),
            )
            for s in doc["species"]
        )
        reactions = []
        for j, r in enumerate(doc["reactions"]):
            kind = str(r["type"])
            products = tuple(str(p) for p in r.get("products", ()))
            if kind == UNIMOLECULAR:
                reactions.append(unimolecular(str(r["reactant"]), products, float(r["k"])))
            elif kind == BIMOLECULAR:
                ra = [str(x) for x in r["reactants"]]
                if len(ra) != 2:
                    raise ModelFormatError(f"reaction {j}: bimolecular needs 2 reactants, got {len(ra)}")
                reactions.append(bimolecular(ra[0], ra[1], products, float(r["k_a"])))
            else:
                raise ModelFormatError(f"reaction {j}: unknown type {kind!r}")
        cfg = doc["config"]
        config = SimConfig(
            t_final=float(cfg["t_final"]),
            dt_split=float(cfg["dt_split"]),
            epsilon=float(cfg.get("epsilon", 0.025)),
            kfactor=float(cfg.get("K", 6.0)),
            rng_seed=int(cfg.get("rng_seed", 0)),
            sample_times=tuple(float(t) for t in cfg.get("sample_times", ())),
            solver=str(cfg.get("solver", "hybrid")),
        )
    except KeyError as e:
        raise ModelFormatError(f"missing required field {e.args[0]!r}") from e
    return Model(ReactionNetwork(species, reactions=tuple(reactions)), domain, config)


def model_to_dict(model: Model) -> dict:
    species = []
    for s in model.species:
        placement = "uniform" if s.fixed_position is None else {"fixed": list(s.fixed_position)}
        species.append({
            "name": s.name, "D": s.D, "sigma": s.sigma,
            "initial_count": s.initial_count, "initial_placement": placement,
        })
    reactions = []
    for r in model.reactions:
        if r.kind == UNIMOLECULAR:
            reactions.append({"type": r.kind, "reactant": r.reactants[0],
                              "products": list(r.products), "k": r.rate})
        else:
            reactions.append({"type": r.kind, "reactants": list(r.reactants),
                              "products": list(r.products), "k_a": r.rate})
    c = model.config
    return {
        "domain": {"lower": list(model.domain.lower), "upper": list(model.domain.upper)},
        "species": species,
        "reactions": reactions,
        "config": {
            "t_final": c.t_final, "dt_split": c.dt_split, "epsilon": c.epsilon,
            "K": c.kfactor, "rng_seed": c.rng_seed,
            "sample_times": list(c.sample_times), "solver": c.solver,
        },
    }


def load_model(path) -> Model:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    return model_from_dict(doc)


def save_model(model: Model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")
