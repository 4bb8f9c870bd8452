"""Ground-truth generators and trajectory samplers for every model family.

Randomness policy: one documented generator algorithm (numpy PCG64).
Every stream is derived by hashing a tuple of identifiers through
``numpy.random.SeedSequence``, so structure draws, parameter draws and
each trajectory get independent substreams that are reproducible no
matter in which order (or how concurrently) they are realized.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .core import (
    Cpt, DbnStructure, Domain, FactoredCpt, FamilySpec, LinearGaussian, Logistic,
    ModelError, NoisyOr, ParameterSet, TrajectoryDataset, configuration_index,
    n_configurations, parents_of, topological_order,
)

MODEL_FAMILIES = ("cpt", "factored", "noisy_or", "logistic", "linear_gaussian")


def derive_seed(seed: int, *ids) -> int:
    """Deterministic 64-bit substream seed hashed from (seed, ids...)."""
    entropy = [int(seed)]
    for part in ids:
        if isinstance(part, str):
            entropy.extend(part.encode())
        else:
            entropy.append(int(part))
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)
    return int(state[0])


def substream(seed: int, *ids) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(derive_seed(seed, *ids))))


@dataclass(frozen=True)
class EdgeProbs:
    intra: float = 0.0
    inter: float = 0.0
    auto: float = 0.0
    static: float = 0.0

    def __post_init__(self):
        for name in ("intra", "inter", "auto", "static"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"edge probability {name}={v} outside [0, 1]")


@dataclass(frozen=True)
class GeneratorConfig:
    """Everything needed to draw a random ground-truth DBN and its parameters."""

    n_x: int
    n_z: int = 0
    p: int = 1
    x_arity: int = 2
    z_arity: int = 2
    model: str = "cpt"
    edge_probs: EdgeProbs = field(default_factory=EdgeProbs)
    dirichlet_alpha: float = 0.5
    sharpen: float = 1.0  # >1 pushes CPT rows toward determinism
    # redraw discrete tables until every parent flips the child distribution
    # by at least this much somewhere; None admits invisible edges
    min_effect: float | None = None
    weight_range: tuple[float, float] = (0.5, 2.0)
    intercept_range: tuple[float, float] = (0.0, 0.0)
    sigma: float = 1.0
    lambda0_range: tuple[float, float] = (0.0, 0.2)
    lambda_range: tuple[float, float] = (0.3, 0.9)
    # linear systems: redraw weights until the companion spectral radius fits,
    # else long horizons overflow; None disables the rejection loop
    stability_radius: float | None = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODEL_FAMILIES:
            raise ModelError(f"unknown model family {self.model!r}")
        if self.weight_range[0] > self.weight_range[1]:
            raise ValueError("weight range must satisfy w_lo <= w_hi")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.stability_radius is not None and not self.stability_radius > 0:
            raise ValueError("stability radius must be positive")
        if self.model in ("factored", "noisy_or", "logistic") and self.x_arity != 2:
            raise ModelError(f"{self.model} kernels need binary dynamic variables")

    @property
    def discrete(self) -> bool:
        return self.model != "linear_gaussian"

    def domain(self) -> Domain:
        if self.discrete:
            return Domain("discrete",
                          x_arities=(self.x_arity,) * self.n_x,
                          z_arities=(self.z_arity,) * self.n_z)
        return Domain("continuous")


@dataclass(frozen=True)
class RegimeSpec:
    """Benchmark data regime: (n, N, T) triples under one label."""

    label: str
    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        for t in self.triples:
            if any(v <= 0 for v in t):
                raise ValueError(f"regime entries must be positive, got {t}")


FAVORABLE_REGIME = RegimeSpec(
    "favorable", ((3, 30, 10), (5, 50, 50), (10, 100, 200), (20, 400, 400), (30, 600, 500)))
HIGH_DIMENSIONAL_REGIME = RegimeSpec(
    "high_dimensional", ((3, 5, 10), (5, 10, 20), (10, 20, 40), (20, 40, 50), (30, 60, 100)))
REGIMES = {r.label: r for r in (FAVORABLE_REGIME, HIGH_DIMENSIONAL_REGIME)}


# ---------------------------------------------------------------------------
# Structure and parameter generation


def sample_random_dbn(config: GeneratorConfig) -> tuple[DbnStructure, ParameterSet]:
    """Draw a ground-truth structure and matching parameters.

    Intra edges are drawn per unordered pair and oriented along a random
    permutation, which yields a DAG by construction (probability 1 gives
    the complete DAG of a total order).  Weights with sign freedom are
    drawn with magnitude in ``weight_range`` and a random sign so active
    edges stay detectable.
    """
    rng = substream(config.seed, "structure")
    n, nz, p = config.n_x, config.n_z, config.p

    order = rng.permutation(n)
    rank = np.empty(n, dtype=int)
    rank[order] = np.arange(n)
    intra = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < config.edge_probs.intra:
                j, i = (a, b) if rank[a] < rank[b] else (b, a)
                intra[j, i] = True

    inter = np.zeros((n, n), dtype=bool)
    for j in range(n):
        for i in range(n):
            if j != i and rng.random() < config.edge_probs.inter:
                inter[j, i] = True

    auto_lags = tuple(
        tuple(tau for tau in range(1, p + 1) if rng.random() < config.edge_probs.auto)
        for _ in range(n))

    static = np.zeros((nz, n), dtype=bool)
    for j in range(nz):
        for i in range(n):
            if rng.random() < config.edge_probs.static:
                static[j, i] = True

    structure = DbnStructure(n_x=n, n_z=nz, p=p, intra=intra, inter=inter,
                             auto_lags=auto_lags, static_edges=static)
    if config.model == "linear_gaussian" and config.stability_radius is not None:
        for attempt in range(1000):
            params = _draw_parameters(structure, config, attempt)
            if _companion_radius(structure, params) <= config.stability_radius:
                return structure, params
        raise ModelError(
            "could not draw a stable linear system within 1000 attempts; "
            "loosen weight_range, edge probabilities, or stability_radius")
    return structure, _draw_parameters(structure, config)


def _sharpen(rows: np.ndarray, gamma: float) -> np.ndarray:
    if gamma == 1.0:
        return rows
    powed = rows ** gamma
    return powed / powed.sum(axis=-1, keepdims=True)


def _companion_radius(structure: DbnStructure, params: ParameterSet) -> float:
    """Spectral radius of the lagged linear system's companion matrix.

    Same-slice weights never compound on their own (the intra graph is a
    DAG), so the one-step map is (I - W_intra^T)^{-1} applied to the
    lagged contributions.
    """
    n, p = structure.n_x, structure.max_lag()
    w_intra = np.zeros((n, n))
    lag_mats = [np.zeros((n, n)) for _ in range(p)]
    for i in range(n):
        fam = parents_of(structure, i)
        beta = params[i].beta
        for b, par in zip(beta, fam.parents):
            if par.kind == "intra":
                w_intra[par.index, i] = b
            elif par.kind == "inter":
                lag_mats[0][par.index, i] = b
            elif par.kind == "auto":
                lag_mats[par.index - 1][i, i] = b
    solve = np.linalg.inv(np.eye(n) - w_intra.T)
    blocks = [solve @ m.T for m in lag_mats]
    companion = np.zeros((n * p, n * p))
    companion[:n, :] = np.hstack(blocks)
    if p > 1:
        companion[n:, :n * (p - 1)] = np.eye(n * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(companion)))) if companion.size else 0.0


def _draw_parameters(structure: DbnStructure, config: GeneratorConfig,
                     attempt: int = 0) -> ParameterSet:
    rng = substream(config.seed, "params", attempt)
    families = []
    for node in range(structure.n_x):
        fam = parents_of(structure, node)
        k = len(fam.parents)
        if config.model == "cpt":
            arities = fam.arities((config.x_arity,) * structure.n_x, (config.z_arity,) * structure.n_z)
            for _ in range(1000):
                rows = _sharpen(rng.dirichlet([config.dirichlet_alpha] * config.x_arity,
                                              size=n_configurations(arities)),
                                config.sharpen)
                if _table_effects_ok(rows, arities, config.min_effect):
                    break
            else:
                raise ModelError(
                    f"node {node}: no table met min_effect={config.min_effect} "
                    "within 1000 draws")
            families.append(Cpt(table=rows))
        elif config.model == "factored":
            dyn = [p for p in fam.parents if p.kind != "static"]
            stat = [p for p in fam.parents if p.kind == "static"]
            families.append(FactoredCpt(
                table_dyn=_factor_table(rng, len(dyn), config),
                table_stat=_factor_table(rng, len(stat), config)))
        elif config.model == "noisy_or":
            lam0 = rng.uniform(*config.lambda0_range)
            lam = tuple(rng.uniform(*config.lambda_range) for _ in range(k))
            families.append(NoisyOr(lam0=float(lam0), lam=lam))
        elif config.model == "logistic":
            beta = _signed_weights(rng, k, config.weight_range)
            families.append(Logistic(beta0=float(rng.uniform(*config.intercept_range)), beta=beta))
        else:
            beta = _signed_weights(rng, k, config.weight_range)
            families.append(LinearGaussian(
                beta0=float(rng.uniform(*config.intercept_range)), beta=beta,
                sigma2=config.sigma ** 2))
    return ParameterSet(families=tuple(families))


def _table_effects_ok(rows: np.ndarray, arities: Sequence[int],
                      min_effect: float | None) -> bool:
    """Every parent must move the child distribution by >= min_effect somewhere."""
    if min_effect is None or not arities:
        return True
    step = 1
    for k, a in enumerate(arities):
        best = 0.0
        for cfg in range(rows.shape[0]):
            digit = (cfg // step) % a
            if digit != 0:
                continue
            for v in range(1, a):
                diff = 0.5 * float(np.abs(rows[cfg] - rows[cfg + v * step]).sum())
                best = max(best, diff)
        if best < min_effect:
            return False
        step *= a
    return True


def _factor_table(rng: np.random.Generator, n_parents: int, config: GeneratorConfig) -> np.ndarray:
    if n_parents == 0:
        return np.empty(0)
    for _ in range(1000):
        rows = _sharpen(rng.dirichlet([config.dirichlet_alpha] * 2, size=2 ** n_parents),
                        config.sharpen)
        if _table_effects_ok(rows, (2,) * n_parents, config.min_effect):
            return rows[:, 1]
    raise ModelError(f"no factor table met min_effect={config.min_effect} within 1000 draws")


def _signed_weights(rng: np.random.Generator, k: int, weight_range) -> np.ndarray:
    mag = rng.uniform(weight_range[0], weight_range[1], size=k)
    sign = rng.choice([-1.0, 1.0], size=k)
    return mag * sign


# ---------------------------------------------------------------------------
# Trajectory sampling


def noisy_or_kernel(lambda0: float, lambdas: Sequence[float], parent_values: Sequence[int]) -> float:
    """Probability of the child being 1: ``1 - (1 - lam0) prod (1 - lam_l)^{V_l}``."""
    if not 0.0 <= lambda0 <= 1.0 or any(not 0.0 <= l <= 1.0 for l in lambdas):
        raise ModelError("noisy-or lambdas must lie in [0, 1]")
    return NoisyOr(lam0=lambda0, lam=tuple(lambdas)).prob_one(parent_values)


def sample_trajectories(structure: DbnStructure, params: ParameterSet, n_traj: int,
                        horizon: int, seed: int,
                        x_arities: Sequence[int] | None = None,
                        z_arities: Sequence[int] | None = None) -> TrajectoryDataset:
    """Sample N trajectories of T+1 slices from a parameterized structure.

    The initial slice and the static covariates are uniform categorical
    (discrete) or standard normal (continuous), independent across
    variables.  Within each slice nodes are realized in topological
    order of the same-slice graph so intra parents exist before their
    children.  Auto lags reaching before time 0 are clamped to the
    variable's earliest value; those early transitions are exactly the
    ones the scoring drop rule excludes, so the clamp never biases a
    counted statistic.
    """
    kinds = {params.kind(i) for i in range(structure.n_x)}
    if len(params) != structure.n_x:
        raise ModelError("parameter set does not cover every node")
    continuous = kinds == {"linear_gaussian"}
    if not continuous and "linear_gaussian" in kinds:
        raise ModelError("cannot mix linear Gaussian and discrete kernels in one model")

    if continuous:
        domain = Domain("continuous")
        x_ar = z_ar = None
    else:
        x_ar = tuple(x_arities) if x_arities is not None else _infer_x_arities(structure, params)
        z_ar = tuple(z_arities) if z_arities is not None else (2,) * structure.n_z
        domain = Domain("discrete", x_arities=x_ar, z_arities=z_ar)

    families = [parents_of(structure, i) for i in range(structure.n_x)]
    _validate_params(structure, params, families, x_ar, z_ar)
    order = topological_order(structure.intra)
    cdf_tables = [np.cumsum(params[i].table, axis=1) if isinstance(params[i], Cpt) else None
                  for i in range(structure.n_x)]

    x = np.empty((n_traj, horizon + 1, structure.n_x),
                 dtype=np.float64 if continuous else np.int64)
    z = np.empty((n_traj, structure.n_z), dtype=np.float64 if continuous else np.int64)
    for n in range(n_traj):
        rng = substream(seed, "traj", n)
        if continuous:
            z[n] = rng.standard_normal(structure.n_z)
            x[n, 0] = rng.standard_normal(structure.n_x)
        else:
            z[n] = [rng.integers(a) for a in z_ar] if structure.n_z else []
            x[n, 0] = [rng.integers(a) for a in x_ar]
        for t in range(1, horizon + 1):
            for i in order:
                vals = _parent_values(x[n], z[n], families[i], t)
                x[n, t, i] = _draw_child(rng, params[i], families[i], vals,
                                         cdf_tables[i], x_ar, z_ar)
    return TrajectoryDataset(domain=domain, x=x, z=z)


def _infer_x_arities(structure: DbnStructure, params: ParameterSet) -> tuple[int, ...]:
    return tuple(
        params[i].arity if isinstance(params[i], Cpt) else 2
        for i in range(structure.n_x))


def _validate_params(structure, params, families, x_ar, z_ar):
    for i, fam in enumerate(families):
        par = params[i]
        k = len(fam.parents)
        if isinstance(par, Cpt):
            arities = fam.arities(x_ar, z_ar)
            if par.table.shape[0] != n_configurations(arities):
                raise ModelError(
                    f"node {i} CPT has {par.table.shape[0]} rows, family needs "
                    f"{n_configurations(arities)}")
        elif isinstance(par, FactoredCpt):
            n_dyn = sum(1 for p in fam.parents if p.kind != "static")
            n_stat = k - n_dyn
            if par.table_dyn.size != (2 ** n_dyn if n_dyn else 0) or \
               par.table_stat.size != (2 ** n_stat if n_stat else 0):
                raise ModelError(f"node {i} factored tables inconsistent with family")
        elif isinstance(par, NoisyOr):
            if len(par.lam) != k:
                raise ModelError(f"node {i} noisy-or needs {k} lambdas, got {len(par.lam)}")
        elif isinstance(par, (Logistic, LinearGaussian)):
            if par.beta.size != k:
                raise ModelError(f"node {i} kernel needs {k} weights, got {par.beta.size}")


def _parent_values(traj: np.ndarray, statics: np.ndarray, family: FamilySpec, t: int) -> list:
    vals = []
    for p in family.parents:
        if p.kind == "inter":
            vals.append(traj[t - 1, p.index])
        elif p.kind == "intra":
            vals.append(traj[t, p.index])
        elif p.kind == "auto":
            # lag reaching before time 0: clamp to the earliest observed value
            vals.append(traj[max(t - p.index, 0), family.node])
        else:
            vals.append(statics[p.index])
    return vals


def _draw_child(rng, par, family: FamilySpec, vals, cdf, x_ar, z_ar):
    if isinstance(par, Cpt):
        idx = configuration_index([int(v) for v in vals], family.arities(x_ar, z_ar))
        return int(np.searchsorted(cdf[idx], rng.random(), side="right"))
    if isinstance(par, FactoredCpt):
        dyn_vals = [int(v) for v, p in zip(vals, family.parents) if p.kind != "static"]
        stat_vals = [int(v) for v, p in zip(vals, family.parents) if p.kind == "static"]
        d_idx = configuration_index(dyn_vals, (2,) * len(dyn_vals)) if dyn_vals else 0
        s_idx = configuration_index(stat_vals, (2,) * len(stat_vals)) if stat_vals else 0
        return int(rng.random() < par.prob_one(d_idx, s_idx))
    if isinstance(par, NoisyOr):
        return int(rng.random() < par.prob_one([int(v) for v in vals]))
    if isinstance(par, Logistic):
        return int(rng.random() < par.prob_one(vals))
    return par.mean(vals) + np.sqrt(par.sigma2) * rng.standard_normal()


# ---------------------------------------------------------------------------
# Regimes


@dataclass(frozen=True)
class RegimeCell:
    """One generated benchmark cell: ground truth plus its sampled dataset."""

    triple: tuple[int, int, int]
    replicate: int
    seed: int
    structure: DbnStructure
    params: ParameterSet
    dataset: TrajectoryDataset


def regime_datasets(regime: RegimeSpec, template: GeneratorConfig,
                    replicates: int = 10, seed: int | None = None) -> Iterator[RegimeCell]:
    """Lazily yield one :class:`RegimeCell` per (triple, replicate).

    Cell seeds are derived from (seed, triple index, replicate); the
    default ten replicates per triple match the benchmark protocol.
    Lazy because the largest regime cells are hundreds of megabytes.
    """
    master = template.seed if seed is None else seed
    for ti, (n, n_traj, horizon) in enumerate(regime.triples):
        for rep in range(replicates):
            cell_seed = derive_seed(master, "cell", ti, rep)
            cfg = replace(template, n_x=n, seed=cell_seed)
            structure, params = sample_random_dbn(cfg)
            dataset = sample_trajectories(
                structure, params, n_traj, horizon, derive_seed(cell_seed, "data"),
                x_arities=(cfg.x_arity,) * n if cfg.discrete else None,
                z_arities=(cfg.z_arity,) * cfg.n_z if cfg.discrete else None)
            yield RegimeCell(triple=(n, n_traj, horizon), replicate=rep, seed=cell_seed,
                             structure=structure, params=params, dataset=dataset)
