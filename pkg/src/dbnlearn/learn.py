"""Structure(-and-parameter) learners.

Four learners share the :class:`LearnerReport` result type:

* :func:`exact_search`   -- provably optimal decomposable-score search;
  the same optimum as the integer-programming formulation (one parent
  set per vertex, cluster-style acyclicity), realized by dynamic
  programming over node subsets instead of a MIP solver.
* :func:`hill_climb`     -- steepest-ascent local search with restarts
  over add/delete/reverse moves, score deltas served from the cache.
* :func:`continuous_oneshot` -- one-shot least squares over weighted
  adjacencies with an augmented-Lagrangian acyclicity constraint and L1
  shrinkage, finished by threshold-and-repair.
* :func:`bounded_oneshot` -- the sign-split variant with weights bounded
  away from zero, solved exactly at desk scale by support enumeration.

``report.score`` is always the decomposable structure score that
rescoring the reported structure from scratch reproduces (the fit kind
for score-based learners, family log-likelihood for the continuous
ones); optimizer-internal objectives live in ``report.trace`` and
``report.extras``.  Reruns with the same seed yield bit-identical
reports; wall time is tracked on the object but never serialized.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

from .acyclicity import h_expm, h_expm_grad, threshold_and_repair
from .core import (
    DataError, DbnError, DbnStructure, DomainMismatchError, Parent, ParameterSet,
    SizeGuardError, OptimizerError, TrajectoryDataset, canonical_parents, is_acyclic,
    parents_of,
)
from .scoring import (
    BgeHyper, DirichletPrior, FamilyScorer, count_transitions, fit_linear_gaussian,
    mle_cpt,
)
from .simulate import substream


class CellTimeout(DbnError):
    """A learner exceeded its cooperative deadline."""


class Deadline:
    """Cooperative time budget checked between moves / outer iterations."""

    def __init__(self, seconds: float | None = None):
        self._end = None if seconds is None else time.monotonic() + seconds

    def check(self):
        if self._end is not None and time.monotonic() > self._end:
            raise CellTimeout("learner exceeded its time budget")


_NO_DEADLINE = Deadline(None)


# ---------------------------------------------------------------------------
# Configurations and reports


@dataclass(frozen=True)
class SearchConfig:
    """Knobs shared by the combinatorial learners."""

    score: str = "bic"
    max_intra: int = 2
    max_inter: int = 2
    max_auto: int = 1
    max_static: int = 1
    p: int = 1  # largest auto lag offered to the search
    restarts: int = 3
    move_budget: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if min(self.max_intra, self.max_inter, self.max_auto, self.max_static) < 0:
            raise ValueError("max parents must be >= 0")
        if self.move_budget <= 0 or self.restarts < 1:
            raise ValueError("need a positive move budget and at least one restart")


@dataclass(frozen=True)
class ContinuousConfig:
    """Augmented-Lagrangian one-shot optimizer settings."""

    lambda_w: float = 0.1
    lambda_a: float = 0.1
    w_threshold: float = 0.01
    rho0: float = 1.0
    rho_growth: float = 10.0
    h_tol: float = 1e-8
    max_outer: int = 100
    max_inner: int = 1000
    inner_tol: float = 1e-7
    max_lag: int = 1
    record_inner: bool = False  # keep per-iteration objectives in the trace
    seed: int = 0

    def __post_init__(self):
        if self.lambda_w < 0 or self.lambda_a < 0:
            raise ValueError("L1 strengths must be >= 0")
        if not (self.rho0 > 0 and self.h_tol > 0 and self.rho_growth > 1):
            raise ValueError("need rho0 > 0, tolerance > 0, growth > 1")
        if self.max_lag < 1:
            raise ValueError("max_lag must be >= 1")


@dataclass(frozen=True)
class BoundedConfig:
    """Sign-split bounded-weight formulation settings."""

    b_w: float = 0.1
    b_a: float = 0.1
    lambda_w_pos: float = 0.0
    lambda_w_neg: float = 0.0
    lambda_a_pos: float = 0.0
    lambda_a_neg: float = 0.0
    max_nodes: int = 4
    screen_threshold: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (self.b_w > 0 and self.b_a > 0):
            raise ValueError("weight bounds must be positive")


@dataclass
class LearnerReport:
    """Learned structure plus parameters, score, trace and reproducibility info."""

    learner: str
    structure: DbnStructure
    params: ParameterSet | None
    score: float
    trace: tuple
    seed: int
    flags: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    wall_ms: float = 0.0  # informational; excluded from serialization

    def to_json_dict(self) -> dict:
        from .io import params_to_json  # local import avoids a cycle
        out = {
            "learner": self.learner,
            "seed": self.seed,
            "score": self.score,
            "structure": self.structure.to_json_dict(),
            "params": None if self.params is None else params_to_json(self.params),
            "trace": list(self.trace),
            "flags": dict(sorted(self.flags.items())),
            "extras": {k: _jsonable(v) for k, v in sorted(self.extras.items())},
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=False) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, float):
        return v
    return v


def _fit_params(dataset: TrajectoryDataset, structure: DbnStructure) -> ParameterSet:
    """Plug-in maximum-likelihood parameters on a learned structure."""
    fams = []
    for i in range(structure.n_x):
        family = parents_of(structure, i)
        if dataset.domain.discrete:
            fams.append(mle_cpt(count_transitions(dataset, family)))
        else:
            fams.append(fit_linear_gaussian(dataset, i, family)[0])
    return ParameterSet(families=tuple(fams))


# ---------------------------------------------------------------------------
# Exact search


def _class_subsets(candidates: Sequence[Parent], limit: int):
    """All subsets of a candidate list up to ``limit``, by (size, lexicographic) order."""
    out = [()]
    for size in range(1, min(limit, len(candidates)) + 1):
        out.extend(itertools.combinations(candidates, size))
    return out


def exact_search(dataset: TrajectoryDataset, score: str = "bde",
                 config: SearchConfig | None = None,
                 prior: DirichletPrior | None = None, hyper: BgeHyper | None = None,
                 deadline: Deadline | None = None) -> LearnerReport:
    """Globally optimal structure under a decomposable score.

    Per node, the best completion over inter/auto/static subsets is
    tabulated for every admissible intra parent set (those classes never
    participate in a cycle, so they decouple given the intra choice);
    dynamic programming over node subsets then maximizes the total score
    subject to same-slice acyclicity.  Ties go to the parent sets
    enumerated first, i.e. smaller then lexicographically earlier sets.
    """
    t_start = time.perf_counter()
    config = config or SearchConfig(score=score)
    deadline = deadline or _NO_DEADLINE
    n = dataset.n_x
    if n > 12:
        raise SizeGuardError(f"exact search is guarded at 12 nodes, got {n}")
    if dataset.N * dataset.T == 0:
        raise DataError("cannot learn from an empty dataset")
    scorer = FamilyScorer(dataset, score, prior=prior, hyper=hyper)

    completions = []  # per node: {intra frozenset -> (score, full parent tuple)}
    for i in range(n):
        deadline.check()
        inter_sets = _class_subsets([Parent("inter", j) for j in range(n) if j != i], config.max_inter)
        auto_sets = _class_subsets([Parent("auto", t) for t in range(1, config.p + 1)], config.max_auto)
        static_sets = _class_subsets([Parent("static", j) for j in range(dataset.n_z)], config.max_static)
        intra_sets = _class_subsets([Parent("intra", j) for j in range(n) if j != i], config.max_intra)
        table = {}
        for intra in intra_sets:
            best = None
            for inter in inter_sets:
                for auto in auto_sets:
                    for stat in static_sets:
                        parents = canonical_parents(inter + intra + auto + stat)
                        value = scorer(i, parents)
                        if best is None or value > best[0]:
                            best = (value, parents)
            table[frozenset(p.index for p in intra)] = best
            deadline.check()
        completions.append(table)

    # g[i][mask] = best completion score of node i with intra parents inside mask
    full = (1 << n) - 1
    g = [dict() for _ in range(n)]
    pick = [dict() for _ in range(n)]
    for i in range(n):
        for mask in range(1 << n):
            if mask & (1 << i):
                continue
            members = frozenset(j for j in range(n) if mask & (1 << j))
            best, chosen = -np.inf, None
            if members in completions[i]:
                best, chosen = completions[i][members][0], members
            for j in range(n):
                if mask & (1 << j):
                    sub = mask & ~(1 << j)
                    if g[i][sub] > best:
                        best, chosen = g[i][sub], pick[i][sub]
            g[i][mask] = best
            pick[i][mask] = chosen

    # order DP: f[mask] = best score of the subnetwork on `mask`
    f = {0: 0.0}
    choice = {}
    for mask in range(1, full + 1):
        deadline.check()
        best, best_v = -np.inf, None
        for v in range(n):
            if not mask & (1 << v):
                continue
            sub = mask & ~(1 << v)
            value = f[sub] + g[v][sub]
            if value > best:
                best, best_v = value, v
        f[mask] = best
        choice[mask] = best_v

    intra = np.zeros((n, n), dtype=bool)
    inter = np.zeros((n, n), dtype=bool)
    auto_lags = [() for _ in range(n)]
    static = np.zeros((dataset.n_z, n), dtype=bool)
    mask = full
    while mask:
        v = choice[mask]
        sub = mask & ~(1 << v)
        intra_set = pick[v][sub]
        _, parents = completions[v][intra_set]
        for par in parents:
            if par.kind == "intra":
                intra[par.index, v] = True
            elif par.kind == "inter":
                inter[par.index, v] = True
            elif par.kind == "auto":
                auto_lags[v] = auto_lags[v] + (par.index,)
            else:
                static[par.index, v] = True
        mask = sub

    structure = DbnStructure(n_x=n, n_z=dataset.n_z, p=config.p, intra=intra,
                             inter=inter, auto_lags=tuple(auto_lags), static_edges=static)
    total = scorer.structure_score(structure)
    report = LearnerReport(
        learner="exact", structure=structure, params=_fit_params(dataset, structure),
        score=total, trace=({"step": 0, "score": total},), seed=config.seed,
        extras={"cache_entries": len(scorer.cache)})
    report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return report


# ---------------------------------------------------------------------------
# Hill climbing


def _structure_with(structure: DbnStructure, move) -> DbnStructure:
    kind = move[0]
    if kind in ("add_intra", "del_intra", "rev_intra"):
        intra = structure.intra.copy()
        _, j, i = move
        if kind == "add_intra":
            intra[j, i] = True
        elif kind == "del_intra":
            intra[j, i] = False
        else:
            intra[j, i] = False
            intra[i, j] = True
        return structure.replace(intra=intra)
    if kind in ("add_inter", "del_inter"):
        inter = structure.inter.copy()
        _, j, i = move
        inter[j, i] = kind == "add_inter"
        return structure.replace(inter=inter)
    if kind in ("add_auto", "del_auto"):
        _, i, tau = move
        lags = set(structure.auto_lags[i])
        lags.add(tau) if kind == "add_auto" else lags.discard(tau)
        auto = list(structure.auto_lags)
        auto[i] = tuple(sorted(lags))
        return structure.replace(auto_lags=tuple(auto))
    _, j, i = move
    static = structure.static_edges.copy()
    static[j, i] = kind == "add_static"
    return structure.replace(static_edges=static)


def _legal_moves(structure: DbnStructure, config: SearchConfig):
    """Deterministically ordered move list; intra additions/reversals are cycle-rejecting."""
    n = structure.n_x
    moves = []
    intra_in = structure.intra.sum(axis=0)
    inter_in = structure.inter.sum(axis=0)
    static_in = structure.static_edges.sum(axis=0)
    for j in range(n):
        for i in range(n):
            if i == j:
                continue
            if structure.intra[j, i]:
                moves.append(("del_intra", j, i))
                if intra_in[j] < config.max_intra:
                    trial = structure.intra.copy()
                    trial[j, i] = False
                    trial[i, j] = True
                    if is_acyclic(trial):
                        moves.append(("rev_intra", j, i))
            elif intra_in[i] < config.max_intra:
                trial = structure.intra.copy()
                trial[j, i] = True
                if is_acyclic(trial):
                    moves.append(("add_intra", j, i))
            if structure.inter[j, i]:
                moves.append(("del_inter", j, i))
            elif inter_in[i] < config.max_inter:
                moves.append(("add_inter", j, i))
    for i in range(n):
        lags = set(structure.auto_lags[i])
        for tau in range(1, config.p + 1):
            if tau in lags:
                moves.append(("del_auto", i, tau))
            elif len(lags) < config.max_auto:
                moves.append(("add_auto", i, tau))
    for j in range(structure.static_edges.shape[0]):
        for i in range(n):
            if structure.static_edges[j, i]:
                moves.append(("del_static", j, i))
            elif static_in[i] < config.max_static:
                moves.append(("add_static", j, i))
    return moves


def _affected_nodes(move) -> tuple[int, ...]:
    kind = move[0]
    if kind == "rev_intra":
        return (move[2], move[1])
    if kind in ("add_auto", "del_auto"):
        return (move[1],)
    return (move[2],)


def _random_start(dataset: TrajectoryDataset, config: SearchConfig,
                  rng: np.random.Generator, edge_prob: float = 0.2) -> DbnStructure:
    n = dataset.n_x
    order = rng.permutation(n)
    rank = np.empty(n, dtype=int)
    rank[order] = np.arange(n)
    intra = np.zeros((n, n), dtype=bool)
    inter = np.zeros((n, n), dtype=bool)
    static = np.zeros((dataset.n_z, n), dtype=bool)
    for a in range(n):
        for b in range(n):
            if a != b and rank[a] < rank[b] and rng.random() < edge_prob:
                intra[a, b] = True
            if a != b and rng.random() < edge_prob:
                inter[a, b] = True
    auto = tuple(
        tuple(t for t in range(1, config.p + 1) if rng.random() < edge_prob)
        for _ in range(n))
    for j in range(dataset.n_z):
        for i in range(n):
            if rng.random() < edge_prob:
                static[j, i] = True
    # trim to the per-class caps, keeping lowest-index parents
    for i in range(n):
        for mat, cap in ((intra, config.max_intra), (inter, config.max_inter)):
            idx = np.flatnonzero(mat[:, i])
            for j in idx[cap:]:
                mat[j, i] = False
        idx = np.flatnonzero(static[:, i]) if dataset.n_z else []
        for j in list(idx)[config.max_static:]:
            static[j, i] = False
    auto = tuple(ls[:config.max_auto] for ls in auto)
    return DbnStructure(n_x=n, n_z=dataset.n_z, p=config.p, intra=intra,
                        inter=inter, auto_lags=auto, static_edges=static)


def hill_climb(dataset: TrajectoryDataset, score: str = "bic",
               config: SearchConfig | None = None,
               prior: DirichletPrior | None = None, hyper: BgeHyper | None = None,
               deadline: Deadline | None = None,
               initial: DbnStructure | None = None) -> LearnerReport:
    """Steepest-ascent search over single-edge moves, best of seeded restarts.

    Moves: add/delete/reverse intra edge (cycle-rejecting), add/delete
    inter edge, auto lag, static edge.  Deltas rescore only the affected
    families through the shared cache.  Restart 0 starts from ``initial``
    (the empty graph by default), later restarts from random structures
    (edge probability 0.2).
    """
    t_start = time.perf_counter()
    config = config or SearchConfig(score=score)
    deadline = deadline or _NO_DEADLINE
    if dataset.N * dataset.T == 0:
        raise DataError("cannot learn from an empty dataset")
    scorer = FamilyScorer(dataset, score, prior=prior, hyper=hyper)

    best_structure, best_score, best_trace, moves_used = None, -np.inf, (), 0
    for restart in range(config.restarts):
        if restart == 0:
            structure = initial if initial is not None \
                else DbnStructure.empty(dataset.n_x, dataset.n_z, config.p)
        else:
            structure = _random_start(dataset, config, substream(config.seed, "restart", restart))
        node_scores = [scorer(i, parents_of(structure, i).parents) for i in range(dataset.n_x)]
        current = float(sum(node_scores))
        trace = [{"restart": restart, "step": 0, "score": current}]
        for step in range(1, config.move_budget + 1):
            deadline.check()
            best_move, best_delta = None, 0.0
            for move in _legal_moves(structure, config):
                trial = _structure_with(structure, move)
                delta = sum(
                    scorer(v, parents_of(trial, v).parents) - node_scores[v]
                    for v in _affected_nodes(move))
                if delta > best_delta + 1e-12:
                    best_move, best_delta = move, delta
            if best_move is None:
                break
            structure = _structure_with(structure, best_move)
            for v in _affected_nodes(best_move):
                node_scores[v] = scorer(v, parents_of(structure, v).parents)
            current = float(sum(node_scores))
            trace.append({"restart": restart, "step": step, "score": current})
            moves_used += 1
        if current > best_score:
            best_structure, best_score, best_trace = structure, current, tuple(trace)

    report = LearnerReport(
        learner="hill", structure=best_structure,
        params=_fit_params(dataset, best_structure), score=best_score,
        trace=best_trace, seed=config.seed,
        extras={"cache_entries": len(scorer.cache), "moves": moves_used})
    report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return report


# ---------------------------------------------------------------------------
# Continuous one-shot (augmented Lagrangian)


def _sem_matrices(dataset: TrajectoryDataset, max_lag: int):
    if dataset.domain.discrete:
        raise DomainMismatchError("the continuous one-shot learner needs a continuous dataset")
    if dataset.T < max_lag:
        raise DataError(f"horizon T={dataset.T} too short for max lag {max_lag}")
    t0 = max(max_lag, dataset.burn_in + 1)
    ts = np.arange(t0, dataset.T + 1)
    y = dataset.x[:, ts, :].reshape(-1, dataset.n_x)
    lags = np.hstack([dataset.x[:, ts - tau, :].reshape(-1, dataset.n_x)
                      for tau in range(1, max_lag + 1)])
    return y, lags


def _soft(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def continuous_oneshot(dataset: TrajectoryDataset, config: ContinuousConfig | None = None,
                       deadline: Deadline | None = None) -> LearnerReport:
    """One-shot SEM fit: L1-penalized least squares with an acyclicity constraint.

    Minimizes ``(1/2M)||Y - Y W - L A||_F^2 + lambda_w ||W||_1 +
    lambda_a ||A||_1`` subject to ``h(W) = 0`` by an augmented
    Lagrangian: a monotone proximal-gradient inner solver
    (soft-thresholding, backtracking line search, zero-diagonal
    projection on W), with the multiplier update ``alpha += rho h`` and
    ``rho *= growth`` per outer round until ``h < tol``.  The final
    support is thresholded and cycle-repaired, linear-Gaussian
    parameters are refit on it, and the raw weight matrices stay in
    ``extras`` for ranking-based evaluation.
    """
    t_start = time.perf_counter()
    config = config or ContinuousConfig()
    deadline = deadline or _NO_DEADLINE
    y, lag_cols = _sem_matrices(dataset, config.max_lag)
    m, n = y.shape
    if m == 0:
        raise DataError("no usable transitions")

    w = np.zeros((n, n))
    a = np.zeros((n * config.max_lag, n))
    alpha, rho = 0.0, config.rho0
    trace = []
    converged = False

    def smooth(wm, am, alpha, rho):
        # overshooting trial steps may overflow; backtracking rejects them
        with np.errstate(over="ignore", invalid="ignore"):
            resid = y - y @ wm - lag_cols @ am
            h = h_expm(wm)
            value = 0.5 / m * float(np.sum(resid * resid)) + alpha * h + 0.5 * rho * h * h
            gw = -(y.T @ resid) / m + (alpha + rho * h) * h_expm_grad(wm)
            ga = -(lag_cols.T @ resid) / m
        return value, gw, ga, h

    def penalty(wm, am):
        return config.lambda_w * float(np.abs(wm).sum()) + config.lambda_a * float(np.abs(am).sum())

    step = 1.0
    for outer in range(config.max_outer):
        value, gw, ga, h = smooth(w, a, alpha, rho)
        inner_objectives = [value + penalty(w, a)]
        for inner in range(config.max_inner):
            if inner % 25 == 0:
                deadline.check()
            while True:
                w_new = _soft(w - step * gw, step * config.lambda_w)
                np.fill_diagonal(w_new, 0.0)
                a_new = _soft(a - step * ga, step * config.lambda_a)
                val_new, gw_new, ga_new, h_new = smooth(w_new, a_new, alpha, rho)
                dw, da = w_new - w, a_new - a
                quad = value + float(np.sum(gw * dw) + np.sum(ga * da)) \
                    + 0.5 / step * (float(np.sum(dw * dw)) + float(np.sum(da * da)))
                # a non-finite trial just means the step overshot: backtrack
                if np.isfinite(val_new) and val_new <= quad + 1e-15:
                    break
                if step < 1e-14:
                    if not np.isfinite(val_new):
                        raise OptimizerError(
                            f"inner solve diverged at outer {outer}; trace: {trace}")
                    break
                step *= 0.5
            move = max(float(np.abs(dw).max(initial=0.0)), float(np.abs(da).max(initial=0.0)))
            w, a, value, gw, ga, h = w_new, a_new, val_new, gw_new, ga_new, h_new
            step = min(step * 2.0, 1e6)
            inner_objectives.append(value + penalty(w, a))
            if move < config.inner_tol:
                break
        entry = {"outer": outer, "objective": value + penalty(w, a), "h": h, "rho": rho}
        if config.record_inner:
            entry["inner_objectives"] = inner_objectives
        trace.append(entry)
        deadline.check()
        if h < config.h_tol:
            converged = True
            break
        alpha += rho * h
        rho *= config.rho_growth

    support = threshold_and_repair(w, config.w_threshold)
    w_final = np.where(support, w, 0.0)
    a_blocks = [a[tau * n:(tau + 1) * n, :] for tau in range(config.max_lag)]
    inter = np.abs(a_blocks[0]) >= config.w_threshold if config.w_threshold > 0 \
        else a_blocks[0] != 0.0
    np.fill_diagonal(inter, False)
    auto = []
    for i in range(n):
        lags = tuple(tau + 1 for tau in range(config.max_lag)
                     if abs(a_blocks[tau][i, i]) >= max(config.w_threshold, np.finfo(float).tiny))
        auto.append(lags)
    structure = DbnStructure(
        n_x=n, n_z=dataset.n_z, p=config.max_lag, intra=support, inter=inter,
        auto_lags=tuple(auto), static_edges=np.zeros((dataset.n_z, n), dtype=bool))

    scorer = FamilyScorer(dataset, "ll")
    total = scorer.structure_score(structure)
    report = LearnerReport(
        learner="dynotears", structure=structure,
        params=_fit_params(dataset, structure), score=total, trace=tuple(trace),
        seed=config.seed, flags={"converged": converged},
        extras={"w": w_final, "a": np.vstack(a_blocks) if a_blocks else a,
                "objective": trace[-1]["objective"], "h": trace[-1]["h"]})
    report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return report


# ---------------------------------------------------------------------------
# Bounded-weight one-shot


def bounded_oneshot(dataset: TrajectoryDataset, config: BoundedConfig | None = None,
                    deadline: Deadline | None = None) -> LearnerReport:
    """Exact sign-split bounded-weight learner at desk scale (lag 1 only).

    Every candidate support (intra DAG x inter set) and sign assignment
    is solved as a bound-constrained least squares (weights at least
    ``b_w`` / ``b_a`` in magnitude; at most one sign per edge), plus L0
    penalties per sign class; the per-node tables then feed the same
    subset DP as the exact search, so the returned support is the global
    minimizer.  Every active edge satisfies its bound by construction.
    """
    t_start = time.perf_counter()
    config = config or BoundedConfig()
    deadline = deadline or _NO_DEADLINE
    y, x_prev = _sem_matrices(dataset, 1)
    m, n = y.shape
    if n > config.max_nodes:
        raise SizeGuardError(f"bounded search is guarded at {config.max_nodes} nodes, got {n}")

    def node_candidates(i):
        intra = [j for j in range(n) if j != i]
        inter = list(range(n))
        if config.screen_threshold is not None:
            yc = y[:, i] - y[:, i].mean()

            def keep(col):
                c = col - col.mean()
                denom = float(np.linalg.norm(yc) * np.linalg.norm(c))
                return denom > 0 and abs(float(np.dot(yc, c))) / denom >= config.screen_threshold

            intra = [j for j in intra if keep(y[:, j])]
            inter = [j for j in inter if keep(x_prev[:, j])]
        return intra, inter

    def solve_family(i, intra_js, inter_js):
        """Min SSE + L0 penalties over sign assignments for one support."""
        cols = [y[:, j] for j in intra_js] + [x_prev[:, j] for j in inter_js]
        if not cols:
            sse = float(np.dot(y[:, i], y[:, i]))
            return sse, np.empty(0)
        design = np.column_stack(cols)
        k = design.shape[1]
        # interior shortcut: an unconstrained optimum clearing every bound is optimal
        beta, *_ = np.linalg.lstsq(design, y[:, i], rcond=None)
        req = np.array([config.b_w] * len(intra_js) + [config.b_a] * len(inter_js))
        if np.all(np.abs(beta) >= req):
            resid = y[:, i] - design @ beta
            return float(np.dot(resid, resid)), beta
        best = None
        for signs in itertools.product((1.0, -1.0), repeat=k):
            lo = np.where(np.asarray(signs) > 0, req, -np.inf)
            hi = np.where(np.asarray(signs) > 0, np.inf, -req)
            sol = scipy.optimize.lsq_linear(design, y[:, i], bounds=(lo, hi), method="bvls")
            resid = y[:, i] - design @ sol.x
            sse = float(np.dot(resid, resid))
            if best is None or sse < best[0]:
                best = (sse, sol.x)
        return best

    def sign_penalty(weights, intra_js, inter_js):
        pen = 0.0
        for idx in range(len(intra_js)):
            pen += config.lambda_w_pos if weights[idx] > 0 else config.lambda_w_neg
        for idx in range(len(inter_js)):
            w = weights[len(intra_js) + idx]
            pen += config.lambda_a_pos if w > 0 else config.lambda_a_neg
        return pen

    tables = []  # per node: {intra frozenset -> (cost, intra_js, inter_js, weights)}
    for i in range(n):
        intra_cand, inter_cand = node_candidates(i)
        table = {}
        for r in range(len(intra_cand) + 1):
            for intra_js in itertools.combinations(intra_cand, r):
                deadline.check()
                best = None
                for s in range(len(inter_cand) + 1):
                    for inter_js in itertools.combinations(inter_cand, s):
                        sse, weights = solve_family(i, intra_js, inter_js)
                        cost = sse + sign_penalty(weights, intra_js, inter_js)
                        if best is None or cost < best[0]:
                            best = (cost, intra_js, inter_js, weights)
                table[frozenset(intra_js)] = best
        tables.append(table)

    # subset DP (maximize negative cost) over intra acyclicity
    full = (1 << n) - 1
    g = [dict() for _ in range(n)]
    pick = [dict() for _ in range(n)]
    for i in range(n):
        for mask in range(1 << n):
            if mask & (1 << i):
                continue
            members = frozenset(j for j in range(n) if mask & (1 << j))
            best, chosen = -np.inf, None
            if members in tables[i]:
                best, chosen = -tables[i][members][0], members
            for j in range(n):
                if mask & (1 << j):
                    sub = mask & ~(1 << j)
                    if g[i][sub] > best:
                        best, chosen = g[i][sub], pick[i][sub]
            g[i][mask] = best
            pick[i][mask] = chosen
    f = {0: 0.0}
    choice = {}
    for mask in range(1, full + 1):
        best, best_v = -np.inf, None
        for v in range(n):
            if mask & (1 << v):
                sub = mask & ~(1 << v)
                value = f[sub] + g[v][sub]
                if value > best:
                    best, best_v = value, v
        f[mask] = best
        choice[mask] = best_v

    w_mat = np.zeros((n, n))
    a_mat = np.zeros((n, n))
    mask = full
    while mask:
        v = choice[mask]
        sub = mask & ~(1 << v)
        cost, intra_js, inter_js, weights = tables[v][pick[v][sub]]
        for idx, j in enumerate(intra_js):
            w_mat[j, v] = weights[idx]
        for idx, j in enumerate(inter_js):
            a_mat[j, v] = weights[len(intra_js) + idx]
        mask = sub

    intra = w_mat != 0.0
    inter = a_mat != 0.0
    np.fill_diagonal(inter, False)
    auto = tuple((1,) if a_mat[i, i] != 0.0 else () for i in range(n))
    structure = DbnStructure(
        n_x=n, n_z=dataset.n_z, p=1, intra=intra, inter=inter, auto_lags=auto,
        static_edges=np.zeros((dataset.n_z, n), dtype=bool))
    scorer = FamilyScorer(dataset, "ll")
    total = scorer.structure_score(structure)
    report = LearnerReport(
        learner="bounded", structure=structure,
        params=_fit_params(dataset, structure), score=total,
        trace=({"step": 0, "objective": -f[full]},), seed=config.seed,
        extras={"w": w_mat, "a": a_mat, "objective": -f[full],
                "empty_objective": float(sum(np.dot(y[:, i], y[:, i]) for i in range(n)))})
    report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return report


# ---------------------------------------------------------------------------
# Registry used by the CLI and the benchmark harness


def _config_from(cls, seed, hyper, defaults=None):
    allowed = set(cls.__dataclass_fields__) - {"seed"}
    unknown = set(hyper) - allowed
    if unknown:
        raise ValueError(f"unknown hyperparameters for this learner: {sorted(unknown)}")
    kwargs = dict(defaults or {})
    kwargs.update(hyper)
    return cls(seed=seed, **kwargs)


def _run_exact(dataset, seed, deadline, **hp):
    cfg = _config_from(SearchConfig, seed, hp, {"score": "bde"})
    return exact_search(dataset, cfg.score, cfg, deadline=deadline)


def _run_hill(dataset, seed, deadline, **hp):
    cfg = _config_from(SearchConfig, seed, hp, {"score": "bic"})
    return hill_climb(dataset, cfg.score, cfg, deadline=deadline)


def _run_dynotears(dataset, seed, deadline, **hp):
    return continuous_oneshot(dataset, _config_from(ContinuousConfig, seed, hp), deadline=deadline)


def _run_bounded(dataset, seed, deadline, **hp):
    return bounded_oneshot(dataset, _config_from(BoundedConfig, seed, hp), deadline=deadline)


LEARNERS: dict[str, Callable] = {
    "exact": _run_exact,
    "hill": _run_hill,
    "dynotears": _run_dynotears,
    "bounded": _run_bounded,
}


def run_learner(name: str, dataset: TrajectoryDataset, seed: int = 0,
                deadline: Deadline | None = None, **hyper) -> LearnerReport:
    """Dispatch by learner name; unknown names list the valid ones."""
    if name not in LEARNERS:
        raise ValueError(f"unknown learner {name!r}; valid names: {', '.join(sorted(LEARNERS))}")
    return LEARNERS[name](dataset, seed, deadline or _NO_DEADLINE, **hyper)
