"""Sufficient statistics, likelihoods, information criteria and Bayesian scores.

Every score here is decomposable: the score of a structure is the sum of
independent per-(node, parent set) family terms, which is what makes the
cache and the exact search work.  ``family_score`` returns *higher is
better* values for every kind:

* ``ll``   -- maximized family log-likelihood,
* ``aic`` / ``aicc`` / ``bic`` -- minus the information criterion
  ``-2 log L + C`` (note the AICc parsimony term is ``(N + k)/(N - k - 2)``
  without a leading ``k``; unusual, but kept as is -- see
  :func:`information_criterion`),
* ``bde``  -- log Dirichlet-multinomial marginal likelihood,
* ``bge``  -- log normal-Wishart marginal likelihood of the
  child-given-parents regression.

Effective sample sizes count usable transitions only: targets from
``max(family min time, burn_in + 1)`` to ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .core import (
    Cpt, DataError, DbnStructure, DomainMismatchError, FactoredCpt, FamilySpec,
    LinearGaussian, Logistic, ModelError, Parent, ParameterSet, TrajectoryDataset,
    UnderdeterminedError, canonical_parents, n_configurations, parents_of,
)

SCORE_KINDS = ("ll", "aic", "aicc", "bic", "bde", "bge")


# ---------------------------------------------------------------------------
# Counting


@dataclass(frozen=True)
class CountTable:
    """Transition counts of one family: rows = parent configurations, cols = child values."""

    node: int
    family: FamilySpec
    arities: tuple[int, ...]
    child_arity: int
    counts: np.ndarray  # (n_configs, child_arity) int64

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (n_configurations(self.arities), self.child_arity):
            raise ModelError("count table shape inconsistent with arities")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def totals(self) -> np.ndarray:
        """Per-configuration totals N_xi."""
        return self.counts.sum(axis=1)

    @property
    def grand_total(self) -> int:
        return int(self.counts.sum())


def count_transitions(dataset: TrajectoryDataset, family: FamilySpec) -> CountTable:
    """Tally every usable transition by parent configuration and child value.

    Transitions whose auto lags reach before the first observation (or
    into the burn-in window) are skipped, so the grand total is
    ``N * (T - first_usable + 1)``.
    """
    if not dataset.domain.discrete:
        raise DomainMismatchError("count_transitions needs a discrete dataset")
    arities = dataset.family_arities(family)
    child_arity = dataset.domain.x_arities[family.node]
    n_cfg = n_configurations(arities)
    t0 = dataset.first_usable_t(family)
    counts = np.zeros((n_cfg, child_arity), dtype=np.int64)
    if t0 <= dataset.T:
        ts = np.arange(t0, dataset.T + 1)
        pcols = dataset.parent_columns(family, ts)
        child = dataset.x[:, ts, family.node]
        idx = np.zeros((dataset.N, ts.size), dtype=np.int64)
        base = 1
        for k, a in enumerate(arities):
            idx += pcols[:, :, k].astype(np.int64) * base
            base *= a
        flat = idx * child_arity + child
        counts = np.bincount(flat.ravel(), minlength=n_cfg * child_arity).reshape(n_cfg, child_arity)
    return CountTable(node=family.node, family=family, arities=arities,
                      child_arity=child_arity, counts=counts)


# ---------------------------------------------------------------------------
# Maximum likelihood estimation


def mle_cpt(counts: CountTable, smoothing: "DirichletPrior | None" = None) -> Cpt:
    """Count-ratio table estimate.

    With ``smoothing=None``, rows are ``N_k / N_xi`` and configurations
    never observed fall back to the uniform row.  With a Dirichlet prior,
    every row is the posterior mean ``(alpha_k + N_k) / sum(alpha + N)``.
    """
    c = counts.counts.astype(float)
    if smoothing is not None:
        c = c + smoothing.pseudo_counts(c.shape[0], c.shape[1])
    totals = c.sum(axis=1)
    table = np.full_like(c, 1.0 / counts.child_arity)
    seen = totals > 0
    table[seen] = c[seen] / totals[seen, None]
    return Cpt(table=table)


def mle_factored(dataset: TrajectoryDataset, node: int,
                 dynamic_family: FamilySpec, static_family: FamilySpec) -> FactoredCpt:
    """Factored kernel estimate for a binary child: two independent count ratios.

    The dynamic factor is the conditional mean of the child per dynamic
    configuration, the static factor the conditional mean per static
    configuration; each empty family contributes the constant factor 1.
    Both ratios tally the same transitions (the later first-usable time
    of the two families).  Unseen configurations fall back to 0.5.  The
    product kernel is clipped into [0, 1] at evaluation; ``clipped``
    records whether any fitted product needed it.
    """
    if not dataset.domain.discrete:
        raise DomainMismatchError("mle_factored needs a discrete dataset")
    if dataset.domain.x_arities[node] != 2:
        raise ModelError("factored kernel is defined for binary children")
    if any(p.kind == "static" for p in dynamic_family.parents):
        raise ModelError("dynamic family must not contain static parents")
    if any(p.kind != "static" for p in static_family.parents):
        raise ModelError("static family must contain only static parents")
    t0 = max(dataset.first_usable_t(dynamic_family), dataset.first_usable_t(static_family))

    def ratios(fam: FamilySpec) -> np.ndarray:
        if not fam.parents:
            return np.empty(0)
        arities = dataset.family_arities(fam)
        n_cfg = n_configurations(arities)
        ones = np.zeros(n_cfg)
        total = np.zeros(n_cfg)
        if t0 <= dataset.T:
            ts = np.arange(t0, dataset.T + 1)
            pcols = dataset.parent_columns(fam, ts)
            child = dataset.x[:, ts, node]
            idx = np.zeros((dataset.N, ts.size), dtype=np.int64)
            base = 1
            for k, a in enumerate(arities):
                idx += pcols[:, :, k].astype(np.int64) * base
                base *= a
            ones = np.bincount(idx.ravel(), weights=child.ravel().astype(float), minlength=n_cfg)
            total = np.bincount(idx.ravel(), minlength=n_cfg).astype(float)
        out = np.full(n_cfg, 0.5)
        seen = total > 0
        out[seen] = ones[seen] / total[seen]
        return out

    table_dyn = ratios(dynamic_family)
    table_stat = ratios(static_family)
    clipped = False
    if table_dyn.size and table_stat.size:
        prod = np.outer(table_dyn, table_stat)
        clipped = bool(np.any(prod > 1.0))
    return FactoredCpt(table_dyn=table_dyn, table_stat=table_stat, clipped=clipped)


def family_loglik_from_counts(counts: CountTable) -> float:
    """Plug-in log-likelihood at the count-ratio maximum: sum N log(N / N_xi)."""
    c = counts.counts.astype(float)
    totals = c.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(c > 0, c / np.maximum(totals, 1.0)[:, None], 1.0)
    return float(np.sum(c * np.log(ratio)))


def loglik_cpt(dataset: TrajectoryDataset, structure: DbnStructure, params: ParameterSet) -> float:
    """Log-likelihood of every usable transition under per-node CPTs.

    Returns ``-inf`` when some observed transition has probability zero.
    """
    total = 0.0
    for node in range(structure.n_x):
        family = parents_of(structure, node)
        cpt = params[node]
        if not isinstance(cpt, Cpt):
            raise ModelError(f"node {node} parameters are not a CPT")
        counts = count_transitions(dataset, family)
        if cpt.table.shape != counts.counts.shape:
            raise ModelError(
                f"node {node} CPT covers {cpt.table.shape[0]} configurations, "
                f"family has {counts.counts.shape[0]}")
        c = counts.counts
        with np.errstate(divide="ignore"):
            logt = np.log(cpt.table)
        seen = c > 0
        if np.any(seen & np.isneginf(logt)):
            return float("-inf")
        total += float(np.sum(c[seen] * logt[seen]))
    return total


# ---------------------------------------------------------------------------
# Logistic fitting


def logistic_design(dataset: TrajectoryDataset, family: FamilySpec) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix (with leading intercept column) and binary targets of a family."""
    t0 = dataset.first_usable_t(family)
    if t0 > dataset.T:
        return np.empty((0, 1 + len(family.parents))), np.empty(0)
    ts = np.arange(t0, dataset.T + 1)
    y = dataset.x[:, ts, family.node].astype(float).ravel()
    pcols = dataset.parent_columns(family, ts).astype(float).reshape(y.size, len(family.parents))
    design = np.hstack([np.ones((len(y), 1)), pcols])
    return design, y


def logistic_objective(beta: np.ndarray, design: np.ndarray, y: np.ndarray,
                       ridge: float) -> tuple[float, np.ndarray]:
    """Penalized log-likelihood ``sum[y s - log(1 + e^s)] - ridge ||beta||^2`` and gradient."""
    s = design @ beta
    # log(1 + e^s) evaluated stably on both tails
    softplus = np.where(s > 0, s + np.log1p(np.exp(-np.abs(s))), np.log1p(np.exp(-np.abs(s))))
    value = float(np.dot(y, s) - softplus.sum() - ridge * float(np.dot(beta, beta)))
    p = np.empty_like(s)
    pos = s >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    p[~pos] = e / (1.0 + e)
    grad = design.T @ (y - p) - 2.0 * ridge * beta
    return value, grad


_LOGISTIC_GUARD = 30.0  # |beta| beyond this saturates the sigmoid: separable data
_LOGISTIC_FALLBACK_RIDGE = 1e-6


def fit_logistic(dataset: TrajectoryDataset, node: int, family: FamilySpec,
                 ridge: float = 0.0, tol: float = 1e-8,
                 max_iter: int = 10_000) -> tuple[Logistic, float]:
    """Maximize the logistic transition log-likelihood by gradient ascent.

    Deterministic: backtracking (Armijo) line search from beta = 0,
    stopping when the gradient norm drops below ``tol`` or after
    ``max_iter`` steps.  Perfectly separable data makes the unpenalized
    optimum escape to infinity; when any coefficient passes the guard
    magnitude the fit restarts with a small ridge and flags the result.
    Returns the fitted kernel and the attained (unpenalized)
    log-likelihood.
    """
    if not dataset.domain.discrete:
        raise DomainMismatchError("fit_logistic needs a discrete dataset")
    if dataset.domain.x_arities[node] != 2:
        raise ModelError("logistic kernel is defined for binary children")
    if family.node != node:
        raise ModelError("family spec does not belong to the requested node")
    design, y = logistic_design(dataset, family)
    beta, guard = _ascend_logistic(design, y, ridge, tol, max_iter)
    if guard and ridge < _LOGISTIC_FALLBACK_RIDGE:
        beta, _ = _ascend_logistic(design, y, _LOGISTIC_FALLBACK_RIDGE, tol, max_iter)
    loglik, _ = logistic_objective(beta, design, y, 0.0)
    model = Logistic(beta0=float(beta[0]), beta=beta[1:], separable_guard=guard)
    return model, loglik


def _ascend_logistic(design, y, ridge, tol, max_iter):
    beta = np.zeros(design.shape[1])
    if design.shape[0] == 0:
        return beta, False
    value, grad = logistic_objective(beta, design, y, ridge)
    step = 1.0 / max(1.0, float(np.abs(design).sum(axis=1).max()))
    for _ in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            break
        trial = step * 2.0
        while True:
            cand = beta + trial * grad
            cand_value, cand_grad = logistic_objective(cand, design, y, ridge)
            if cand_value >= value + 1e-4 * trial * gnorm * gnorm or trial < 1e-18:
                break
            trial *= 0.5
        beta, value, grad, step = cand, cand_value, cand_grad, trial
        if np.max(np.abs(beta)) > _LOGISTIC_GUARD:
            return beta, True
    return beta, False


# ---------------------------------------------------------------------------
# Linear Gaussian fitting

_LSTSQ_RIDGE = 1e-10  # rank safety only; far below any signal scale
_SIGMA2_FLOOR = 1e-300  # keeps exact fits representable (sigma2 must stay positive)


def gaussian_design(dataset: TrajectoryDataset, family: FamilySpec) -> tuple[np.ndarray, np.ndarray]:
    if dataset.domain.discrete:
        raise DomainMismatchError("gaussian design needs a continuous dataset")
    t0 = dataset.first_usable_t(family)
    if t0 > dataset.T:
        return np.empty((0, 1 + len(family.parents))), np.empty(0)
    ts = np.arange(t0, dataset.T + 1)
    y = dataset.x[:, ts, family.node].ravel()
    pcols = dataset.parent_columns(family, ts).reshape(y.size, len(family.parents))
    return np.hstack([np.ones((len(y), 1)), pcols]), y


def fit_linear_gaussian(dataset: TrajectoryDataset, node: int,
                        family: FamilySpec) -> tuple[LinearGaussian, float]:
    """Least-squares fit of a linear Gaussian family; returns kernel and log-likelihood.

    Normal equations carry a tiny ridge for rank safety; the noise
    variance is the mean squared residual (floored at a representable
    minimum so exact fits stay valid).
    """
    if family.node != node:
        raise ModelError("family spec does not belong to the requested node")
    design, y = gaussian_design(dataset, family)
    m, k = design.shape
    if m < k:
        raise UnderdeterminedError(f"{m} usable transitions for {k} parameters")
    gram = design.T @ design + _LSTSQ_RIDGE * np.eye(k)
    beta = np.linalg.solve(gram, design.T @ y)
    resid = y - design @ beta
    sigma2 = max(float(np.dot(resid, resid)) / m, _SIGMA2_FLOOR)
    loglik = -0.5 * m * math.log(2.0 * math.pi * sigma2) - 0.5 * float(np.dot(resid, resid)) / sigma2
    return LinearGaussian(beta0=float(beta[0]), beta=beta[1:], sigma2=sigma2), loglik


# ---------------------------------------------------------------------------
# Information criteria


def information_criterion(loglik: float, k: int, n_eff: int, kind: str) -> float:
    """General model-selection criterion ``-2 log L + C``; lower is better.

    Parsimony terms: AIC ``2k``; AICc ``(N + k)/(N - k - 2)`` exactly as
    printed in the source formulation (it lacks the conventional leading
    ``k`` -- kept deliberately, see README); BIC ``k log N``.
    """
    kind = kind.lower()
    if kind == "aic":
        c = 2.0 * k
    elif kind == "aicc":
        if n_eff <= k + 2:
            raise DataError(f"AICc needs n_eff > k + 2 (got n_eff={n_eff}, k={k})")
        c = (n_eff + k) / (n_eff - k - 2)
    elif kind == "bic":
        c = k * math.log(max(n_eff, 1))
    else:
        raise ValueError(f"unknown criterion kind {kind!r}")
    return -2.0 * loglik + c


# ---------------------------------------------------------------------------
# Bayesian Dirichlet score


@dataclass(frozen=True)
class DirichletPrior:
    """Equivalent-sample-size Dirichlet prior spread uniformly over cells.

    Pseudo-count per (configuration, value) cell is
    ``ess / (n_configs * arity)`` unless an explicit table is supplied.
    """

    ess: float = 1.0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.table is None and not self.ess > 0:
            raise ModelError("equivalent sample size must be positive")
        if self.table is not None:
            t = np.asarray(self.table, dtype=float)
            if np.any(t <= 0):
                raise ModelError("pseudo-counts must be positive")
            t.setflags(write=False)
            object.__setattr__(self, "table", t)

    def pseudo_counts(self, n_configs: int, arity: int) -> np.ndarray:
        if self.table is not None:
            if self.table.shape != (n_configs, arity):
                raise ModelError(f"prior table shape {self.table.shape} != {(n_configs, arity)}")
            return self.table
        return np.full((n_configs, arity), self.ess / (n_configs * arity))


def bde_family_score(counts: CountTable, prior: DirichletPrior | None = None) -> float:
    """Log marginal likelihood of one family under the Dirichlet prior.

    Exact value of the Dirichlet-multinomial integral:
    ``sum_xi [lgamma(A) - lgamma(A + N_xi)] + sum_k [lgamma(a_k + N_k) - lgamma(a_k)]``
    with ``A = sum_k a_k``.  Zero data gives score 0; the structure score
    is the sum of family scores over nodes.
    """
    prior = prior or DirichletPrior(1.0)
    alpha = prior.pseudo_counts(counts.counts.shape[0], counts.counts.shape[1])
    n = counts.counts.astype(float)
    a_tot = alpha.sum(axis=1)
    return float(
        np.sum(gammaln(a_tot) - gammaln(a_tot + n.sum(axis=1)))
        + np.sum(gammaln(alpha + n) - gammaln(alpha))
    )


def dirichlet_posterior(counts: CountTable, prior: DirichletPrior | None = None) -> np.ndarray:
    """Posterior pseudo-counts ``alpha_k + N_k`` per configuration."""
    prior = prior or DirichletPrior(1.0)
    alpha = prior.pseudo_counts(counts.counts.shape[0], counts.counts.shape[1])
    return alpha + counts.counts


def sample_cpt_from_posterior(posterior: np.ndarray, rng: np.random.Generator) -> Cpt:
    """Draw an entire CPT, one Dirichlet row per configuration."""
    rows = np.stack([rng.dirichlet(row) for row in np.asarray(posterior, dtype=float)])
    return Cpt(table=rows)


# ---------------------------------------------------------------------------
# Bayesian Gaussian equivalent score


@dataclass(frozen=True)
class BgeHyper:
    """Normal-Wishart hyperparameters for the Gaussian marginal likelihood.

    ``prior_precision`` and ``nu`` are sized to the full family dimension
    ``d = 1 + len(parents)`` (child first); ``None`` means identity and
    zeros.  Requires ``alpha_w > d - 1``.
    """

    alpha_mu: float = 1.0
    alpha_w: float | None = None  # None: d + 2 for the family at hand
    prior_precision: np.ndarray | None = None
    nu: np.ndarray | None = None

    def __post_init__(self):
        if not self.alpha_mu > 0:
            raise ModelError("alpha_mu must be positive")

    def resolved(self, d: int) -> tuple[float, np.ndarray, np.ndarray]:
        alpha_w = float(self.alpha_w) if self.alpha_w is not None else d + 2.0
        if d >= alpha_w + 1:
            raise ModelError(
                f"family dimension {d} needs alpha_w > {d - 1}, got {alpha_w}")
        t = np.eye(d) if self.prior_precision is None else np.asarray(self.prior_precision, dtype=float)
        nu = np.zeros(d) if self.nu is None else np.asarray(self.nu, dtype=float).reshape(-1)
        if t.shape != (d, d) or nu.shape != (d,):
            raise ModelError("prior precision / mean sized inconsistently with the family")
        return alpha_w, t, nu


def _log_wishart_norm(d: int, alpha: float) -> float:
    """log c(d, alpha) of the Wishart density normalizer."""
    return -(
        alpha * d / 2.0 * math.log(2.0)
        + d * (d - 1) / 4.0 * math.log(math.pi)
        + float(sum(gammaln((alpha + 1 - i) / 2.0) for i in range(1, d + 1)))
    )


def _exact_moments(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and centered scatter, order-independent to the last bit.

    Sums use ``math.fsum`` (correctly rounded), so permuting rows cannot
    change the result.
    """
    m, d = rows.shape
    mean = np.array([math.fsum(rows[:, j]) / m for j in range(d)])
    scatter = np.empty((d, d))
    for j in range(d):
        for k in range(j, d):
            s = math.fsum((rows[:, j] * rows[:, k]).tolist()) - m * mean[j] * mean[k]
            scatter[j, k] = scatter[k, j] = s
    return mean, scatter


def log_nw_marginal(rows: np.ndarray, alpha_mu: float, alpha_w: float,
                    t_prec: np.ndarray, nu: np.ndarray) -> float:
    """Log marginal likelihood of exchangeable rows under a normal-Wishart prior.

    ``(2 pi)^{-Md/2} (a_mu / (a_mu + M))^{d/2} c(d, a_w) |T|^{a_w/2}
    / (c(d, a_w + M) |R|^{(a_w + M)/2})`` with
    ``R = T + S + a_mu M / (a_mu + M) (mean - nu)(mean - nu)^T``.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ModelError("rows must be a 2-d matrix")
    m, d = rows.shape
    if m == 0 or d == 0:
        return 0.0
    mean, scatter = _exact_moments(rows)
    shift = mean - nu
    r = t_prec + scatter + (alpha_mu * m / (alpha_mu + m)) * np.outer(shift, shift)
    sign_t, logdet_t = np.linalg.slogdet(t_prec)
    sign_r, logdet_r = np.linalg.slogdet(r)
    if sign_t <= 0 or sign_r <= 0:
        raise ModelError("prior/posterior precision not positive definite")
    return (
        -0.5 * m * d * math.log(2.0 * math.pi)
        + 0.5 * d * math.log(alpha_mu / (alpha_mu + m))
        + _log_wishart_norm(d, alpha_w) - _log_wishart_norm(d, alpha_w + m)
        + 0.5 * alpha_w * logdet_t
        - 0.5 * (alpha_w + m) * logdet_r
    )


def bge_family_score(dataset: TrajectoryDataset, node: int, family: FamilySpec,
                     hyper: BgeHyper | None = None) -> float:
    """Log marginal likelihood of a Gaussian child-given-parents family.

    All usable transitions are stacked as exchangeable rows
    ``(child, parents...)``; the conditional score is the joint
    normal-Wishart marginal minus the marginal of the parent block (with
    the matching sub-blocks of the prior precision and mean).  Row order
    never affects the value.
    """
    if dataset.domain.discrete:
        raise DomainMismatchError("bge_family_score needs a continuous dataset")
    if family.node != node:
        raise ModelError("family spec does not belong to the requested node")
    hyper = hyper or BgeHyper()
    d = 1 + len(family.parents)
    alpha_w, t_prec, nu = hyper.resolved(d)
    t0 = dataset.first_usable_t(family)
    if t0 > dataset.T:
        return 0.0
    ts = np.arange(t0, dataset.T + 1)
    child = dataset.x[:, ts, node].reshape(-1, 1)
    pcols = dataset.parent_columns(family, ts).reshape(child.shape[0], len(family.parents))
    rows = np.hstack([child, pcols])
    joint = log_nw_marginal(rows, hyper.alpha_mu, alpha_w, t_prec, nu)
    if len(family.parents) == 0:
        return joint
    parents_ml = log_nw_marginal(rows[:, 1:], hyper.alpha_mu, alpha_w, t_prec[1:, 1:], nu[1:])
    return joint - parents_ml


# ---------------------------------------------------------------------------
# Family scores and the cache


def _family_k(dataset: TrajectoryDataset, family: FamilySpec) -> int:
    """Free-parameter count of the family's maximum-likelihood kernel."""
    if dataset.domain.discrete:
        arities = dataset.family_arities(family)
        return n_configurations(arities) * (dataset.domain.x_arities[family.node] - 1)
    return len(family.parents) + 2  # betas + intercept + sigma2


def family_score(dataset: TrajectoryDataset, node: int, parents: Sequence[Parent],
                 kind: str, prior: DirichletPrior | None = None,
                 hyper: BgeHyper | None = None) -> float:
    """Higher-is-better score of one family; see the module docstring for kinds."""
    kind = kind.lower()
    if kind not in SCORE_KINDS:
        raise ValueError(f"unknown score kind {kind!r}; expected one of {SCORE_KINDS}")
    family = FamilySpec(node=node, parents=canonical_parents(parents))
    if kind == "bde":
        return bde_family_score(count_transitions(dataset, family), prior)
    if kind == "bge":
        return bge_family_score(dataset, node, family, hyper)
    if dataset.domain.discrete:
        loglik = family_loglik_from_counts(count_transitions(dataset, family))
    else:
        _, loglik = fit_linear_gaussian(dataset, node, family)
    if kind == "ll":
        return loglik
    k = _family_k(dataset, family)
    n_eff = dataset.usable_transitions(family)
    return -information_criterion(loglik, k, n_eff, kind)


@dataclass
class ScoreCache:
    """Memoized family scores keyed by (node, canonical parent set).

    Values are deterministic functions of (dataset, family), so
    concurrent last-write-wins insertion is benign.
    """

    kind: str
    entries: dict = field(default_factory=dict)

    def key(self, node: int, parents: Sequence[Parent]) -> tuple:
        return (node, tuple(sorted(parents, key=Parent.sort_key)))

    def __len__(self) -> int:
        return len(self.entries)


def cached_family_score(cache: ScoreCache, dataset: TrajectoryDataset, node: int,
                        parents: Sequence[Parent], kind: str | None = None,
                        prior: DirichletPrior | None = None,
                        hyper: BgeHyper | None = None) -> float:
    """Like :func:`family_score` but memoized; parent order never matters."""
    kind = (kind or cache.kind).lower()
    if kind != cache.kind.lower():
        raise ValueError(f"cache holds {cache.kind!r} scores, not {kind!r}")
    key = cache.key(node, parents)
    hit = cache.entries.get(key)
    if hit is None:
        hit = family_score(dataset, node, list(key[1]), kind, prior=prior, hyper=hyper)
        cache.entries[key] = hit
    return hit


class FamilyScorer:
    """Bound scorer used by the learners: dataset + kind + priors + cache."""

    def __init__(self, dataset: TrajectoryDataset, kind: str,
                 prior: DirichletPrior | None = None, hyper: BgeHyper | None = None):
        self.dataset = dataset
        self.kind = kind.lower()
        self.prior = prior
        self.hyper = hyper
        self.cache = ScoreCache(kind=self.kind)

    def __call__(self, node: int, parents: Sequence[Parent]) -> float:
        return cached_family_score(self.cache, self.dataset, node, parents,
                                   self.kind, prior=self.prior, hyper=self.hyper)

    def structure_score(self, structure: DbnStructure) -> float:
        return sum(self(i, parents_of(structure, i).parents) for i in range(structure.n_x))


def dump_scores(cache: ScoreCache) -> str:
    """Sorted text dump: ``node<TAB>parents<TAB>kind<TAB>value`` at 17 significant digits."""
    lines = []
    for (node, parents), value in cache.entries.items():
        tags = "+".join(f"{p.kind}:{p.index}" for p in parents) or "-"
        lines.append(f"{node}\t{tags}\t{cache.kind}\t{value:.17g}")
    return "\n".join(sorted(lines)) + ("\n" if lines else "")
