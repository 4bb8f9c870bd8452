"""Core domain types for dynamic Bayesian network learning.

A DBN here is a transition model over an ``n_x``-dimensional process
``X(t)`` with optional time-independent covariates ``Z``.  The structure
is a graph superset with four edge classes feeding each child ``X_i(t)``:

* ``inter``  -- lag-1 edges ``X_j(t-1) -> X_i(t)``,
* ``intra``  -- same-slice edges ``X_j(t) -> X_i(t)`` (must stay acyclic),
* ``auto``   -- self lags ``X_i(t-tau) -> X_i(t)`` for ``tau in {1..p}``,
* ``static`` -- covariate edges ``Z_j -> X_i(t)``.

A self lag-1 dependence can be spelled either as an inter self edge or
as auto lag 1 but never both at once; everything this package generates
uses the auto-lag spelling, and the metrics treat the two as the same
edge.  All types are immutable after construction and safe to share
across threads; the operations in this module are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

PARENT_KINDS = ("inter", "intra", "auto", "static")
_KIND_RANK = {kind: rank for rank, kind in enumerate(PARENT_KINDS)}


class DbnError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(DbnError):
    """Array shapes inconsistent with the declared structure."""


class CycleError(DbnError):
    """A same-slice graph that must be acyclic contains a cycle."""

    def __init__(self, cycle: Sequence[int]):
        self.cycle = tuple(cycle)
        super().__init__(f"same-slice graph contains a cycle: {' -> '.join(map(str, self.cycle))}")


class DomainMismatchError(DbnError):
    """Operation applied to a dataset of the wrong value domain."""


class ModelError(DbnError):
    """Parameters inconsistent with the structure or data."""


class DataError(DbnError):
    """Dataset malformed or unusable for the requested operation."""


class SizeGuardError(DbnError):
    """Problem size exceeds a learner's safety guard."""


class OptimizerError(DbnError):
    """A numerical optimizer diverged or produced non-finite values."""


class UnderdeterminedError(DbnError):
    """Fewer usable rows than free parameters in a least-squares fit."""


class SplitError(DbnError):
    """A train/test split would leave one side empty."""


class Parent(NamedTuple):
    """One tagged parent of a family: ('inter'|'intra'|'static', j) or ('auto', tau)."""

    kind: str
    index: int

    def sort_key(self):
        return (_KIND_RANK[self.kind], self.index)


def canonical_parents(parents: Iterable[Parent]) -> tuple[Parent, ...]:
    """Fixed global ordering: inter, intra, auto, static, each ascending."""
    return tuple(sorted(parents, key=Parent.sort_key))


@dataclass(frozen=True)
class FamilySpec:
    """A child node together with its ordered, tagged parent list.

    The parent order is the canonical one from :func:`canonical_parents`,
    so configuration indices are reproducible across runs.  ``available``
    flags parents that cannot be served at a requested slice time (auto
    lags reaching before the first observation); it is all-True when no
    slice time was supplied.
    """

    node: int
    parents: tuple[Parent, ...]
    available: tuple[bool, ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        if len(set(self.parents)) != len(self.parents):
            raise ModelError(f"duplicate parent tags in family of node {self.node}")
        if self.parents != canonical_parents(self.parents):
            raise ModelError("family parents must be in canonical order")
        if self.available is None:
            object.__setattr__(self, "available", (True,) * len(self.parents))

    @property
    def min_time(self) -> int:
        """Earliest slice time t whose transition has every parent observable."""
        lags = [p.index for p in self.parents if p.kind == "auto"]
        return max([1] + lags)

    def arities(self, x_arities: Sequence[int], z_arities: Sequence[int], node: int | None = None) -> tuple[int, ...]:
        """Per-parent cardinalities, in family order."""
        child = self.node if node is None else node
        out = []
        for p in self.parents:
            if p.kind == "static":
                out.append(int(z_arities[p.index]))
            elif p.kind == "auto":
                out.append(int(x_arities[child]))
            else:
                out.append(int(x_arities[p.index]))
        return tuple(out)


def is_acyclic(intra: np.ndarray) -> bool:
    """True iff the directed graph ``intra[j, i] != 0  <=>  j -> i`` has no cycle.

    Iterative depth-first search with three-colour marking.
    """
    a = np.asarray(intra)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {a.shape}")
    n = a.shape[0]
    color = [0] * n  # 0 white, 1 grey, 2 black
    for start in range(n):
        if color[start] != 0:
            continue
        stack = [(start, 0)]
        color[start] = 1
        while stack:
            v, nxt = stack[-1]
            advanced = False
            for w in range(nxt, n):
                if not a[v, w]:
                    continue
                stack[-1] = (v, w + 1)
                if color[w] == 1:
                    return False
                if color[w] == 0:
                    color[w] = 1
                    stack.append((w, 0))
                advanced = True
                break
            if not advanced:
                color[v] = 2
                stack.pop()
    return True


def _find_cycle(a: np.ndarray) -> list[int]:
    """Return one directed cycle of ``a`` as a vertex list (first == last)."""
    n = a.shape[0]
    color = [0] * n
    parent = [-1] * n
    for start in range(n):
        if color[start] != 0:
            continue
        stack = [(start, 0)]
        color[start] = 1
        while stack:
            v, nxt = stack[-1]
            advanced = False
            for w in range(nxt, n):
                if not a[v, w]:
                    continue
                stack[-1] = (v, w + 1)
                if color[w] == 1:
                    cycle = [w, v]
                    u = v
                    while u != w:
                        u = parent[u]
                        cycle.append(u)
                    cycle.reverse()
                    return cycle
                if color[w] == 0:
                    color[w] = 1
                    parent[w] = v
                    stack.append((w, 0))
                advanced = True
                break
            if not advanced:
                color[v] = 2
                stack.pop()
    raise AssertionError("no cycle found in a graph reported cyclic")


def topological_order(intra: np.ndarray) -> list[int]:
    """A topological order of the same-slice graph, ties broken by node index.

    Raises :class:`CycleError` naming one offending cycle when the input
    is cyclic.
    """
    a = np.asarray(intra)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {a.shape}")
    n = a.shape[0]
    indeg = [int(np.count_nonzero(a[:, i])) for i in range(n)]
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    order: list[int] = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        changed = False
        for w in range(n):
            if a[v, w]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
                    changed = True
        if changed:
            ready.sort()
    if len(order) != n:
        raise CycleError(_find_cycle(a))
    return order


def configuration_index(values: Sequence[int], arities: Sequence[int]) -> int:
    """Mixed-radix little-endian index of a parent configuration.

    The first value is the least significant digit, so
    ``values=(1, 2), arities=(2, 3) -> 1 + 2*2 = 5``.  Bijective with
    :func:`configuration_values`.
    """
    if len(values) != len(arities):
        raise DimensionError("values and arities must have the same length")
    idx = 0
    base = 1
    for v, a in zip(values, arities):
        v = int(v)
        if not 0 <= v < a:
            raise ValueError(f"value {v} out of range for arity {a}")
        idx += v * base
        base *= int(a)
    return idx


def configuration_values(index: int, arities: Sequence[int]) -> tuple[int, ...]:
    """Inverse of :func:`configuration_index`."""
    total = 1
    for a in arities:
        total *= int(a)
    if not 0 <= index < max(total, 1):
        raise ValueError(f"configuration index {index} out of range for arities {tuple(arities)}")
    out = []
    for a in arities:
        out.append(index % int(a))
        index //= int(a)
    return tuple(out)


def n_configurations(arities: Sequence[int]) -> int:
    total = 1
    for a in arities:
        total *= int(a)
    return total


def _as_bool_matrix(m, shape, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=bool)
    if a.shape != shape:
        raise DimensionError(f"{name} must have shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DbnStructure:
    """The graph superset of a DBN transition model.

    ``intra[j, i]`` and ``inter[j, i]`` mean ``j -> i``; ``static_edges``
    is ``n_z x n_x``.  ``auto_lags[i]`` is the sorted tuple of self lags of
    node ``i``.  Construction validates: acyclic intra with an empty
    diagonal, lags within ``{1..p}``, and no node carrying both an inter
    self edge and auto lag 1 (the same dependence twice).  Generators and
    learners in this package always emit self lag-1 dependence as auto
    lag 1; the inter diagonal is accepted on input as the equivalent
    spelling.
    """

    n_x: int
    n_z: int
    p: int
    intra: np.ndarray
    inter: np.ndarray
    auto_lags: tuple[tuple[int, ...], ...]
    static_edges: np.ndarray

    def __post_init__(self):
        if self.n_x < 1 or self.n_z < 0 or self.p < 1:
            raise DimensionError("need n_x >= 1, n_z >= 0, p >= 1")
        object.__setattr__(self, "intra", _as_bool_matrix(self.intra, (self.n_x, self.n_x), "intra"))
        object.__setattr__(self, "inter", _as_bool_matrix(self.inter, (self.n_x, self.n_x), "inter"))
        object.__setattr__(self, "static_edges", _as_bool_matrix(self.static_edges, (self.n_z, self.n_x), "static_edges"))
        if np.any(np.diag(self.intra)):
            raise CycleError([int(np.flatnonzero(np.diag(self.intra))[0])] * 2)
        lags = tuple(tuple(sorted(int(t) for t in ls)) for ls in self.auto_lags)
        if len(lags) != self.n_x:
            raise DimensionError(f"auto_lags must list all {self.n_x} nodes")
        for i, ls in enumerate(lags):
            if len(set(ls)) != len(ls):
                raise ModelError(f"duplicate auto lag for node {i}")
            for t in ls:
                if not 1 <= t <= self.p:
                    raise ModelError(f"auto lag {t} of node {i} outside 1..{self.p}")
            if self.inter[i, i] and 1 in ls:
                # one dependence, one representation: an inter self edge and an
                # auto lag of 1 would double count X_i(t-1)
                raise ModelError(
                    f"node {i} has both an inter self edge and auto lag 1")
        object.__setattr__(self, "auto_lags", lags)
        if not is_acyclic(self.intra):
            raise CycleError(_find_cycle(self.intra))

    @staticmethod
    def empty(n_x: int, n_z: int = 0, p: int = 1) -> "DbnStructure":
        return DbnStructure(
            n_x=n_x, n_z=n_z, p=p,
            intra=np.zeros((n_x, n_x), dtype=bool),
            inter=np.zeros((n_x, n_x), dtype=bool),
            auto_lags=tuple(() for _ in range(n_x)),
            static_edges=np.zeros((n_z, n_x), dtype=bool),
        )

    def max_lag(self) -> int:
        """Largest lag used anywhere (at least 1: inter edges look one step back)."""
        m = 1
        for ls in self.auto_lags:
            if ls:
                m = max(m, max(ls))
        return m

    def edge_count(self) -> int:
        return int(self.intra.sum() + self.inter.sum() + self.static_edges.sum()) + sum(len(ls) for ls in self.auto_lags)

    def replace(self, **kwargs) -> "DbnStructure":
        fields = dict(n_x=self.n_x, n_z=self.n_z, p=self.p, intra=self.intra,
                      inter=self.inter, auto_lags=self.auto_lags, static_edges=self.static_edges)
        fields.update(kwargs)
        return DbnStructure(**fields)

    def __eq__(self, other):
        if not isinstance(other, DbnStructure):
            return NotImplemented
        return (self.n_x, self.n_z, self.p) == (other.n_x, other.n_z, other.p) \
            and np.array_equal(self.intra, other.intra) \
            and np.array_equal(self.inter, other.inter) \
            and self.auto_lags == other.auto_lags \
            and np.array_equal(self.static_edges, other.static_edges)

    def __hash__(self):
        return hash((self.n_x, self.n_z, self.p, self.intra.tobytes(),
                     self.inter.tobytes(), self.auto_lags, self.static_edges.tobytes()))

    def to_json_dict(self) -> dict:
        """JSON form with stable field order; booleans as 0/1."""
        return {
            "n_x": self.n_x,
            "n_z": self.n_z,
            "p": self.p,
            "intra": self.intra.astype(int).tolist(),
            "inter": self.inter.astype(int).tolist(),
            "auto_lags": [list(ls) for ls in self.auto_lags],
            "static_edges": self.static_edges.astype(int).tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "DbnStructure":
        return DbnStructure(
            n_x=int(d["n_x"]), n_z=int(d["n_z"]), p=int(d["p"]),
            intra=np.asarray(d["intra"], dtype=bool),
            inter=np.asarray(d["inter"], dtype=bool),
            auto_lags=tuple(tuple(int(t) for t in ls) for ls in d["auto_lags"]),
            static_edges=np.asarray(d["static_edges"], dtype=bool).reshape(int(d["n_z"]), int(d["n_x"])),
        )


def parents_of(structure: DbnStructure, node: int, slice_time: int | None = None) -> FamilySpec:
    """The tagged parent family of ``X_node(slice_time)`` in canonical order.

    With ``slice_time`` given, auto parents reaching before time 0 are
    flagged unavailable; without it the generic family is returned.  The
    same structure always yields byte-identical orderings.
    """
    if not 0 <= node < structure.n_x:
        raise DimensionError(f"node {node} outside 0..{structure.n_x - 1}")
    parents = [Parent("inter", int(j)) for j in np.flatnonzero(structure.inter[:, node])]
    parents += [Parent("intra", int(j)) for j in np.flatnonzero(structure.intra[:, node])]
    parents += [Parent("auto", int(t)) for t in structure.auto_lags[node]]
    parents += [Parent("static", int(j)) for j in np.flatnonzero(structure.static_edges[:, node])]
    parents = canonical_parents(parents)
    if slice_time is None:
        available = (True,) * len(parents)
    else:
        available = tuple(
            slice_time - p.index >= 0 if p.kind == "auto" else slice_time >= 1
            for p in parents
        )
    return FamilySpec(node=node, parents=parents, available=available)


# ---------------------------------------------------------------------------
# Datasets


@dataclass(frozen=True)
class Domain:
    """Value domain of a dataset: discrete with per-variable arities, or continuous."""

    kind: str  # "discrete" | "continuous"
    x_arities: tuple[int, ...] = ()
    z_arities: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("discrete", "continuous"):
            raise DataError(f"unknown domain kind {self.kind!r}")
        if self.kind == "discrete":
            if any(a < 2 for a in self.x_arities) or any(a < 2 for a in self.z_arities):
                raise DataError("arities must be >= 2")

    @property
    def discrete(self) -> bool:
        return self.kind == "discrete"


@dataclass(frozen=True)
class TrajectoryDataset:
    """N trajectories of T+1 time slices over n_x dynamic and n_z static variables.

    ``x`` has shape (N, T+1, n_x) and ``z`` shape (N, n_z).  ``burn_in``
    marks leading transitions excluded from every count/likelihood (used
    by temporal hold-out to carry lag context without double scoring).
    """

    domain: Domain
    x: np.ndarray
    z: np.ndarray
    burn_in: int = 0

    def __post_init__(self):
        x = np.asarray(self.x)
        if x.ndim != 3:
            raise DimensionError(f"x must be (N, T+1, n_x), got shape {x.shape}")
        z = np.asarray(self.z)
        if z.ndim != 2 or z.shape[0] != x.shape[0]:
            raise DimensionError(f"z must be (N, n_z), got shape {z.shape}")
        if self.domain.discrete:
            x = x.astype(np.int64)
            z = z.astype(np.int64)
            if len(self.domain.x_arities) != x.shape[2] or len(self.domain.z_arities) != z.shape[1]:
                raise DimensionError("arity lists must match variable counts")
            for v, a in enumerate(self.domain.x_arities):
                col = x[:, :, v]
                if col.size and (col.min() < 0 or col.max() >= a):
                    raise DataError(f"dynamic variable {v} has values outside 0..{a - 1}")
            for v, a in enumerate(self.domain.z_arities):
                col = z[:, v]
                if col.size and (col.min() < 0 or col.max() >= a):
                    raise DataError(f"static variable {v} has values outside 0..{a - 1}")
        else:
            x = x.astype(np.float64)
            z = z.astype(np.float64)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
                raise DataError("continuous dataset contains non-finite values")
        if not 0 <= self.burn_in <= x.shape[1] - 1:
            raise DataError(f"burn_in {self.burn_in} outside 0..{x.shape[1] - 1}")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def T(self) -> int:
        return self.x.shape[1] - 1

    @property
    def n_x(self) -> int:
        return self.x.shape[2]

    @property
    def n_z(self) -> int:
        return self.z.shape[1]

    def first_usable_t(self, family: FamilySpec) -> int:
        """Earliest target time countable for ``family`` under the drop rule."""
        return max(family.min_time, self.burn_in + 1)

    def usable_transitions(self, family: FamilySpec) -> int:
        """Number of (trajectory, t) transitions countable for ``family``."""
        return self.N * max(0, self.T - self.first_usable_t(family) + 1)

    def parent_columns(self, family: FamilySpec, t: np.ndarray | int) -> np.ndarray:
        """Values of the family's parents at target time(s) ``t``: shape (N, len(t), k)."""
        t = np.atleast_1d(np.asarray(t, dtype=int))
        cols = []
        for par in family.parents:
            if par.kind == "inter":
                cols.append(self.x[:, t - 1, par.index])
            elif par.kind == "intra":
                cols.append(self.x[:, t, par.index])
            elif par.kind == "auto":
                cols.append(self.x[:, t - par.index, family.node])
            else:
                cols.append(np.broadcast_to(self.z[:, par.index][:, None], (self.N, len(t))))
        if not cols:
            return np.empty((self.N, len(t), 0), dtype=self.x.dtype)
        return np.stack(cols, axis=-1)

    def family_arities(self, family: FamilySpec) -> tuple[int, ...]:
        if not self.domain.discrete:
            raise DomainMismatchError("family arities are defined for discrete datasets only")
        return family.arities(self.domain.x_arities, self.domain.z_arities)


# ---------------------------------------------------------------------------
# Per-node transition parameters


def _check_prob(v, what: str):
    arr = np.asarray(v, dtype=float)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ModelError(f"{what} must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class Cpt:
    """Unrestricted conditional probability table: one row per parent configuration."""

    table: np.ndarray  # (n_configs, arity)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ModelError("CPT table must be 2-d (configurations x child values)")
        _check_prob(t, "CPT entries")
        if t.size and np.max(np.abs(t.sum(axis=1) - 1.0)) > 1e-12:
            raise ModelError("CPT rows must sum to 1 within 1e-12")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def arity(self) -> int:
        return self.table.shape[1]

    def probs(self, config_index: int) -> np.ndarray:
        return self.table[config_index]


@dataclass(frozen=True)
class FactoredCpt:
    """Binary kernel with independent dynamic and static factors.

    ``p(child = 1 | dyn config, stat config) = table_dyn[d] * table_stat[s]``,
    clipped into [0, 1].  ``clipped`` records whether fitting ever clipped.
    """

    table_dyn: np.ndarray
    table_stat: np.ndarray
    clipped: bool = False

    def __post_init__(self):
        d = _check_prob(np.asarray(self.table_dyn, dtype=float).reshape(-1), "dynamic factor")
        s = _check_prob(np.asarray(self.table_stat, dtype=float).reshape(-1), "static factor")
        d.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "table_dyn", d)
        object.__setattr__(self, "table_stat", s)

    def prob_one(self, dyn_index: int, stat_index: int) -> float:
        d = self.table_dyn[dyn_index] if self.table_dyn.size else 1.0
        s = self.table_stat[stat_index] if self.table_stat.size else 1.0
        return float(min(1.0, max(0.0, d * s)))


@dataclass(frozen=True)
class NoisyOr:
    """Noisy-or kernel over binary parents: p(0) = (1 - lam0) * prod (1 - lam_l)^{V_l}."""

    lam0: float
    lam: tuple[float, ...]

    def __post_init__(self):
        _check_prob([self.lam0, *self.lam], "noisy-or lambdas")

    def prob_one(self, parent_values: Sequence[int]) -> float:
        q = 1.0 - self.lam0
        for lam_l, v in zip(self.lam, parent_values):
            if v:
                q *= 1.0 - lam_l
        return 1.0 - q


@dataclass(frozen=True)
class Logistic:
    """Binary logistic kernel: p(1) = sigmoid(beta0 + beta . parents).

    ``separable_guard`` is set when fitting hit the divergence guard on
    (near-)separable data and fell back to a ridge-regularized optimum.
    """

    beta0: float
    beta: np.ndarray
    separable_guard: bool = False

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float).reshape(-1)
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    def prob_one(self, parent_values: Sequence[float]) -> float:
        s = self.beta0 + float(np.dot(self.beta, np.asarray(parent_values, dtype=float)))
        # numerically safe sigmoid
        if s >= 0:
            return 1.0 / (1.0 + np.exp(-s))
        e = np.exp(s)
        return float(e / (1.0 + e))


@dataclass(frozen=True)
class LinearGaussian:
    """Linear Gaussian kernel: child ~ Normal(beta0 + beta . parents, sigma2)."""

    beta0: float
    beta: np.ndarray
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ModelError("sigma2 must be positive")
        b = np.asarray(self.beta, dtype=float).reshape(-1)
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    def mean(self, parent_values: Sequence[float]) -> float:
        return self.beta0 + float(np.dot(self.beta, np.asarray(parent_values, dtype=float)))


NodeParams = Cpt | FactoredCpt | NoisyOr | Logistic | LinearGaussian

_FAMILY_KINDS = {Cpt: "cpt", FactoredCpt: "factored", NoisyOr: "noisy_or",
                 Logistic: "logistic", LinearGaussian: "linear_gaussian"}


@dataclass(frozen=True)
class ParameterSet:
    """Per-node transition parameters, aligned with ``parents_of`` orderings."""

    families: tuple[NodeParams, ...]

    def __post_init__(self):
        for f in self.families:
            if type(f) not in _FAMILY_KINDS:
                raise ModelError(f"unknown family parameter type {type(f).__name__}")

    def kind(self, node: int) -> str:
        return _FAMILY_KINDS[type(self.families[node])]

    def __len__(self) -> int:
        return len(self.families)

    def __getitem__(self, node: int) -> NodeParams:
        return self.families[node]
