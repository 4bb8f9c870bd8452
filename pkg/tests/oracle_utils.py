"""Independent oracles shared by unit and acceptance tests.

Everything here deliberately avoids the library's own search and
integration paths: DAG-ness is decided by brute-force permutation
checks, integrals by quadrature on scipy primitives.
"""

import itertools
import math

import numpy as np
from scipy import stats

from dbnlearn.core import Parent
from dbnlearn.scoring import family_score


def permutation_is_dag(support: np.ndarray) -> bool:
    """A support is a DAG iff some node order makes every edge go forward."""
    n = support.shape[0]
    for perm in itertools.permutations(range(n)):
        pos = {v: k for k, v in enumerate(perm)}
        if all(pos[j] < pos[i] for j, i in zip(*np.nonzero(support))):
            return True
    return False


def all_intra_dags(n: int):
    """Every zero-diagonal boolean n x n DAG support (25 of them at n=3)."""
    slots = [(j, i) for j in range(n) for i in range(n) if j != i]
    for bits in itertools.product([False, True], repeat=len(slots)):
        support = np.zeros((n, n), dtype=bool)
        for (j, i), b in zip(slots, bits):
            support[j, i] = b
        if permutation_is_dag(support):
            yield support


def class_subsets(candidates, limit):
    out = [()]
    for size in range(1, min(limit, len(candidates)) + 1):
        out.extend(itertools.combinations(candidates, size))
    return out


def brute_force_best_score(dataset, kind, max_intra=2, max_inter=2, max_auto=1,
                           max_static=1, p=1, prior=None, hyper=None):
    """Exhaustive optimum of the decomposable score over intra DAGs.

    Enumerates every intra DAG; conditionally on each node's intra
    parents the inter/auto/static subsets decouple, so each node takes
    its best completion independently.
    """
    n = dataset.n_x
    completion: list[dict] = []
    for i in range(n):
        inter_sets = class_subsets([Parent("inter", j) for j in range(n) if j != i], max_inter)
        auto_sets = class_subsets([Parent("auto", t) for t in range(1, p + 1)], max_auto)
        static_sets = class_subsets([Parent("static", j) for j in range(dataset.n_z)], max_static)
        table = {}
        for intra in class_subsets([Parent("intra", j) for j in range(n) if j != i], max_intra):
            best = -math.inf
            for inter in inter_sets:
                for auto in auto_sets:
                    for stat in static_sets:
                        value = family_score(dataset, i, inter + intra + auto + stat,
                                             kind, prior=prior, hyper=hyper)
                        if value > best:
                            best = value
            table[frozenset(q.index for q in intra)] = best
        completion.append(table)

    best_total = -math.inf
    for support in all_intra_dags(n):
        total = 0.0
        feasible = True
        for i in range(n):
            parents = frozenset(int(j) for j in np.flatnonzero(support[:, i]))
            if parents not in completion[i]:
                feasible = False
                break
            total += completion[i][parents]
        if feasible and total > best_total:
            best_total = total
    return best_total


# ---------------------------------------------------------------------------
# Normal-Wishart marginal-likelihood oracles (Gauss-Legendre tensor grids)


def _gl_nodes(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def nw_marginal_oracle_1d(xs, alpha_mu, alpha_w, t_prec=1.0, nu=0.0,
                          n_mu=160, n_w=160, w_hi=50.0) -> float:
    """log integral of prod N(x | mu, 1/w) under the normal-Wishart prior.

    Direct 2-d quadrature over (mu, w); the scalar Wishart is the Gamma
    distribution with shape alpha_w / 2 and rate t_prec / 2.
    """
    xs = np.asarray(xs, dtype=float)
    m = xs.size
    mu_center = xs.mean()
    mus, q_mu = _gl_nodes(mu_center - 12.0 / math.sqrt(m), mu_center + 12.0 / math.sqrt(m), n_mu)
    ws, q_w = _gl_nodes(1e-8, w_hi, n_w)
    mu_grid, w_grid = np.meshgrid(mus, ws, indexing="ij")
    loglike = -0.5 * m * np.log(2 * np.pi / w_grid) \
        - 0.5 * w_grid * ((xs[None, None, :] - mu_grid[..., None]) ** 2).sum(-1)
    logprior_mu = 0.5 * np.log(alpha_mu * w_grid / (2 * np.pi)) \
        - 0.5 * alpha_mu * w_grid * (mu_grid - nu) ** 2
    logprior_w = stats.gamma.logpdf(w_grid, a=alpha_w / 2.0, scale=2.0 / t_prec)
    value = np.einsum("i,j,ij->", q_mu, q_w, np.exp(loglike + logprior_mu + logprior_w))
    return math.log(value)


def nw_marginal_oracle_2d(rows, alpha_mu, alpha_w, t_prec=None, nu=None,
                          n_nodes=72, w_hi=50.0) -> float:
    """log marginal of 2-column rows: analytic mean integral, quadrature over W.

    The precision matrix is parameterized as (w11, w22, r) with
    w12 = r sqrt(w11 w22); the Wishart density comes from scipy.
    """
    rows = np.asarray(rows, dtype=float)
    m, d = rows.shape
    assert d == 2
    t_prec = np.eye(2) if t_prec is None else t_prec
    nu = np.zeros(2) if nu is None else nu
    xbar = rows.mean(axis=0)
    scatter = (rows - xbar).T @ (rows - xbar)
    a_mat = scatter + (alpha_mu * m / (alpha_mu + m)) * np.outer(xbar - nu, xbar - nu)

    w11, q1 = _gl_nodes(1e-8, w_hi, n_nodes)
    w22, q2 = _gl_nodes(1e-8, w_hi, n_nodes)
    r, qr = _gl_nodes(-1 + 1e-10, 1 - 1e-10, n_nodes)
    g11, g22, gr = np.meshgrid(w11, w22, r, indexing="ij")
    g12 = gr * np.sqrt(g11 * g22)
    det = g11 * g22 - g12 ** 2
    loglike = (-0.5 * m * d * math.log(2 * math.pi) + 0.5 * m * np.log(det)
               + 0.5 * d * math.log(alpha_mu / (alpha_mu + m))
               - 0.5 * (g11 * a_mat[0, 0] + 2 * g12 * a_mat[0, 1] + g22 * a_mat[1, 1]))
    wish = stats.wishart(df=alpha_w, scale=np.linalg.inv(t_prec))
    stack = np.stack([np.stack([g11, g12], axis=-1),
                      np.stack([g12, g22], axis=-1)], axis=-2)
    logprior = wish.logpdf(np.moveaxis(stack.reshape(-1, 2, 2), 0, -1)).reshape(g11.shape)
    jacobian = np.sqrt(g11 * g22)
    value = np.einsum("i,j,k,ijk->", q1, q2, qr, np.exp(loglike + logprior) * jacobian)
    return math.log(value)
