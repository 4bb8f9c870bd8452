import math

import numpy as np
import pytest

from dbnlearn.core import (
    DataError, DbnStructure, DomainMismatchError, SizeGuardError, is_acyclic,
    parents_of,
)
from dbnlearn.learn import (
    BoundedConfig, CellTimeout, ContinuousConfig, Deadline, SearchConfig,
    bounded_oneshot, continuous_oneshot, exact_search, hill_climb, run_learner,
    _legal_moves, _structure_with, _affected_nodes,
)
from dbnlearn.scoring import FamilyScorer
from dbnlearn.simulate import EdgeProbs, GeneratorConfig, sample_random_dbn, sample_trajectories

from conftest import continuous_dataset, discrete_dataset
from oracle_utils import brute_force_best_score


def discrete_instance(seed, n=3, n_traj=30, horizon=10, sharpen=3.0, n_z=0, static=0.0):
    cfg = GeneratorConfig(n_x=n, n_z=n_z, model="cpt", seed=seed, sharpen=sharpen,
                          edge_probs=EdgeProbs(intra=0.3, inter=0.4, auto=0.3, static=static))
    structure, params = sample_random_dbn(cfg)
    ds = sample_trajectories(structure, params, n_traj, horizon, seed=seed + 1000,
                             x_arities=(2,) * n, z_arities=(2,) * n_z)
    return structure, ds


def continuous_instance(seed, n=3, n_traj=40, horizon=40, sigma=0.5):
    cfg = GeneratorConfig(n_x=n, model="linear_gaussian", seed=seed, sigma=sigma,
                          edge_probs=EdgeProbs(intra=0.3, inter=0.4, auto=0.3))
    structure, params = sample_random_dbn(cfg)
    return structure, sample_trajectories(structure, params, n_traj, horizon, seed=seed + 2000)


class TestExactSearch:
    def test_matches_brute_force_small(self):
        for seed in (0, 1):
            _, ds = discrete_instance(seed, n_traj=15)
            report = exact_search(ds, "bic", SearchConfig(score="bic"))
            oracle = brute_force_best_score(ds, "bic")
            assert report.score == oracle

    def test_prefers_correct_direction_two_nodes(self):
        # child copies its in-slice parent: the 0 -> 1 direction compresses best
        rng = np.random.default_rng(8)
        x0 = (rng.random((40, 6)) < 0.5).astype(int)
        noise = rng.random((40, 6)) < 0.05
        x1 = np.where(noise, 1 - x0, x0)
        ds = discrete_dataset(np.stack([x0, x1], axis=-1))
        report = exact_search(ds, "bic", SearchConfig(score="bic", max_inter=0, max_auto=0))
        assert report.structure.intra[0, 1] and not report.structure.intra[1, 0]

    def test_disabled_intra_reduces_to_per_node_argmax(self):
        _, ds = discrete_instance(3)
        cfg = SearchConfig(score="bde", max_intra=0)
        report = exact_search(ds, "bde", cfg)
        scorer = FamilyScorer(ds, "bde")
        for i in range(3):
            fam = parents_of(report.structure, i)
            best = max(
                scorer(i, parents)
                for parents in _all_non_intra_sets(ds, i, cfg))
            assert scorer(i, fam.parents) == best

    def test_report_score_matches_rescoring(self):
        _, ds = discrete_instance(4)
        report = exact_search(ds, "bde", SearchConfig(score="bde"))
        assert FamilyScorer(ds, "bde").structure_score(report.structure) == report.score

    def test_size_guard(self):
        ds = discrete_dataset(np.zeros((2, 3, 13), dtype=int))
        with pytest.raises(SizeGuardError):
            exact_search(ds, "bic")

    def test_empty_dataset_rejected(self):
        ds = discrete_dataset(np.zeros((2, 1, 2), dtype=int))
        with pytest.raises(DataError):
            exact_search(ds, "bic")

    def test_deterministic_report_bytes(self):
        _, ds = discrete_instance(5)
        a = exact_search(ds, "bde", SearchConfig(score="bde", seed=9)).to_json()
        b = exact_search(ds, "bde", SearchConfig(score="bde", seed=9)).to_json()
        assert a == b


def _all_non_intra_sets(ds, node, cfg):
    from oracle_utils import class_subsets
    from dbnlearn.core import Parent
    inter = class_subsets([Parent("inter", j) for j in range(ds.n_x) if j != node], cfg.max_inter)
    auto = class_subsets([Parent("auto", t) for t in range(1, cfg.p + 1)], cfg.max_auto)
    static = class_subsets([Parent("static", j) for j in range(ds.n_z)], cfg.max_static)
    for a in inter:
        for b in auto:
            for c in static:
                yield a + b + c


class TestHillClimb:
    def test_terminates_immediately_at_optimum(self):
        _, ds = discrete_instance(6, n_traj=40)
        best = exact_search(ds, "bic", SearchConfig(score="bic"))
        report = hill_climb(ds, "bic", SearchConfig(score="bic", restarts=1),
                            initial=best.structure)
        assert report.score == best.score
        assert len(report.trace) == 1  # zero improving moves from the optimum

    def test_learns_self_edge_on_self_driven_node(self):
        structure = DbnStructure(
            n_x=1, n_z=0, p=1, intra=np.zeros((1, 1), dtype=bool),
            inter=np.zeros((1, 1), dtype=bool), auto_lags=((1,),),
            static_edges=np.zeros((0, 1), dtype=bool))
        from dbnlearn.core import Cpt, ParameterSet
        params = ParameterSet((Cpt(np.array([[0.9, 0.1], [0.1, 0.9]])),))
        ds = sample_trajectories(structure, params, 50, 40, seed=3)
        report = hill_climb(ds, "bic", SearchConfig(score="bic", restarts=1))
        assert report.structure.auto_lags[0] == (1,)

    def test_never_beats_exact_and_often_ties(self):
        ties = 0
        for seed in range(10):
            _, ds = discrete_instance(seed + 20, n_traj=30, horizon=30)
            best = exact_search(ds, "bde", SearchConfig(score="bde"))
            hc = hill_climb(ds, "bde", SearchConfig(score="bde", restarts=3, seed=seed))
            assert hc.score <= best.score + 1e-9
            ties += math.isclose(hc.score, best.score, rel_tol=0, abs_tol=1e-9)
        assert ties >= 7

    def test_local_optimality_post_hoc_sweep(self):
        _, ds = discrete_instance(7)
        cfg = SearchConfig(score="bic", restarts=2, seed=1)
        report = hill_climb(ds, "bic", cfg)
        scorer = FamilyScorer(ds, "bic")
        base = report.score
        for move in _legal_moves(report.structure, cfg):
            trial = _structure_with(report.structure, move)
            delta = sum(
                scorer(v, parents_of(trial, v).parents)
                - scorer(v, parents_of(report.structure, v).parents)
                for v in _affected_nodes(move))
            assert delta <= 1e-9, (move, delta, base)

    def test_deterministic_given_seed(self):
        _, ds = discrete_instance(8)
        cfg = SearchConfig(score="bic", restarts=3, seed=123)
        assert hill_climb(ds, "bic", cfg).to_json() == hill_climb(ds, "bic", cfg).to_json()

    def test_respects_deadline(self):
        _, ds = discrete_instance(9, n_traj=50, horizon=30)
        with pytest.raises(CellTimeout):
            hill_climb(ds, "bic", SearchConfig(score="bic", restarts=5),
                       deadline=Deadline(0.0))


class TestContinuousOneshot:
    def test_huge_lambda_gives_empty_graph(self):
        _, ds = continuous_instance(1)
        report = continuous_oneshot(ds, ContinuousConfig(lambda_w=1e6, lambda_a=1e6))
        assert report.structure.edge_count() == 0
        assert report.extras["h"] == 0.0

    def test_one_edge_shrinkage_closed_form(self):
        # noiseless lag-1 chain x2(t) = 0.8 x1(t-1): the lag edge is the only
        # exact explanation, and soft-thresholding shifts it by lam*M/sum(x^2)
        rng = np.random.default_rng(5)
        x0 = rng.normal(size=(30, 10))
        x1 = np.zeros_like(x0)
        x1[:, 1:] = 0.8 * x0[:, :-1]
        ds = continuous_dataset(np.stack([x0, x1], axis=-1))
        lam = 0.02
        report = continuous_oneshot(ds, ContinuousConfig(
            lambda_w=lam, lambda_a=lam, w_threshold=0.05, h_tol=1e-10))
        a = report.extras["a"]
        parent = x0[:, :-1].ravel()
        bound = lam * parent.size / float(np.dot(parent, parent))
        assert report.structure.inter[0, 1]
        assert abs(a[0, 1] - 0.8) <= bound + 1e-3

    def test_final_support_always_acyclic(self):
        for seed in range(5):
            _, ds = continuous_instance(seed + 40, n_traj=25, horizon=25)
            report = continuous_oneshot(ds, ContinuousConfig(
                lambda_w=0.05, lambda_a=0.05, w_threshold=0.01, max_outer=30))
            assert is_acyclic(report.structure.intra)

    def test_inner_objective_monotone_nonincreasing(self):
        _, ds = continuous_instance(2)
        report = continuous_oneshot(ds, ContinuousConfig(
            lambda_w=0.1, lambda_a=0.1, record_inner=True, max_outer=5, h_tol=1e-10))
        for entry in report.trace:
            seq = entry["inner_objectives"]
            assert all(b <= a + 1e-9 for a, b in zip(seq, seq[1:]))

    def test_discrete_dataset_rejected(self):
        ds = discrete_dataset(np.zeros((2, 4, 2), dtype=int))
        with pytest.raises(DomainMismatchError):
            continuous_oneshot(ds)

    def test_deterministic(self):
        _, ds = continuous_instance(3)
        cfg = ContinuousConfig(lambda_w=0.05, lambda_a=0.05, seed=4)
        assert continuous_oneshot(ds, cfg).to_json() == continuous_oneshot(ds, cfg).to_json()


class TestBoundedOneshot:
    def test_unreachable_bound_gives_empty_structure(self):
        _, ds = continuous_instance(11)
        report = bounded_oneshot(ds, BoundedConfig(b_w=100.0, b_a=100.0))
        assert report.structure.edge_count() == 0
        assert report.extras["objective"] == pytest.approx(report.extras["empty_objective"])

    def test_noiseless_chain_interior_recovery(self):
        rng = np.random.default_rng(6)
        x0 = rng.normal(size=(25, 8))
        x1 = np.zeros_like(x0)
        x1[:, 1:] = 0.8 * x0[:, :-1]
        ds = continuous_dataset(np.stack([x0, x1], axis=-1))
        report = bounded_oneshot(ds, BoundedConfig(b_w=0.1, b_a=0.1,
                                                   lambda_w_pos=0.01, lambda_w_neg=0.01,
                                                   lambda_a_pos=0.01, lambda_a_neg=0.01))
        a = report.extras["a"]
        assert report.structure.inter[0, 1]
        assert a[0, 1] == pytest.approx(0.8, abs=1e-9)

    def test_active_weights_respect_bounds(self):
        for seed in range(5):
            _, ds = continuous_instance(seed + 60, n_traj=20, horizon=20)
            cfg = BoundedConfig(b_w=0.15, b_a=0.15, lambda_w_pos=0.5, lambda_w_neg=0.5,
                                lambda_a_pos=0.5, lambda_a_neg=0.5)
            report = bounded_oneshot(ds, cfg)
            w, a = report.extras["w"], report.extras["a"]
            active = np.abs(w[w != 0.0])
            assert active.size == 0 or active.min() >= cfg.b_w - 1e-9
            active = np.abs(a[a != 0.0])
            assert active.size == 0 or active.min() >= cfg.b_a - 1e-9

    def test_objective_never_worse_than_empty(self):
        for seed in range(5):
            _, ds = continuous_instance(seed + 80, n_traj=15, horizon=15)
            report = bounded_oneshot(ds, BoundedConfig(b_w=0.2, b_a=0.2))
            assert report.extras["objective"] <= report.extras["empty_objective"] + 1e-9

    def test_node_guard(self):
        ds = continuous_dataset(np.random.default_rng(0).normal(size=(4, 6, 5)))
        with pytest.raises(SizeGuardError):
            bounded_oneshot(ds, BoundedConfig(max_nodes=4))


class TestRegistry:
    def test_unknown_learner_lists_names(self):
        ds = discrete_dataset(np.zeros((2, 3, 2), dtype=int))
        with pytest.raises(ValueError, match="bounded, dynotears, exact, hill"):
            run_learner("nope", ds)

    def test_unknown_hyperparameter_rejected(self):
        _, ds = discrete_instance(12)
        with pytest.raises(ValueError, match="unknown hyperparameters"):
            run_learner("hill", ds, seed=0, nonsense=1)
