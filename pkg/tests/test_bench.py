"""
Tests for the bench module.
"""

import math
import unittest

import numpy as np

from onriccati.bench import (
    ExperimentConfig,
    WalkState,
    comparator_fixed,
    cost_stream,
    decomposition_bounds,
    gen_costs,
    gen_system,
    probe_boundedness,
    regret_decomposition,
    run_experiment,
    run_trials,
    system_from_config,
    value_map_samples,
)
from onriccati.config import ComparatorSection, CostsSection
from onriccati.errors import (
    ComparatorError,
    ConfigError,
    InvalidInputError,
    NotStabilizableError,
)
from onriccati.plant import CostPair, SystemModel
from onriccati.riccati import DareProblem, is_stabilizable, solve_dare
from tests.helpers import scalar_instance, seeded


def small_config(**sections):
    data = {
        "experiment": {"horizon": 40, "seed": 3, "checkpoints": [15, 40]},
        "system": {"n": 3, "m": 2},
        "comparator": {"max_iter": 40},
    }
    for name, values in sections.items():
        data.setdefault(name, {}).update(values)
    return ExperimentConfig.from_dict(data)


def scalar_config(**sections):
    data = {
        "experiment": {"horizon": 30, "checkpoints": [10, 30]},
        "system": {"source": "explicit", "n": 1, "m": 1, "A": [[2.0]], "B": [[1.0]]},
        "costs": {"kind": "constant"},
        "comparator": {"search": False},
    }
    for name, values in sections.items():
        data.setdefault(name, {}).update(values)
    return ExperimentConfig.from_dict(data)


class TestCostGeneration(unittest.TestCase):
    """Test cases for the cost streams."""

    def test_wishart(self):
        """Wishart draws are symmetric positive definite."""
        cost = gen_costs("wishart", (3, 2), seeded(1))
        for M in (cost.Q, cost.R):
            np.testing.assert_allclose(M, M.T)
            self.assertGreater(np.linalg.eigvalsh(M).min(), 0.0)

    def test_wishart_dof_too_small(self):
        """dof must cover the dimension."""
        with self.assertRaises(ConfigError):
            gen_costs("wishart", (5, 2), seeded(1), options=CostsSection(dof=3))

    def test_diag_uniform(self):
        """Q = I; the first ceil(m/2) entries of R are 1, the rest share one draw."""
        cost = gen_costs("diag_uniform", (2, 3), seeded(2))
        np.testing.assert_array_equal(cost.Q, np.eye(2))
        diag = np.diag(cost.R)
        self.assertEqual(list(diag[:2]), [1.0, 1.0])
        self.assertTrue(0.1 <= diag[2] <= 1.0)

    def test_diag_single_input(self):
        """With m = 1 the input cost stays at 1."""
        cost = gen_costs("diag_uniform", (2, 1), seeded(2))
        np.testing.assert_array_equal(cost.R, np.eye(1))

    def test_random_walk(self):
        """The walk stays in [0.1, 1] and moves by at most one step."""
        rng = seeded(4)
        walk = WalkState()
        levels = []
        for t in range(1, 500):
            cost = gen_costs("diag_random_walk", (1, 4), rng, t, walk=walk)
            levels.append(cost.R[3, 3])
            self.assertEqual(cost.R[2, 2], cost.R[3, 3])
        levels = np.array(levels)
        self.assertTrue(np.all((levels >= 0.1) & (levels <= 1.0)))
        self.assertLessEqual(np.abs(np.diff(levels)).max(), 0.1 + 1e-12)

    def test_custom_and_unknown(self):
        """Custom costs need both matrices; unknown kinds are rejected."""
        with self.assertRaises(ConfigError):
            gen_costs("custom", (1, 1), seeded(0), options=CostsSection(kind="custom"))
        with self.assertRaises(ConfigError):
            gen_costs("lognormal", (1, 1), seeded(0))

    def test_stream_shape_check(self):
        """Constant costs must match the system dimensions."""
        options = CostsSection(kind="constant", Q=[[1.0]], R=[[1.0]])
        with self.assertRaises(ConfigError):
            cost_stream(options, 2, 1, 3, seeded(0))

    def test_stream_reproducible(self):
        """The same seed gives the same stream."""
        first = cost_stream(CostsSection(), 3, 2, 5, seeded(9))
        second = cost_stream(CostsSection(), 3, 2, 5, seeded(9))
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.Q, b.Q)
            np.testing.assert_array_equal(a.R, b.R)


class TestSystems(unittest.TestCase):
    """Test cases for system generation."""

    def test_random_system_is_stabilizable(self):
        """Accepted draws are stabilizable."""
        sys = gen_system(4, 3, seeded(12))
        self.assertTrue(is_stabilizable(sys.A, sys.B))
        self.assertTrue(np.all(np.abs(sys.A) <= 3.0))

    def test_explicit_stable_without_input(self):
        """A = 0.5, B = 0 is accepted."""
        config = scalar_config(system={"A": [[0.5]], "B": [[0.0]]})
        sys = system_from_config(config, seeded(0))
        self.assertEqual(sys.A[0, 0], 0.5)

    def test_explicit_not_stabilizable(self):
        """A = 2, B = 0 is rejected."""
        config = scalar_config(system={"B": [[0.0]]})
        with self.assertRaises(NotStabilizableError):
            system_from_config(config, seeded(0))


class TestComparator(unittest.TestCase):
    """Test cases for the hindsight comparator."""

    def test_scalar_dare_gain(self):
        """Without search the comparator is K* of the averaged costs."""
        A, B, Q, R = scalar_instance()
        costs = [CostPair(Q, R)] * 20
        options = ComparatorSection(search=False)
        K, cost, K_star = comparator_fixed(costs, SystemModel(A, B), options=options)
        self.assertAlmostEqual(K[0, 0], (1.0 + math.sqrt(5.0)) / 2.0, delta=1e-9)
        np.testing.assert_array_equal(K, K_star)
        self.assertGreater(cost, 0.0)

    def test_search_never_worse(self):
        """The refined gain costs no more than K*."""
        rng = seeded(21)
        sys = gen_system(2, 2, rng)
        costs = cost_stream(CostsSection(), 2, 2, 30, rng)
        X1 = 5.0 * np.eye(2)
        options = ComparatorSection(max_iter=60)
        _, refined, K_star = comparator_fixed(costs, sys, X1, options)
        _, plain, _ = comparator_fixed(costs, sys, X1, ComparatorSection(search=False))
        self.assertLessEqual(refined, plain)


class TestExperiment(unittest.TestCase):
    """Test cases for regret experiments."""

    def test_single_round(self):
        """T = 1 has zero regret from X_1 = 0."""
        ledger = run_experiment(
            small_config(
                experiment={"horizon": 1, "checkpoints": [1]},
                comparator={"search": False},
            )
        )
        for name in ledger.algorithms:
            self.assertEqual(ledger.stage_costs[name][0], 0.0)
            self.assertAlmostEqual(ledger.final_regret(name), 0.0, delta=1e-8)

    def test_constant_costs(self):
        """With fixed costs the per-round DARE baselines match K* exactly."""
        ledger = run_experiment(scalar_config())
        scale = float(np.sum(ledger.comparator_costs))
        self.assertLessEqual(abs(ledger.final_regret("fll")), 1e-8 * scale)
        self.assertLessEqual(abs(ledger.final_regret("recent")), 1e-8 * scale)
        self.assertLess(abs(ledger.final_regret("online")), 0.1 * scale)
        rows = {row["algorithm"]: row for row in ledger.summary()}
        self.assertLess(rows["online"]["gain_gap"], 1e-8)

    def test_constant_costs_from_dare_gain(self):
        """Starting at K* of constant costs the online update has no regret."""
        ledger = run_experiment(scalar_config(online={"initial_gain": "dare"}))
        scale = float(np.sum(ledger.comparator_costs))
        K1 = ledger.gains["online"][0]
        self.assertAlmostEqual(K1[0, 0], (1.0 + math.sqrt(5.0)) / 2.0, delta=1e-9)
        for name in ledger.algorithms:
            with self.subTest(algorithm=name):
                self.assertLessEqual(abs(ledger.final_regret(name)), 1e-9 * scale)
                np.testing.assert_allclose(ledger.regret[name], 0.0, atol=1e-9 * scale)

    def test_reproducible(self):
        """Identical seeds give identical costs; different seeds differ."""
        first = run_experiment(small_config())
        second = run_experiment(small_config())
        for name in first.algorithms:
            np.testing.assert_array_equal(
                first.stage_costs[name], second.stage_costs[name]
            )
        other = run_experiment(small_config(experiment={"seed": 4}))
        self.assertFalse(
            np.array_equal(first.stage_costs["online"], other.stage_costs["online"])
        )

    def test_trials_use_distinct_streams(self):
        """Each trial draws its own system."""
        config = small_config(
            experiment={"trials": 2, "horizon": 5, "checkpoints": [5]}
        )
        ledgers = run_trials(config)
        self.assertEqual(len(ledgers), 2)
        self.assertFalse(np.array_equal(ledgers[0].system.A, ledgers[1].system.A))

    def test_ledger_series(self):
        """Series have one entry per round and regret averages divide by t."""
        ledger = run_experiment(small_config())
        self.assertEqual(set(ledger.algorithms), {"online", "fll", "recent"})
        for name in ledger.algorithms:
            self.assertEqual(ledger.stage_costs[name].shape, (40,))
            self.assertTrue(np.all(ledger.rho[name] < 1.0))
        np.testing.assert_allclose(
            ledger.average_regret("online") * np.arange(1, 41), ledger.regret["online"]
        )
        self.assertEqual(sorted(ledger.checkpoint_regret), [15, 40])


class TestDecomposition(unittest.TestCase):
    """Test cases for the four-term regret split."""

    @classmethod
    def setUpClass(cls):
        cls.ledger = run_experiment(small_config(experiment={"x1_scale": 1.0}))

    def test_terms_sum_to_regret(self):
        """The terms telescope to the regret at every checkpoint."""
        for horizon in (15, 40):
            parts = regret_decomposition(self.ledger, horizon)
            scale = max(1.0, float(np.sum(self.ledger.comparator_costs[:horizon])))
            self.assertAlmostEqual(parts.total, parts.regret, delta=1e-8 * scale)
            self.assertEqual(parts.transient.shape, (horizon,))

    def test_comparator_gap_nonpositive(self):
        """K* has the least steady cost under the averaged costs."""
        parts = regret_decomposition(self.ledger)
        scale = max(1.0, float(np.sum(self.ledger.comparator_costs)))
        self.assertLessEqual(parts.comparator_gap[-1], 1e-9 * scale)

    def test_comparator_transient_bound(self):
        """The measured comparator transient stays below its bound."""
        parts = regret_decomposition(self.ledger)
        bounds = decomposition_bounds(self.ledger, parts)
        self.assertLessEqual(
            abs(parts.comparator_transient[-1]),
            bounds["comparator_transient"] * (1.0 + 1e-9),
        )
        for key in ("transient", "policy_drift", "M", "M_prime", "m_hat"):
            self.assertTrue(math.isfinite(bounds[key]))
            self.assertGreaterEqual(bounds[key], 0.0)

    def test_unknown_horizon(self):
        """Only checkpoint horizons carry a comparator."""
        with self.assertRaises(ComparatorError):
            regret_decomposition(self.ledger, 7)


class TestProbe(unittest.TestCase):
    """Test cases for the boundedness probe."""

    def test_scalar_probe_within_bound(self):
        """Scalar trials stay below the closed-form ceiling."""
        config = scalar_config(
            experiment={"trials": 5, "horizon": 100},
            costs={
                "kind": "uniform_box",
                "q_low": 0.5,
                "q_high": 1.5,
                "r_low": 0.5,
                "r_high": 1.5,
            },
        )
        trials = probe_boundedness(config)
        self.assertEqual(len(trials), 5)
        for trial in trials:
            self.assertFalse(trial.flagged)
            self.assertIsNotNone(trial.bound)
            self.assertEqual(trial.series.shape, (100,))
            self.assertLessEqual(trial.max_eig_after_first, trial.bound * (1.0 + 1e-9))

    def test_matrix_probe(self):
        """Random-gain trials in higher dimension stay bounded."""
        config = small_config(
            experiment={"trials": 3, "horizon": 60}, system={"n": 4, "m": 3}
        )
        trials = probe_boundedness(config, random_initial_gain=True)
        self.assertTrue(all(not trial.flagged for trial in trials))
        self.assertTrue(all(trial.bound is None for trial in trials))

class TestValueMap(unittest.TestCase):
    """Test cases for the one-step value map around P*."""

    @classmethod
    def setUpClass(cls):
        rng = seeded(31)
        sys = gen_system(3, 2, rng)
        cost = gen_costs("wishart", (3, 2), rng, options=CostsSection(dof=4))
        cls.prob = DareProblem(sys.A, sys.B, cost.Q, cost.R)
        cls.P_star = solve_dare(cls.prob).P_star
        cls.samples = value_map_samples(cls.prob, 200, rng)

    def test_values_never_below_dare(self):
        """Every stabilizing K_{t+1} costs at least P*."""
        floor = np.linalg.norm(self.P_star, 2)
        self.assertEqual(len(self.samples), 200)
        for sample in self.samples:
            if math.isfinite(sample.p_next_norm):
                self.assertLess(sample.rho_next, 1.0)
                self.assertGreaterEqual(sample.p_next_norm, floor * (1.0 - 1e-9))

    def test_radius_near_one_forces_large_values(self):
        """||P_{t+1}|| >= lambda_min(Q) / (1 - rho^2)."""
        q_floor = np.linalg.eigvalsh(self.prob.Q).min()
        for sample in self.samples:
            if math.isfinite(sample.p_next_norm):
                limit = q_floor / (1.0 - sample.rho_next ** 2)
                self.assertGreaterEqual(sample.p_next_norm, limit * (1.0 - 1e-9))

    def test_small_perturbation_stays_optimal(self):
        """The smallest Omega maps back next to P*."""
        closest = min(self.samples, key=lambda s: s.omega_norm)
        floor = np.linalg.norm(self.P_star, 2)
        self.assertLess(closest.omega_norm, 0.1)
        self.assertAlmostEqual(closest.p_next_norm / floor, 1.0, delta=1e-2)

    def test_invalid_arguments(self):
        """At least one trial and a positive scale are required."""
        with self.assertRaises(InvalidInputError):
            value_map_samples(self.prob, 0, seeded(1))
        with self.assertRaises(InvalidInputError):
            value_map_samples(self.prob, 5, seeded(1), scale=0.0)


class TestReducedScaleRuns(unittest.TestCase):
    """Run-level properties on T = 2000 over three seeds."""

    HORIZON = 2000

    @classmethod
    def run_kind(cls, kind, algorithms):
        config = ExperimentConfig.from_dict(
            {
                "experiment": {
                    "horizon": cls.HORIZON,
                    "seed": 5,
                    "trials": 3,
                    "checkpoints": [cls.HORIZON // 10, cls.HORIZON],
                    "algorithms": algorithms,
                },
                "costs": {"kind": kind},
                "comparator": {"search": False},
            }
        )
        return run_trials(config)

    @classmethod
    def setUpClass(cls):
        cls.ledgers = {
            "wishart": cls.run_kind("wishart", ["online"]),
            "diag_uniform": cls.run_kind("diag_uniform", ["online", "recent"]),
            "diag_random_walk": cls.run_kind("diag_random_walk", ["online"]),
        }

    def test_gains_stay_stable(self):
        """Every gain keeps rho(A - BK_t) <= 1 - 1e-9 on all cost kinds."""
        for kind, ledgers in self.ledgers.items():
            for trial, ledger in enumerate(ledgers):
                with self.subTest(kind=kind, trial=trial):
                    self.assertEqual(ledger.failures, {})
                    for name in ledger.algorithms:
                        self.assertLessEqual(np.max(ledger.rho[name]), 1.0 - 1e-9)

    def test_regret_grows_slowly(self):
        """On Wishart costs mean R(T) is at most 2.5 mean R(T / 10)."""
        ledgers = self.ledgers["wishart"]
        tenth = self.HORIZON // 10
        early = np.mean([led.checkpoint_regret[tenth]["online"] for led in ledgers])
        late = np.mean([ledger.final_regret("online") for ledger in ledgers])
        self.assertGreater(early, 0.0)
        self.assertLessEqual(late, 2.5 * early)

    def test_beats_recent_costs(self):
        """Averaged over seeds, following the last costs does worse."""
        ledgers = self.ledgers["diag_uniform"]
        online = np.mean([ledger.final_regret("online") for ledger in ledgers])
        recent = np.mean([ledger.final_regret("recent") for ledger in ledgers])
        online, recent = online / self.HORIZON, recent / self.HORIZON
        self.assertLess(online, recent)

    def test_values_bounded_in_higher_dimension(self):
        """n = 7, m = 5 Wishart runs from random gains never reach 1e12."""
        config = small_config(
            experiment={"trials": 3, "horizon": 1000, "seed": 11},
            system={"n": 7, "m": 5},
        )
        trials = probe_boundedness(config)
        self.assertEqual(len(trials), 3)
        for trial in trials:
            self.assertIsNone(trial.error)
            self.assertFalse(trial.flagged)
            self.assertLess(trial.max_eig, 1e12)



if __name__ == "__main__":
    unittest.main()
