"""Acceptance suite: one test per shipping criterion, each printing PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and measured values.  The heavyweight fixtures (24 h full-force
propagation and the Monte Carlo ensembles) are shared module-wide, so the
whole suite stays in the minutes range.
"""

import json
import math

import numpy as np
import pytest

from satsched.access import ConstraintSet, discretize, find_opportunities
from satsched.astro import Epoch, StateVector
from satsched.constants import GM_EARTH, R_EARTH_EQ
from satsched.dynamics import (
    ForceModelConfig,
    SpacecraftParams,
    gravity_potential,
    gravity_spherical_harmonic,
    propagate_rk4,
)
from satsched.evaluation import evaluate_plans
from satsched.pipeline import run_pipeline
from satsched.planners import (
    plan_graph,
    plan_mdp_forward_search,
    plan_milp,
    validate_plan,
)
from satsched.planners.graph import longest_path
from satsched.planners.mdp import ForwardSearch
from satsched.scenario import Scenario, generate_targets
from satsched.uncertainty import (
    CollectProbabilityTable,
    EnsembleWindows,
    OrbitCovariance,
    collect_probabilities,
    ensemble_windows,
    sample_initial_states,
    window_statistics,
)

from conftest import (
    EPOCH0,
    PERIOD_550,
    SMA_550,
    V_CIRC_550,
    brute_best_sequence,
    brute_longest_path_weight,
    brute_milp_optimum,
    random_collect_instance,
)

SC = SpacecraftParams()
CFG_FULL = ForceModelConfig()
CS = ConstraintSet(max_slew_rate=math.radians(1.0), lookahead=600.0)
CS_ORACLE = ConstraintSet(max_slew_rate=math.radians(1.0), lookahead=1e12)
DAY = 86400.0


def report(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {number} {name}: {detail}"


@pytest.fixture(scope="module")
def nominal_polar():
    return StateVector(EPOCH0, np.array([SMA_550, 0.0, 0.0]),
                       np.array([0.0, 0.0, V_CIRC_550]))


@pytest.fixture(scope="module")
def nominal_traj(nominal_polar):
    """24 h full-force propagation shared by every orbit-based criterion."""
    return propagate_rk4(nominal_polar, SC, CFG_FULL, DAY, 10.0)


@pytest.fixture(scope="module")
def trend_assets(nominal_polar, nominal_traj):
    """100-target window ensembles at 5000 m and 1000 m (20 samples each)."""
    targets = generate_targets(100, seed=101)
    windows = find_opportunities(nominal_traj, targets)
    ensembles = {}
    for sigma in (5000.0, 1000.0):
        cov = OrbitCovariance(sigma, 20, seed=202)
        samples = sample_initial_states(nominal_polar, cov)
        ensembles[sigma] = ensemble_windows(
            nominal_traj, windows, samples, targets, SC, CFG_FULL, DAY, 10.0, cov=cov
        )
    return targets, windows, ensembles


@pytest.fixture(scope="module")
def table4_assets(nominal_polar, nominal_traj):
    """150-target plans from all three planners plus their evaluation."""
    targets = generate_targets(150, seed=150)
    rewards = {t.id: t.reward for t in targets}
    windows = find_opportunities(nominal_traj, targets)
    collects = discretize(windows, targets, nominal_traj)

    cov_plan = OrbitCovariance(5000.0, 10, seed=301)
    ensemble = ensemble_windows(
        nominal_traj, windows, sample_initial_states(nominal_polar, cov_plan),
        targets, SC, CFG_FULL, DAY, 10.0, cov=cov_plan,
    )
    probs = collect_probabilities(collects, ensemble)

    plans = {
        "graph": plan_graph(collects, rewards, CS),
    }
    plans["milp"] = plan_milp(collects, rewards, CS, time_limit_s=30.0,
                              warm_start=plans["graph"])
    plans["mdp"] = plan_mdp_forward_search(collects, rewards, CS, probs, depth=2,
                                           t_start=EPOCH0, t_end=EPOCH0 + DAY)
    by_id = {c.id: c for c in collects}
    for plan in plans.values():
        validate_plan(plan, by_id, CS)

    cov_eval = OrbitCovariance(5000.0, 50, seed=401)
    reports = evaluate_plans(list(plans.values()), nominal_polar, cov_eval,
                             targets, CFG_FULL, SC, DAY, 10.0)
    return plans, reports


def zero_uncertainty_table(collects, windows) -> CollectProbabilityTable:
    """Collect probabilities for a zero-error ensemble of one nominal sample.

    With zero initial error the single sample trajectory is the nominal one,
    so its windows are exactly the nominal windows; this routes through the
    real counting code without re-propagating.
    """
    image_ids = sorted(windows)
    refs = [(img, k) for img in image_ids for k in range(len(windows[img]))]
    starts = np.array([[windows[img][k].t_start.seconds] for img, k in refs]) \
        if refs else np.zeros((0, 1))
    durations = np.array([[windows[img][k].duration] for img, k in refs]) \
        if refs else np.zeros((0, 1))
    ensemble = EnsembleWindows(
        covariance=OrbitCovariance(0.0, 1),
        nominal=windows,
        sample_windows=[windows],
        window_refs=refs,
        matched_starts=starts,
        matched_durations=durations,
        unmatched_windows=0,
        t0_seconds=EPOCH0.seconds,
        horizon_s=DAY,
    )
    return collect_probabilities(collects, ensemble)


class TestCriterion1:
    def test_two_body_roundtrip_and_energy(self):
        state = StateVector(EPOCH0, np.array([SMA_550, 0.0, 0.0]),
                            np.array([0.0, V_CIRC_550, 0.0]))
        cfg = ForceModelConfig.two_body()
        traj = propagate_rk4(state, SC, cfg, PERIOD_550, 10.0)
        err = float(np.linalg.norm(traj.states[-1, :3] - state.position))

        day = propagate_rk4(state, SC, cfg, DAY, 10.0)

        def energy(row):
            return 0.5 * np.dot(row[3:], row[3:]) - GM_EARTH / np.linalg.norm(row[:3])

        e0 = energy(day.states[0])
        drift = max(abs(energy(day.states[i]) - e0) for i in range(0, len(day), 100))
        rel = drift / abs(e0)
        report(1, "two-body round-trip", err < 1.0 and rel < 1e-9,
               f"period error {err:.4f} m, energy drift {rel:.2e}")


class TestCriterion2:
    def test_window_duration_calibration(self, nominal_traj):
        targets = generate_targets(600, seed=42)
        windows = find_opportunities(nominal_traj, targets)
        durations = [w.duration for ws in windows.values() for w in ws]
        mean = float(np.mean(durations))
        report(2, "window duration calibration", 120.0 <= mean <= 240.0,
               f"mean {mean:.1f} s over {len(durations)} windows")


class TestCriterion3:
    def test_start_time_scatter_trend(self, trend_assets):
        _, _, ensembles = trend_assets
        stats5000 = window_statistics(ensembles[5000.0])
        stats1000 = window_statistics(ensembles[1000.0])
        final = stats5000.sigma_start_s[-1]
        in_band = 38.0 <= final <= 114.0
        dominates = all(
            a > b for a, b in zip(stats5000.sigma_start_s[5:], stats1000.sigma_start_s[5:])
        )
        report(3, "start-time scatter trend", in_band and dominates,
               f"sigma(24h, 5000m) = {final:.1f} s, dominates 1000m from 6h: {dominates}")


class TestCriterion4:
    def test_ratio_trend(self, trend_assets):
        _, _, ensembles = trend_assets
        stats = window_statistics(ensembles[5000.0])
        ratio = stats.ratios[-1]
        slope = float(np.polyfit(stats.bucket_hours, stats.ratios, 1)[0])
        report(4, "scatter-to-duration ratio trend",
               0.25 <= ratio <= 0.80 and slope > 0.0,
               f"ratio(24h) = {ratio:.3f}, slope {slope:.4f}/h")


class TestCriterion5:
    def test_planner_comparison_under_uncertainty(self, table4_assets):
        plans, reports = table4_assets
        a = reports["mdp"].stdev_reward < reports["graph"].stdev_reward
        b = all(reports[k].mean_reward < plans[k].nominal_reward for k in plans)
        c = plans["mdp"].runtime_s < plans["graph"].runtime_s
        detail = (
            f"stdev mdp {reports['mdp'].stdev_reward:.1f} < graph "
            f"{reports['graph'].stdev_reward:.1f}: {a}; mean<nominal: {b}; "
            f"runtime mdp {plans['mdp'].runtime_s:.2f}s < graph "
            f"{plans['graph'].runtime_s:.2f}s: {c}"
        )
        report(5, "uncertainty-aware comparison", a and b and c, detail)


class TestCriterion6:
    def test_nominal_reward_ordering(self, nominal_traj):
        ok = True
        details = []
        for seed in (700, 701, 702, 703, 704):
            targets = generate_targets(50, seed=seed)
            rewards = {t.id: t.reward for t in targets}
            windows = find_opportunities(nominal_traj, targets)
            collects = discretize(windows, targets, nominal_traj)
            probs = zero_uncertainty_table(collects, windows)
            assert all(p == 1.0 for p in probs.probabilities.values())
            g = plan_graph(collects, rewards, CS)
            m = plan_milp(collects, rewards, CS, time_limit_s=20.0, warm_start=g)
            d = plan_mdp_forward_search(collects, rewards, CS, probs, depth=2,
                                        t_start=EPOCH0, t_end=EPOCH0 + DAY)
            inst_ok = m.nominal_reward >= g.nominal_reward >= d.nominal_reward
            ok &= inst_ok
            details.append(
                f"{seed}: {m.nominal_reward:.0f}/{g.nominal_reward:.0f}/{d.nominal_reward:.0f}"
            )
        report(6, "nominal ordering milp>=graph>=mdp", ok, "; ".join(details))


class TestCriterion7:
    def test_graph_matches_exhaustive_longest_path(self):
        rng = np.random.default_rng(71)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(8, 16))
            collects, rewards = random_collect_instance(rng, n_images=7, n_collects=n)
            _, weight = longest_path(collects, rewards, CS_ORACLE)
            oracle = brute_longest_path_weight(collects, rewards, CS_ORACLE)
            worst = max(worst, abs(weight - oracle))
            assert abs(weight - oracle) < 1e-9
        report(7, "graph longest-path oracle", worst < 1e-9,
               f"200 instances <= 15 collects, max |delta| {worst:.1e}")


class TestCriterion8:
    def test_milp_matches_enumeration(self):
        rng = np.random.default_rng(81)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(6, 13))
            collects, rewards = random_collect_instance(rng, n_images=6, n_collects=n)
            plan = plan_milp(collects, rewards, CS_ORACLE, time_limit_s=30.0)
            assert plan.optimal
            oracle = brute_milp_optimum(collects, rewards, CS_ORACLE)
            worst = max(worst, abs(plan.nominal_reward - oracle))
            assert abs(plan.nominal_reward - oracle) < 1e-9
        report(8, "milp enumeration oracle", worst < 1e-9,
               f"200 instances <= 12 collects, max |delta| {worst:.1e}")


class TestCriterion9:
    def test_forward_search_matches_sequence_optimum(self):
        rng = np.random.default_rng(91)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(3, 7))
            collects, rewards = random_collect_instance(rng, n_images=4, n_collects=n)
            search = ForwardSearch(collects, rewards, CS_ORACLE,
                                   CollectProbabilityTable(
                                       {c.id: 1.0 for c in collects}, 0.0, 1, 0))
            _, value = search.select_action(search.initial_state(Epoch(-1.0)), n + 1)
            total = sum(search.reward_vector)
            oracle = 2.0 * brute_best_sequence(collects, rewards, CS_ORACLE) - total
            worst = max(worst, abs(value - oracle))
            assert abs(value - oracle) < 1e-9
        report(9, "forward-search sequence oracle", worst < 1e-9,
               f"100 instances <= 6 collects, depth > size, max |delta| {worst:.1e}")


class TestCriterion10:
    def test_collect_probability_hand_counts(self):
        from satsched.access import Opportunity
        from conftest import make_collect

        nominal = {0: [Opportunity(0, Epoch(90.0), Epoch(200.0))]}
        sample_sets = [
            {0: [Opportunity(0, Epoch(95.0), Epoch(150.0))]},
            {0: [Opportunity(0, Epoch(100.0), Epoch(110.0))]},
            {0: [Opportunity(0, Epoch(104.0), Epoch(200.0))]},
            {0: [Opportunity(0, Epoch(50.0), Epoch(111.0))]},
            {0: []},
        ]
        refs = [(0, 0)]
        ensemble = EnsembleWindows(
            covariance=OrbitCovariance(0.0, 5),
            nominal=nominal,
            sample_windows=sample_sets,
            window_refs=refs,
            matched_starts=np.zeros((1, 5)),
            matched_durations=np.zeros((1, 5)),
            unmatched_windows=0,
            t0_seconds=0.0,
            horizon_s=DAY,
        )
        table = collect_probabilities([make_collect(0, 0, 100.0)], ensemble)
        got = table.probabilities[0]
        report(10, "hand-counted collect probability", got == pytest.approx(0.6),
               f"3-of-5 ensemble gives p = {got}")


class TestCriterion11:
    def test_gravity_gradient_consistency(self):
        rng = np.random.default_rng(111)
        h = 50.0
        worst = 0.0
        for _ in range(100):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            p = u * rng.uniform(R_EARTH_EQ + 300e3, R_EARTH_EQ + 1500e3)
            force = gravity_spherical_harmonic(p, 10, 10)
            fd = np.empty(3)
            for i in range(3):
                dp = np.zeros(3)
                dp[i] = h
                fd[i] = (gravity_potential(p + dp, 10, 10)
                         - gravity_potential(p - dp, 10, 10)) / (2.0 * h)
            rel = float(np.linalg.norm(fd - force) / np.linalg.norm(force))
            worst = max(worst, rel)
            assert rel < 1e-6
        report(11, "gravity gradient consistency", worst < 1e-6,
               f"100 points, worst relative error {worst:.2e}")


class TestCriterion12:
    def test_edge_collects_less_likely_than_center(self, nominal_traj, trend_assets):
        targets, windows, ensembles = trend_assets
        collects = discretize(windows, targets, nominal_traj)
        table = collect_probabilities(collects, ensembles[5000.0])
        by_image = {}
        for c in collects:
            by_image.setdefault(c.image_id, []).append(c)
        edge, center = [], []
        for image_id, ws in windows.items():
            for w in ws:
                inside = [c for c in by_image.get(image_id, [])
                          if w.t_start.seconds - 1e-6 <= c.t_start.seconds
                          and c.t_end.seconds <= w.t_end.seconds + 1e-6]
                if len(inside) < 3:
                    continue
                edge.append(table.probabilities[inside[0].id])
                mid = w.midpoint_seconds
                nearest = min(inside, key=lambda c: abs(
                    0.5 * (c.t_start.seconds + c.t_end.seconds) - mid))
                center.append(table.probabilities[nearest.id])
        mean_edge = float(np.mean(edge))
        mean_center = float(np.mean(center))
        report(12, "edge collects riskier than center", mean_edge < mean_center,
               f"mean p edge {mean_edge:.3f} < center {mean_center:.3f} "
               f"({len(edge)} windows)")


class TestCriterion13:
    def test_reruns_byte_identical(self, tmp_path):
        scenario = Scenario.from_json_dict({
            "name": "determinism",
            "start_epoch": "2026-03-21T00:00:00",
            "duration_s": 7200.0,
            "orbit": {"altitude_m": 550e3, "inclination_deg": 90.0},
            "targets": {"count": 25, "seed": 9},
            "uncertainty": {"sigma_pos_m": 2500.0, "n_samples": 4, "seed": 13},
            "planners": {"names": ["graph", "milp", "mdp"], "milp_time_limit_s": 5.0},
            "evaluation": {"n_samples": 4, "seed": 14},
        })
        run_pipeline(scenario, tmp_path / "a")
        run_pipeline(scenario, tmp_path / "b")
        identical = True
        checked = []
        for name in ("plan_graph.json", "plan_milp.json", "plan_mdp.json"):
            da = (tmp_path / "a" / name).read_bytes()
            db = (tmp_path / "b" / name).read_bytes()
            identical &= da == db
            checked.append(name)
        report(13, "end-to-end determinism", identical,
               f"byte-identical: {', '.join(checked)}")
