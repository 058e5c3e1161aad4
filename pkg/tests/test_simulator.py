import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secrecy_aloha.errors import InsufficientData
from secrecy_aloha.regions import SystemParams, clean_slot_prob, dominant_success_prob
from secrecy_aloha.simulator import (
    SimConfig,
    detect_stability,
    queue_drift,
    run_replications,
    run_simulation,
    simulate_replication,
    write_trace_csv,
)


def sp(lam=(0.1, 0.1), q=(0.5, 0.5), pf=None):
    pf = np.zeros(len(lam)) if pf is None else np.array(pf, float)
    return SystemParams(np.array(lam, float), np.array(q, float), pf)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(sp(), n_slots=0, seed=1)
    with pytest.raises(ValueError):
        SimConfig(sp(), n_slots=10, seed=1, warmup_slots=10)
    with pytest.raises(ValueError):
        SimConfig(sp(), n_slots=10, seed=1, replications=0)


def test_stable_original_throughput_equals_arrivals():
    m = run_simulation(SimConfig(sp(), n_slots=10**6, seed=5))
    assert m.total_throughput == pytest.approx(0.2, abs=0.01)
    assert m.stable_verdict.all()


def test_dominant_throughput_half():
    m = run_replications(SimConfig(sp(), n_slots=200_000, seed=3, dominant_mode=True, replications=4))
    assert abs(m.total_throughput - 0.5) < 3 * m.ci_halfwidth["total_throughput"]


def test_silent_users_accumulate_arrivals():
    rep = simulate_replication(SimConfig(sp(q=(0.0, 0.0)), n_slots=20_000, seed=2), keep_trajectory=True)
    assert rep.throughput.sum() == 0
    np.testing.assert_allclose(rep.final_queue / 20_000, [0.1, 0.1], atol=0.01)
    np.testing.assert_allclose(rep.drift, [0.1, 0.1], atol=0.02)
    assert not rep.stable.any()


def test_conservation_exact():
    cfg = SimConfig(sp(lam=(0.3, 0.2, 0.05), q=(0.4, 0.3, 0.6), pf=(0.1, 0.0, 0.3)),
                    n_slots=50_000, seed=8, warmup_slots=1000)
    rep = simulate_replication(cfg)
    np.testing.assert_array_equal(rep.arrivals - rep.departures, rep.final_queue)


@settings(max_examples=20)
@given(lam=st.tuples(st.floats(0, 0.5), st.floats(0, 0.5)), q=st.tuples(st.floats(0, 1), st.floats(0, 1)),
       dominant=st.booleans(), seed=st.integers(0, 2**32 - 1))
def test_conservation_property(lam, q, dominant, seed):
    rep = simulate_replication(SimConfig(sp(lam=lam, q=q), n_slots=3000, seed=seed, dominant_mode=dominant))
    np.testing.assert_array_equal(rep.arrivals - rep.departures, rep.final_queue)
    for frac in (rep.throughput, rep.empty_prob, rep.clean_tx_fraction):
        assert np.all((frac >= 0) & (frac <= 1))
    assert 0 <= rep.collision_fraction <= 1


@settings(max_examples=10)
@given(q=st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95)),
       pf=st.tuples(st.floats(0, 0.6), st.floats(0, 0.6)), seed=st.integers(0, 2**32 - 1))
def test_dominant_success_matches_formula(q, pf, seed):
    p = sp(lam=(0.0, 0.0), q=q, pf=pf)
    m = run_replications(SimConfig(p, n_slots=100_000, seed=seed, dominant_mode=True, replications=6))
    ci = m.ci_halfwidth["throughput_per_user"]
    assert np.all(np.abs(m.throughput_per_user - dominant_success_prob(p)) < 4 * ci + 1e-12)


def test_dominant_clean_tx_matches_occupancy():
    p = sp(lam=(0.0, 0.0), q=(0.3, 0.6), pf=(0.2, 0.5))
    m = run_replications(SimConfig(p, n_slots=200_000, seed=12, dominant_mode=True, replications=5))
    expected = clean_slot_prob(p.tx_prob)
    assert np.all(np.abs(m.clean_tx_fraction_per_user - expected) < 4 * m.ci_halfwidth["clean_tx_fraction_per_user"])
    # the secrecy verdict read off the simulation agrees with the analytic one
    rho = np.array([0.2, 0.2])
    np.testing.assert_array_equal(rho >= m.clean_tx_fraction_per_user, rho >= expected)


def test_collision_fraction_dominant():
    p = sp(lam=(0.0, 0.0), q=(0.5, 0.5))
    m = run_replications(SimConfig(p, n_slots=200_000, seed=4, dominant_mode=True, replications=4))
    assert abs(m.collision_fraction - 0.25) < 4 * m.ci_halfwidth["collision_fraction"]


def test_warmup_excluded_from_rates():
    cfg = SimConfig(sp(q=(0.0, 0.0)), n_slots=10_000, seed=1, warmup_slots=9_000)
    rep = simulate_replication(cfg)
    # after 9000 silent slots the queues are never empty
    np.testing.assert_array_equal(rep.empty_prob, [0.0, 0.0])


# -- stability detection ---------------------------------------------------------------

def test_overloaded_queues_unstable():
    rep = simulate_replication(SimConfig(sp(lam=(0.4, 0.4), q=(0.5, 0.5)), n_slots=100_000, seed=6))
    assert not rep.stable.any()
    np.testing.assert_allclose(rep.drift, [0.15, 0.15], atol=0.02)


def test_light_load_stable():
    rep = simulate_replication(SimConfig(sp(lam=(0.1, 0.1), q=(0.5, 0.5)), n_slots=100_000, seed=6))
    assert rep.stable.all()


def test_zero_arrivals_stable():
    traj = np.zeros((5000, 2))
    np.testing.assert_array_equal(queue_drift(traj), [0.0, 0.0])
    assert detect_stability(traj).all()


def test_linear_growth_detected():
    t = np.arange(4000, dtype=float)
    traj = np.column_stack([0.05 * t, np.zeros_like(t)])
    np.testing.assert_allclose(queue_drift(traj), [0.05, 0.0], atol=1e-12)
    np.testing.assert_array_equal(detect_stability(traj), [False, True])


def test_short_trajectory_rejected():
    with pytest.raises(InsufficientData):
        detect_stability(np.zeros((999, 2)))


# -- replications ------------------------------------------------------------------------

def test_replications_deterministic():
    cfg = SimConfig(sp(), n_slots=20_000, seed=77, replications=2)
    a, b = run_replications(cfg), run_replications(cfg)
    assert a.to_dict() == b.to_dict()


def test_replications_use_distinct_streams():
    cfg = SimConfig(sp(), n_slots=20_000, seed=77, replications=2)
    r0, r1 = simulate_replication(cfg, 0), simulate_replication(cfg, 1)
    assert not np.array_equal(r0.arrivals, r1.arrivals)


def test_single_replication_has_no_ci():
    m = run_simulation(SimConfig(sp(), n_slots=5000, seed=1))
    assert m.ci_halfwidth is None
    assert m.to_dict()["ci_halfwidth"] is None


def test_ci_shrinks_with_replications():
    p = sp(lam=(0.0, 0.0), q=(0.3, 0.3))
    small = run_replications(SimConfig(p, n_slots=20_000, seed=2, dominant_mode=True, replications=8))
    large = run_replications(SimConfig(p, n_slots=20_000, seed=2, dominant_mode=True, replications=32))
    ratio = large.ci_halfwidth["total_throughput"] / small.ci_halfwidth["total_throughput"]
    assert ratio == pytest.approx(0.5, rel=0.5)


# -- trace -------------------------------------------------------------------------------

def test_trace_csv(tmp_path):
    cfg = SimConfig(sp(lam=(0.3, 0.3), q=(0.6, 0.6)), n_slots=500, seed=3)
    path = write_trace_csv(tmp_path / "trace.csv", cfg)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1000
    assert list(rows[0]) == ["slot", "user", "queue_len", "transmitted", "collided", "succeeded"]
    for r in rows:
        tx, col, ok = int(r["transmitted"]), int(r["collided"]), int(r["succeeded"])
        assert not (col and ok) and (tx or not (col or ok))
    by_slot = {}
    for r in rows:
        by_slot.setdefault(r["slot"], []).append(int(r["collided"]))
    # with two users a collision involves both of them
    assert all(v == [1, 1] for v in by_slot.values() if any(v))
    assert any(any(v) for v in by_slot.values())
    rep = simulate_replication(cfg)
    assert int(rows[-2]["queue_len"]) == rep.final_queue[0]


# -- queue coupling -------------------------------------------------------------------------

def test_busy_fraction_times_service_rate_equals_arrival_rate():
    p = sp(lam=(0.2, 0.2), q=(0.5, 0.5))
    m = run_replications(SimConfig(p, n_slots=500_000, seed=21, warmup_slots=10_000, replications=4))
    served = (1 - m.empty_prob_per_user) * m.clean_tx_given_busy * (1 - p.fail_prob)
    np.testing.assert_allclose(served, [0.2, 0.2], atol=3e-3)


def test_queues_are_positively_coupled():
    # Service given busy falls short of the product form evaluated at the
    # simulated empty probabilities: the other queue is more often busy when
    # this one is. This is why the independence fixed point overestimates p_e.
    from secrecy_aloha.regions import occupancy_given_busy

    p = sp(lam=(0.2, 0.2), q=(0.5, 0.5))
    m = run_replications(SimConfig(p, n_slots=500_000, seed=22, warmup_slots=10_000, replications=4))
    product_form = occupancy_given_busy(p.tx_prob, m.empty_prob_per_user)
    assert np.all(m.clean_tx_given_busy < product_form - 0.01)
