import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from spinarrival.core import PhysicalParams, SpinDirection, TimeBinning
from spinarrival.ensemble import (ABORTED_NODE, ABORTED_STEPS, ARRIVED, CENSORED, EnsembleConfig,
                                  EnsembleRun, arrival_distribution, integrate_batch, integrate_sde,
                                  integrate_trajectory, longitudinal_cdf, manifest_text,
                                  mean_vs_alpha, merge_runs, run_ensemble, sample_initial,
                                  write_records_csv)
from spinarrival.errors import NodeSingularity, TooManyAborts
from spinarrival.guidance import DynamicsSpec
from spinarrival.waveguide import HalfLinePropagator, PacketConfig, init_packet, interpolate


class SyntheticField:
    """``v = (0, 0, amp cos t)``, optionally singular above ``z_bad``."""

    def __init__(self, amp=1.0, z_bad=math.inf):
        self.amp, self.z_bad = amp, z_bad

    def __call__(self, t, pos):
        v = np.zeros_like(pos)
        v[:, 2] = self.amp * math.cos(t)
        return v, pos[:, 2] > self.z_bad


def small_config(**kw):
    base = dict(n_trajectories=200, seed=11, chunk_size=100)
    base.update(kw)
    return EnsembleConfig(**base)


# --- sampling ---------------------------------------------------------------------

def test_transverse_mean(state0):
    x = sample_initial(100_000, 1, state0)
    sd = math.sqrt(state0.params.transverse_variance)
    assert abs(x[:, 0].mean()) < 3 * sd / math.sqrt(x.shape[0])
    assert x[:, 0].std() == pytest.approx(sd, rel=0.02)


def test_longitudinal_chi_square(state0):
    x = sample_initial(100_000, 2, state0)
    edges = np.linspace(1.0, 9.0, 51)
    fine = np.linspace(0.0, 20.0, 200_001)
    f, _ = interpolate(state0.fields, state0.grid, fine)
    dens = np.abs(f) ** 2
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))])
    expected = np.diff(np.interp(edges, fine, cdf))
    expected = np.append(expected, 1.0 - expected.sum()) * x.shape[0]
    counts = np.histogram(x[:, 2], edges)[0]
    counts = np.append(counts, x.shape[0] - counts.sum())
    assert stats.chisquare(counts, expected).pvalue > 0.01


def test_sampling_is_deterministic(state0):
    np.testing.assert_array_equal(sample_initial(500, 4, state0), sample_initial(500, 4, state0))
    assert not np.array_equal(sample_initial(50, 4, state0), sample_initial(50, 5, state0))


@given(st.integers(0, 3000), st.integers(1, 1500))
def test_sampling_depends_only_on_index(start, n):
    s0 = init_packet(PacketConfig(5.0, 1.0, 1.0), EnsembleConfig().resolved_grid, PhysicalParams(omega=8.0))
    full = sample_initial(start + n, 9, s0)
    np.testing.assert_array_equal(sample_initial(n, 9, s0, start=start), full[start:])


def test_cdf_is_monotone(state0):
    _, cdf = longitudinal_cdf(state0)
    assert cdf[0] == 0.0 and cdf[-1] == 1.0 and np.all(np.diff(cdf) >= 0)


# --- deterministic integration ------------------------------------------------------

def test_event_refinement_against_closed_form():
    L, z0 = 10.0, 9.5
    x0 = np.array([[0.0, 0.0, z0], [0.1, -0.2, z0]])
    t_arr, xy, status, final, _ = integrate_batch(SyntheticField(1.0), x0, 5.0, L)
    assert np.all(status == ARRIVED)
    np.testing.assert_allclose(t_arr, math.asin(L - z0), atol=1e-7)
    assert np.all(np.abs(final[:, 2] - L) < 1e-9 * L)
    np.testing.assert_allclose(xy, x0[:, :2])


def test_first_crossing_only():
    # z = 9.2 + sin t crosses 10 upward at asin(0.8), then falls back below.
    x0 = np.array([[0.0, 0.0, 9.2]])
    t_arr, _, status, _, _ = integrate_batch(SyntheticField(1.0), x0, 10.0, 10.0)
    assert status[0] == ARRIVED
    assert t_arr[0] == pytest.approx(math.asin(0.8), abs=1e-7)


def test_start_beyond_plane_arrives_at_zero():
    t_arr, xy, status, _, _ = integrate_batch(SyntheticField(), np.array([[0.3, 0.1, 10.5]]), 5.0, 10.0)
    assert status[0] == ARRIVED and t_arr[0] == 0.0
    np.testing.assert_array_equal(xy[0], [0.3, 0.1])


def test_censored_when_plane_not_reached():
    t_arr, _, status, final, _ = integrate_batch(SyntheticField(1.0), np.array([[0.0, 0.0, 5.0]]), 3.0, 10.0)
    assert status[0] == CENSORED and np.isnan(t_arr[0])
    assert final[0, 2] == pytest.approx(5.0 + math.sin(3.0), abs=1e-7)


def test_node_abort():
    _, _, status, _, _ = integrate_batch(SyntheticField(1.0, z_bad=5.5), np.array([[0, 0, 5.0], [0, 0, 1.0]]),
                                         10.0, 10.0)
    assert status[0] == ABORTED_NODE
    assert status[1] == CENSORED


def test_step_limit_abort():
    _, _, status, _, _ = integrate_batch(SyntheticField(1.0), np.array([[0, 0, 1.0]]), 100.0, 10.0, max_steps=5)
    assert status[0] == ABORTED_STEPS


def test_ballistic_limit():
    params = PhysicalParams(omega=8.0, lam=0.0)
    cfg = EnsembleConfig(params, PacketConfig(5.0, 1.0, 10.0), n_trajectories=400, seed=3, t_max=2.0)
    run = run_ensemble(cfg, SpinDirection.plus_z())
    t = run.t_arrival[run.status == ARRIVED]
    assert t.mean() == pytest.approx((10.0 - 5.0) / 10.0, rel=0.05)


def test_tolerance_halving(state0):
    prop = HalfLinePropagator(state0)
    spec = DynamicsSpec(1.0, 0.0)
    n = SpinDirection.from_angles(0.8, 0.3)
    x0s = sample_initial(8, 21, state0)
    tol = 1e-8
    for x0 in x0s:
        a = integrate_trajectory(x0, n, spec, prop, 15.0, tol)
        b = integrate_trajectory(x0, n, spec, prop, 15.0, tol / 2)
        assert a.status == b.status
        if a.t_arrival is not None:
            assert abs(a.t_arrival - b.t_arrival) < 10 * tol * a.t_arrival


def test_lambda_zero_is_direction_independent():
    cfg = small_config(params=PhysicalParams(omega=8.0, lam=0.0), n_trajectories=100)
    runs = [run_ensemble(cfg, n) for n in (SpinDirection.plus_z(), SpinDirection.plus_x(),
                                          SpinDirection.from_angles(1.0, 2.0))]
    for r in runs[1:]:
        np.testing.assert_array_equal(r.t_arrival, runs[0].t_arrival)
        np.testing.assert_array_equal(r.status, runs[0].status)


def test_single_trajectory_raises_on_request(state0):
    prop = HalfLinePropagator(state0)
    with pytest.raises(NodeSingularity):
        integrate_trajectory((0.0, 0.0, 0.0), SpinDirection.plus_x(), DynamicsSpec(), prop, 1.0,
                             raise_on_abort=True)
    rec = integrate_trajectory((0.0, 0.0, 0.0), SpinDirection.plus_x(), DynamicsSpec(), prop, 1.0)
    assert rec.aborted and rec.status == "aborted:node" and rec.t_arrival is None


def test_deterministic_integration_requires_nu_zero(state0):
    with pytest.raises(ValueError):
        integrate_trajectory((0, 0, 5.0), SpinDirection.plus_x(), DynamicsSpec(1.0, 0.1),
                             HalfLinePropagator(state0), 1.0)


# --- stochastic integration --------------------------------------------------------

def test_sde_same_seed_same_path(state0):
    prop = HalfLinePropagator(state0)
    spec = DynamicsSpec(1.0, 0.5)
    a = integrate_sde((0.1, 0.0, 6.0), SpinDirection.plus_x(), spec, prop, 5.0, 1e-3, seed=4, index=7)
    b = integrate_sde((0.1, 0.0, 6.0), SpinDirection.plus_x(), spec, prop, 5.0, 1e-3, seed=4, index=7)
    c = integrate_sde((0.1, 0.0, 6.0), SpinDirection.plus_x(), spec, prop, 5.0, 1e-3, seed=4, index=8)
    assert a == b
    assert a != c


def test_sde_without_noise_converges_to_deterministic(state0):
    prop = HalfLinePropagator(state0)
    n = SpinDirection.plus_x()
    x0 = (0.1, -0.05, 6.0)
    exact = integrate_trajectory(x0, n, DynamicsSpec(1.0, 0.0), prop, 15.0).t_arrival
    errs = [abs(integrate_sde(x0, n, DynamicsSpec(1.0, 0.0), prop, 15.0, dt, seed=0).t_arrival - exact)
            for dt in (4e-3, 1e-3, 2.5e-4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3


def test_sde_ensemble_independent_of_chunking():
    cfg = small_config(params=PhysicalParams(omega=8.0, diffusion_nu=0.3), n_trajectories=60, chunk_size=60,
                       t_max=5.0)
    a = run_ensemble(cfg, SpinDirection.plus_x())
    b = run_ensemble(replace(cfg, chunk_size=25), SpinDirection.plus_x())
    np.testing.assert_array_equal(a.t_arrival, b.t_arrival)


# --- ensembles ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_run():
    return run_ensemble(small_config(), SpinDirection.plus_x())


def test_run_shape_and_records(small_run):
    assert small_run.n_trajectories == 200
    recs = small_run.records
    assert len(recs) == 200
    for r in recs:
        if r.t_arrival is not None:
            assert 0 <= r.t_arrival <= small_run.config.t_max


def test_run_is_reproducible(small_run):
    again = run_ensemble(small_config(), SpinDirection.plus_x())
    np.testing.assert_array_equal(again.t_arrival, small_run.t_arrival)
    np.testing.assert_array_equal(again.crossing_xy, small_run.crossing_xy)


def test_workers_do_not_change_results(small_run):
    par = run_ensemble(small_config(workers=2), SpinDirection.plus_x())
    np.testing.assert_array_equal(par.t_arrival, small_run.t_arrival)


def test_merge_halves_equals_full(small_run):
    cfg = small_config()
    first = run_ensemble(cfg, SpinDirection.plus_x(), start=0, count=100)
    second = run_ensemble(cfg, SpinDirection.plus_x(), start=100, count=100)
    merged = merge_runs(first, second)
    np.testing.assert_array_equal(merged.t_arrival, small_run.t_arrival)
    b = TimeBinning(cfg.t_max, 20)
    np.testing.assert_array_equal(arrival_distribution(merged, b).mass, arrival_distribution(small_run, b).mass)
    with pytest.raises(ValueError):
        merge_runs(second, first)


def test_merge_off_chunk_boundary_agrees_to_tolerance(small_run):
    # A split inside a chunk changes the shared step sequence, so times agree
    # to integration accuracy rather than bit for bit.
    cfg = small_config()
    merged = merge_runs(run_ensemble(cfg, SpinDirection.plus_x(), start=0, count=130),
                        run_ensemble(cfg, SpinDirection.plus_x(), start=130, count=70))
    np.testing.assert_array_equal(merged.status, small_run.status)
    np.testing.assert_allclose(merged.t_arrival, small_run.t_arrival, atol=1e-6)


def _fake_run(t, status):
    t = np.asarray(t, dtype=float)
    return EnsembleRun(t, np.zeros((t.size, 2)), np.asarray(status, dtype=np.int8), 0,
                       SpinDirection.plus_z(), DynamicsSpec(), EnsembleConfig())


def test_all_censored():
    d = arrival_distribution(_fake_run([np.nan] * 5, [CENSORED] * 5), TimeBinning(1.0, 4))
    np.testing.assert_array_equal(d.mass, [0, 0, 0, 0, 1])


def test_single_sample():
    d = arrival_distribution(_fake_run([0.3], [ARRIVED]), TimeBinning(1.0, 4))
    np.testing.assert_array_equal(d.mass, [0, 1, 0, 0, 0])
    assert d.n_samples == 1


def test_too_many_aborts():
    status = [ARRIVED] * 98 + [ABORTED_NODE] * 2
    with pytest.raises(TooManyAborts):
        arrival_distribution(_fake_run([0.5] * 100, status), TimeBinning(1.0, 4))


def test_aborted_excluded_from_normalization():
    status = [ARRIVED] * 999 + [ABORTED_STEPS]
    d = arrival_distribution(_fake_run([0.1] * 1000, status), TimeBinning(1.0, 2))
    assert d.n_samples == 999 and d.mass[0] == 1.0


def test_mean_vs_alpha_reflected_angle_is_identical():
    cfg = small_config(n_trajectories=60, chunk_size=60)
    a = 0.9
    rows = mean_vs_alpha([a, 2 * math.pi - a], cfg)
    assert rows[0][1:] == rows[1][1:]


def test_mean_vs_alpha_flat_without_spin_term():
    cfg = small_config(params=PhysicalParams(omega=8.0, lam=0.0), n_trajectories=150, chunk_size=150)
    rows = mean_vs_alpha([0.0, math.pi / 2, math.pi], cfg)
    means = [r[1] for r in rows]
    assert means[0] == means[1] == means[2]


def test_records_csv_and_manifest(tmp_path, small_run):
    write_records_csv(small_run, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "index,t_arrival,x,y,status"
    assert len(lines) == 201
    text = manifest_text(small_run.config, [SpinDirection.plus_x()])
    assert "seed = 11" in text and "+x = 1.0, 0.0, 0.0" in text
