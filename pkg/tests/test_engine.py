import numpy as np
import pytest

import src.core.engine as engine_module
from src.analysis.pitch import estimate_f0
from src.analysis.reference import stencil_reference, theta_reference
from src.cli.verify import window_rms
from src.core.config import AppConfig
from src.core.engine import ENGINE_VERSION, Simulation, SynthesisEngine, render, step
from src.core.errors import ConfigError, SimulationDivergedError
from src.core.params import Boundary
from src.excitation.bow import friction_curve
from src.excitation.hammer import HammerState, contact_force
from src.excitation.schedule import excitation_schedule
from src.excitation.specs import BowSpec, Envelope, HammerSpec, PluckSpec
from src.numerics.grid_ops import Grid, compute_grid


def test_rest_is_a_fixed_point(make_config):
    result = render(make_config(excitations=(), alpha=3.0, kappa=2.0))
    assert not result.samples.any()


def test_zero_duration(make_config):
    result = render(make_config(duration=0.0))
    assert result.samples.shape == (0,)
    assert result.provenance["n_samples"] == 0


@pytest.mark.parametrize("duration, expected", [(0.05, 2400), (1 / 48000, 1), (2 / 48000, 2)])
def test_sample_count(make_config, duration, expected):
    assert len(render(make_config(duration=duration)).samples) == expected


def test_first_sample_is_initial_readout(make_config):
    config = make_config(duration=0.01)
    sim = Simulation(config)
    result = render(config)
    assert result.samples[0] == sim.readout(sim.initial_state().w_prev)


def test_render_is_deterministic(make_config):
    config = make_config(alpha=3.0, kappa=5.88)
    first = render(config)
    second = render(config)
    np.testing.assert_array_equal(first.samples, second.samples)


def test_provenance(make_config):
    config = make_config(seed=11)
    result = render(config)
    assert result.provenance["engine_version"] == ENGINE_VERSION
    assert result.provenance["seed"] == 11
    assert result.provenance["config"] == config.to_dict()
    assert result.provenance["grid"]["n_t"] == compute_grid(config.string, config.sample_rate).n_t


def test_invalid_config_is_rejected(make_config):
    with pytest.raises(ConfigError, match="alpha"):
        render(make_config(alpha=0.5))


def test_linear_string_keeps_longitudinal_field_at_zero(make_config):
    result = render(make_config(kappa=2.0, alpha=1.0), dump_fields=True)
    assert np.abs(result.z_field).max() <= 1e-14
    assert np.abs(result.u_field).max() > 0


def test_nonlinear_string_excites_longitudinal_field(make_config):
    result = render(make_config(kappa=2.0, alpha=3.0, excitations=(PluckSpec(c0=0.0078),)), dump_fields=True)
    assert np.abs(result.z_field).max() > 0


def test_matches_pointwise_stencil(make_config):
    config = make_config(f0=750.0, theta=1.0)
    sim = Simulation(config)
    state = sim.initial_state()
    n_steps = 300
    reference = stencil_reference(
        state.w_prev[: sim.n_u], state.w_curr[: sim.n_u], n_steps,
        config.string.gamma, config.string.kappa, sim.k, sim.grid.h_t, config.boundary,
    )
    for n in range(n_steps):
        state = step(state, sim.assembler.assemble(state.w_curr, state.step))
        np.testing.assert_allclose(state.w_curr[: sim.n_u], reference[n + 2], rtol=0, atol=1e-10)


@pytest.mark.parametrize("boundary", list(Boundary))
@pytest.mark.parametrize("kappa, sigma0_t, sigma1_t", [(0.0, 0.0, 0.0), (2.0, 1.0, 1e-4), (5.88, 0.5, 5e-4)])
def test_matches_dense_theta_scheme(make_config, boundary, kappa, sigma0_t, sigma1_t):
    config = make_config(f0=750.0, kappa=kappa, sigma0_t=sigma0_t, sigma1_t=sigma1_t, boundary=boundary)
    s = config.string
    assert s.theta < 1.0
    sim = Simulation(config)
    state = sim.initial_state()
    n_steps = 200
    reference = theta_reference(
        state.w_prev[: sim.n_u], state.w_curr[: sim.n_u], n_steps, s.gamma, s.kappa, s.theta,
        sim.k, sim.grid.h_t, s.sigma0_t, s.sigma1_t, boundary,
    )
    for n in range(n_steps):
        state = step(state, sim.assembler.assemble(state.w_curr, state.step))
        np.testing.assert_allclose(state.w_curr[: sim.n_u], reference[n + 2], rtol=0, atol=1e-12)


def test_dense_theta_scheme_reduces_to_stencil_at_theta_one():
    rng = np.random.default_rng(7)
    u0, u1 = rng.normal(size=(2, 19)) * 1e-3
    k, h = 1 / 48000, 0.05
    explicit = stencil_reference(u0, u1, 50, 300.0, 1.0, k, h)
    dense = theta_reference(u0, u1, 50, 300.0, 1.0, 1.0, k, h)
    np.testing.assert_allclose(dense, explicit, rtol=0, atol=1e-12)


@pytest.mark.parametrize("alpha", [1.0, 3.0])
def test_lossless_scheme_is_time_reversible(make_config, alpha):
    sim = Simulation(make_config(alpha=alpha, kappa=2.0))
    start = sim.initial_state()
    state = start
    for _ in range(500):
        state, _ = sim.advance(state)
    state = state.reversed()
    for _ in range(500):
        state, _ = sim.advance(state)
    np.testing.assert_allclose(state.w_curr, start.w_prev, rtol=0, atol=1e-10)
    np.testing.assert_allclose(state.w_prev, start.w_curr, rtol=0, atol=1e-10)


@pytest.mark.slow
def test_nonlinear_string_stays_bounded(make_config):
    config = make_config(alpha=3.0, kappa=5.88, duration=1.0, excitations=(PluckSpec(c0=0.0078),))
    result = render(config)
    assert np.isfinite(result.samples).all()
    assert result.diagnostics.peak <= 10 * 0.0078
    assert not result.diagnostics.warnings


def test_losses_never_add_energy(make_config):
    config = make_config(sigma0_t=1.0, duration=0.5)
    rms = window_rms(render(config).samples, int(0.05 * config.sample_rate))
    assert np.max(rms[1:] / rms[:-1]) <= 1.05
    assert rms[-1] < rms[0]


def test_zero_force_bow_changes_nothing(make_config):
    pluck = PluckSpec(c0=0.002)
    silent_bow = BowSpec(f_b=Envelope.constant(0.0))
    plain = render(make_config(alpha=2.0, excitations=(pluck,)))
    bowed = render(make_config(alpha=2.0, excitations=(pluck, silent_bow)))
    np.testing.assert_array_equal(plain.samples, bowed.samples)


def test_bow_drives_string_from_rest(make_config):
    bow = BowSpec(f_b=Envelope.constant(50.0), v_b=Envelope.constant(0.2))
    result = render(make_config(excitations=(bow,), duration=0.05))
    assert np.abs(result.samples).max() > 0
    assert not np.isnan(result.diagnostics.bow_v_rel[1:-1]).any()


@pytest.mark.slow
def test_released_bow_rings_at_string_pitch(make_config):
    bow = BowSpec(
        x_b=Envelope.constant(0.12),
        v_b=Envelope.constant(0.2),
        f_b=Envelope((0.0, 0.29, 0.3), (50.0, 50.0, 0.0)),
        end=0.3,
    )
    config = make_config(f0=300.0, kappa=0.5, duration=0.6, excitations=(bow,))
    result = render(config)
    tail = result.samples[int(0.35 * config.sample_rate):]
    assert estimate_f0(tail, config.sample_rate, tail=1.0) == pytest.approx(300.0, rel=0.02)


def test_hammer_strike(make_config):
    hammer = HammerSpec(x_h=0.12, u_h0=-1e-4, v_h0=1.0)
    result = render(make_config(excitations=(hammer,), duration=0.02))
    diag = result.diagnostics
    assert diag.hammer_force.max() > 0
    assert (diag.hammer_force >= 0).all()
    assert diag.newton_iterations.sum() > 0
    assert np.abs(result.samples).max() > 0


def test_hammer_moving_away_never_touches(make_config):
    hammer = HammerSpec(x_h=0.2, u_h0=-1e-3, v_h0=-1.0)
    result = render(make_config(excitations=(hammer,), duration=0.02))
    assert not result.samples.any()
    assert not result.diagnostics.hammer_force.any()


def _check_coupled_step(sim, state, new, report, atol=1e-13):
    """The combined forcing equals the sum of the per-excitation terms and each term solves its own law."""
    specs = sim.config.excitations
    k, n_u = sim.k, sim.n_u
    t = state.step * k
    active = excitation_schedule(specs, t)
    assert set(report.strengths) == set(active)

    gamma = np.zeros(sim.grid.size)
    for i in active:
        spec_x = specs[i].x_b(t) if isinstance(specs[i], BowSpec) else specs[i].x_h
        gamma[:n_u] += report.strengths[i] * sim.reader(spec_x) / sim.grid.h_t
    rebuilt = step(state, sim.assembler.assemble(state.w_curr, state.step), gamma)
    np.testing.assert_allclose(rebuilt.w_curr, new.w_curr, rtol=0, atol=atol)

    for i in active:
        spec = specs[i]
        if isinstance(spec, HammerSpec):
            reader = sim.reader(spec.x_h)
            before = state.hammers.get(i) or HammerState.launch(spec, k)
            after = new.hammers[i]
            force = after.last_force
            assert force >= 0.0
            assert report.strengths[i] == pytest.approx(-(k ** 2) * spec.mass_ratio * force, rel=1e-12, abs=0.0)
            eta_next = after.u_h_curr - reader @ new.w_curr[:n_u]
            eta_prev = before.u_h_prev - reader @ state.w_prev[:n_u]
            expected = contact_force(0.5 * (eta_next + eta_prev), spec.omega_h, spec.alpha_h)
            assert abs(force - expected) <= 1e-6 * max(force, expected) + 1e-9
        else:
            reader = sim.reader(spec.x_b(t))
            force = spec.f_b(t)
            factor = report.strengths[i] / (k ** 2 * force)
            v_rel = reader @ (new.w_curr[:n_u] - state.w_prev[:n_u]) / (2.0 * k) - spec.v_b(t)
            assert abs(factor) <= 1.0 + 1e-9
            if new.bows[i].stuck:
                assert abs(v_rel) <= 1e-6
            else:
                assert abs(factor - friction_curve(v_rel, spec.a, spec.eps)) <= 1e-5
                # friction drags the string along the bow
                assert factor * np.sign(v_rel) >= 0.0


def _run_coupled(sim, n_steps):
    state = sim.initial_state()
    reports = []
    for _ in range(n_steps):
        new, report = sim.advance(state)
        _check_coupled_step(sim, state, new, report)
        reports.append(report)
        state = new
    return state, reports


@pytest.mark.parametrize("alpha, bow_force", [(2.0, 50.0), (1.0, 5.0), (3.0, 200.0)])
def test_bow_and_hammer_together(make_config, alpha, bow_force):
    bow = BowSpec(f_b=Envelope.constant(bow_force), v_b=Envelope.constant(0.2))
    hammer = HammerSpec(x_h=0.3, u_h0=-1e-5, v_h0=1.0)
    config = make_config(alpha=alpha, kappa=2.0, duration=0.02, excitations=(bow, hammer))
    result = render(config)
    diag = result.diagnostics
    assert np.isfinite(result.samples).all()
    assert diag.hammer_force.max() > 0
    assert (diag.hammer_force >= 0).all()


def test_bow_and_hammer_steps_are_consistent(make_config):
    bow = BowSpec(f_b=Envelope.constant(50.0), v_b=Envelope.constant(0.2))
    hammer = HammerSpec(x_h=0.3, u_h0=-1e-5, v_h0=1.0)
    sim = Simulation(make_config(alpha=2.0, kappa=2.0, excitations=(bow, hammer)))
    _, reports = _run_coupled(sim, 400)
    assert any(r.hammer_force > 0 for r in reports)
    assert all(len(r.strengths) == 2 for r in reports)


@pytest.mark.parametrize(
    "excitations",
    [
        (HammerSpec(x_h=0.3, u_h0=-1e-5, v_h0=1.0), BowSpec(f_b=Envelope.constant(50.0))),
        (HammerSpec(x_h=0.2, u_h0=-1e-5, v_h0=1.0), HammerSpec(x_h=0.22, u_h0=-2e-5, v_h0=0.8)),
        (
            BowSpec(f_b=Envelope.constant(20.0), v_b=Envelope.constant(0.1)),
            HammerSpec(x_h=0.15, u_h0=-1e-5, v_h0=1.0),
            HammerSpec(x_h=0.4, u_h0=-5e-6, v_h0=0.5, alpha_h=1.0),
        ),
    ],
    ids=["hammer-then-bow", "two-hammers", "bow-two-hammers"],
)
def test_overlapping_excitations_sum_their_terms(make_config, excitations):
    sim = Simulation(make_config(alpha=3.0, kappa=2.0, excitations=(PluckSpec(c0=0.001),) + excitations))
    _, reports = _run_coupled(sim, 300)
    assert any(r.hammer_force > 0 for r in reports)


@pytest.mark.slow
def test_hammer_contact_over_random_strikes(make_config, rng):
    ended = 0
    for _ in range(100):
        hammer = HammerSpec(
            x_h=rng.uniform(0.05, 0.5),
            u_h0=-rng.uniform(0.0, 2e-5),
            v_h0=float(np.exp(rng.uniform(np.log(0.5), np.log(4.0)))),
            mass_ratio=float(np.exp(rng.uniform(np.log(0.1), np.log(2.0)))),
            omega_h=float(np.exp(rng.uniform(np.log(500.0), np.log(3000.0)))),
            alpha_h=rng.uniform(1.5, 3.5),
        )
        config = make_config(
            f0=rng.uniform(200.0, 400.0),
            kappa=rng.uniform(0.0, 5.0),
            alpha=rng.uniform(1.0, 3.0),
            duration=0.005,
            excitations=(hammer,),
        )
        sim = Simulation(config)
        # every step checks the contact law, which is zero once hammer and string are apart
        _, reports = _run_coupled(sim, config.n_steps - 1)
        forces = np.array([r.hammer_force for r in reports])
        assert (forces >= 0).all()
        assert forces.max() > 0
        last_contact = np.flatnonzero(forces)[-1]
        if last_contact < len(forces) - 1:
            ended += 1
    assert ended > 0


def test_two_bows_at_once_in_the_step_solver(make_config):
    # validation rejects overlapping bows in a render; the coupled step still handles them
    first = BowSpec(x_b=Envelope.constant(0.12), f_b=Envelope.constant(5.0), v_b=Envelope.constant(0.2))
    second = BowSpec(x_b=Envelope.constant(0.13), f_b=Envelope.constant(5.0), v_b=Envelope.constant(-0.1))
    sim = Simulation(make_config(excitations=(first, second)))
    state, reports = _run_coupled(sim, 300)
    assert all(len(r.strengths) == 2 for r in reports)
    assert np.abs(state.w_curr).max() > 0


def test_bows_handing_over(make_config):
    first = BowSpec(x_b=Envelope.constant(0.12), f_b=Envelope.constant(50.0), end=0.01)
    second = BowSpec(x_b=Envelope.constant(0.2), f_b=Envelope.constant(80.0), v_b=Envelope.constant(-0.15), start=0.01)
    hammer = HammerSpec(x_h=0.3, u_h0=-1e-5, v_h0=1.0, onset=0.005)
    config = make_config(duration=0.02, excitations=(first, second, hammer))
    result = render(config)
    assert np.isfinite(result.samples).all()
    assert not np.isnan(result.diagnostics.bow_v_rel[1:-1]).any()
    assert (result.diagnostics.hammer_force >= 0).all()


def test_unstable_grid_diverges(make_config, monkeypatch):
    config = make_config(kappa=0.0, theta=1.0, duration=0.1)
    stable = compute_grid(config.string, config.sample_rate)

    def finer_grid(params, sample_rate):
        return Grid.from_counts(sample_rate, 2 * stable.n_t, stable.n_l)

    monkeypatch.setattr(engine_module, "compute_grid", finer_grid)
    with pytest.raises(SimulationDivergedError) as excinfo:
        render(config)
    assert excinfo.value.step > 0

    outcome = SynthesisEngine(AppConfig(), verbose=False).render_safe(config)
    assert not outcome["success"]
    assert outcome["error_type"] == "SimulationDivergedError"
    assert outcome["step"] == excinfo.value.step


def test_synthesis_engine_session(make_config):
    synth = SynthesisEngine(AppConfig(), verbose=False)
    outcome = synth.render_safe(make_config(duration=0.01))
    assert outcome["success"]
    assert len(outcome["result"].samples) == 480

    failed = synth.render_safe(make_config(alpha=0.5))
    assert not failed["success"]
    assert failed["error_type"] == "ConfigError"
    assert failed["step"] is None

    stats = synth.get_session_stats()
    assert stats["total_renders"] == 1
    assert stats["failed_renders"] == 1
    assert stats["total_steps"] == 480
    assert len(synth.session_history) == 1
    synth.clear_session()
    assert synth.session_history == []
