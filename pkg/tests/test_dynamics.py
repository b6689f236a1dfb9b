import numpy as np
import pytest

from conftest import random_density_matrix
from usc_qed.dressing import JumpOperator, diagonalize, frequency_resolved_jumps, jump_operator
from usc_qed.dynamics import (BathModel, DegenerateSteadyStateError, DissipationChannel,
                              EvolutionSpec, EvolveInvariantError, Generator,
                              PseudoSteadyStateNotReached, coherent_drive,
                              compile_generator, detect_pseudo_steady_state, evolve,
                              evolve_until_periodic, generalized_dissipator,
                              incoherent_pump, lindblad_dissipator, max_timestep,
                              propagator, steady_state)
from usc_qed.hilbert import fock_space
from usc_qed.models import GaugeChoice, ModelParams, PumpSpec, build_dipole_qrm, quadrature_pi


def small_model(eta=0.5, n_fock=12, n_keep=8, corrected=True):
    params = ModelParams(eta=eta)
    space = fock_space(n_fock)
    basis = diagonalize(build_dipole_qrm(params, space), n_keep)
    pi = quadrature_pi(GaugeChoice("dipole", corrected), params, space)
    xp = jump_operator(basis, pi)
    resolved = frequency_resolved_jumps(basis, pi)
    return params, basis, xp, resolved


def make_spec(kappa=0.06, p_inc=0.0, omega_d=0.0, rwa=True, bath="flat",
              t_end=50.0, **model_kw):
    params, basis, xp, resolved = small_model(**model_kw)
    if omega_d > 0:
        pump = PumpSpec(kind="coherent", Omega_d=omega_d, omega_L=1.0, rwa_drive=rwa)
    elif p_inc > 0:
        pump = PumpSpec(kind="incoherent", P_inc=p_inc)
    else:
        pump = PumpSpec()
    return EvolutionSpec(hamiltonian=basis.energies,
                         jumps=resolved if bath == "ohmic" else xp,
                         bath=BathModel(kind=bath, kappa=kappa),
                         pump=pump, t_end=t_end), basis, xp


def ground(n):
    rho = np.zeros((n, n), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def test_lindblad_dissipator_kills_ground():
    _, basis, xp, _ = small_model()
    chan = lindblad_dissipator(xp, 0.1)
    out = chan(ground(basis.n_keep))
    assert np.max(np.abs(out)) < 1e-14


def test_lindblad_two_level_decay_rate():
    ket01 = np.zeros((2, 2), dtype=complex)
    ket01[0, 1] = 1.0  # |0><1|
    chan = lindblad_dissipator(ket01, 0.3)
    rho = np.diag([0.0, 1.0]).astype(complex)
    out = chan(rho)
    assert out[1, 1] == pytest.approx(-0.3)
    assert out[0, 0] == pytest.approx(0.3)


def test_dissipators_traceless_and_hermiticity_preserving(rng):
    _, basis, xp, resolved = small_model()
    chans = [lindblad_dissipator(xp, 0.1),
             incoherent_pump(xp, 0.02),
             generalized_dissipator(resolved, BathModel("ohmic", 0.1))]
    for _ in range(100):
        rho = random_density_matrix(rng, basis.n_keep)
        for chan in chans:
            out = chan(rho)
            assert abs(np.trace(out)) < 1e-12
            assert np.max(np.abs(out - out.conj().T)) < 1e-12


def test_generalized_flat_reduces_to_lindblad(rng):
    _, basis, xp, resolved = small_model()
    gen_d = generalized_dissipator(resolved, BathModel("flat", 0.17))
    lin_d = lindblad_dissipator(xp, 0.17)
    for _ in range(100):
        rho = random_density_matrix(rng, basis.n_keep)
        assert np.max(np.abs(gen_d(rho) - lin_d(rho))) < 1e-12


def test_ohmic_rate_at_reference_frequency():
    bath = BathModel("ohmic", kappa=0.25, omega_ref=1.0)
    assert bath.rate(1.0) == pytest.approx(0.25)
    assert bath.rate(0.5) == pytest.approx(0.125)
    flat = BathModel("flat", kappa=0.25)
    assert flat.rate(7.7) == pytest.approx(0.25)


def test_generalized_rejects_negative_rate():
    _, basis, xp, resolved = small_model()
    bad = [(-0.3, resolved[0][1])]  # negative frequency -> negative ohmic rate
    with pytest.raises(ValueError):
        generalized_dissipator(bad, BathModel("ohmic", 0.1))


def test_incoherent_pump_populates_first_state():
    _, basis, xp, _ = small_model()
    p_inc = 0.004
    chan = incoherent_pump(xp, p_inc)
    out = chan(ground(basis.n_keep))
    expected = p_inc * abs(xp.matrix[0, 1]) ** 2
    assert out[1, 1].real == pytest.approx(expected, rel=1e-12)
    assert np.max(np.abs(incoherent_pump(xp, 0.0)(random_density_matrix(
        np.random.default_rng(1), basis.n_keep)))) == 0.0


def test_coherent_drive_forms():
    _, basis, xp, _ = small_model()
    pump = PumpSpec(kind="coherent", Omega_d=0.05, omega_L=1.0, rwa_drive=True)
    h0 = coherent_drive(xp, pump, 0.0)
    expected = 0.025 * (xp.matrix + xp.raising_matrix)
    assert np.max(np.abs(h0 - expected)) < 1e-14
    for t in (0.3, 1.7, 4.0):
        h = coherent_drive(xp, pump, t)
        assert np.max(np.abs(h - h.conj().T)) < 1e-14
    cos_pump = PumpSpec(kind="coherent", Omega_d=0.05, omega_L=1.0, rwa_drive=False)
    h = coherent_drive(xp, cos_pump, 0.9)
    expected = 0.05 * np.cos(0.9) * (xp.matrix + xp.raising_matrix)
    assert np.max(np.abs(h - expected)) < 1e-14
    with pytest.raises(ValueError):
        coherent_drive(xp, PumpSpec(), 0.0)


def test_evolution_spec_validation():
    spec, basis, xp = make_spec()
    lim = max_timestep(basis.energies)
    with pytest.raises(ValueError):
        EvolutionSpec(hamiltonian=basis.energies, jumps=xp,
                      bath=BathModel("flat", 0.1), t_end=1.0, dt=2 * lim)
    h = np.diag(basis.energies).astype(complex)
    h[0, 1] = 0.1
    with pytest.raises(ValueError):
        EvolutionSpec(hamiltonian=h, jumps=xp, bath=BathModel("flat", 0.1), t_end=1.0)
    with pytest.raises(ValueError):
        EvolutionSpec(hamiltonian=basis.energies, jumps=xp,
                      bath=BathModel("flat", 0.1), t_end=-1.0)
    with pytest.raises(ValueError):
        BathModel("pink", 0.1)


def test_ohmic_bath_requires_resolved_jumps():
    spec, basis, xp = make_spec(bath="flat")
    spec.bath = BathModel("ohmic", 0.1)
    spec.jumps = xp
    with pytest.raises(ValueError):
        compile_generator(spec)


def test_evolve_ground_is_stationary():
    spec, basis, _ = make_spec(kappa=0.1, t_end=20.0)
    traj = evolve(spec, ground(basis.n_keep))
    assert np.max(np.abs(traj.states - traj.states[0])) < 1e-12


def test_evolve_invariants_and_determinism():
    spec, basis, _ = make_spec(kappa=0.1, p_inc=0.01, t_end=30.0)
    spec.store_stride = 10
    rho0 = ground(basis.n_keep)
    t1 = evolve(spec, rho0)
    t2 = evolve(spec, rho0)
    assert np.array_equal(t1.states, t2.states)
    for rho in t1.states:
        assert abs(np.trace(rho) - 1) < 1e-8
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-9
        assert np.linalg.eigvalsh(rho)[0] > -1e-8
    assert np.allclose(np.diff(t1.times), t1.times[1] - t1.times[0])


def test_evolve_rejects_bad_initial_state():
    spec, basis, _ = make_spec()
    bad = ground(basis.n_keep) * 2.0  # trace 2
    with pytest.raises(EvolveInvariantError) as exc:
        evolve(spec, bad)
    assert exc.value.invariant == "trace"


def test_steady_state_pure_decay_is_ground():
    spec, basis, _ = make_spec(kappa=0.1)
    rho = steady_state(spec)
    assert abs(rho[0, 0] - 1.0) < 1e-10
    assert np.max(np.abs(rho - ground(basis.n_keep))) < 1e-10


def test_steady_state_matches_long_evolution():
    spec, basis, _ = make_spec(kappa=0.3, p_inc=0.03, t_end=400.0, corrected=False)
    spec.store_stride = 200
    rho_ss = steady_state(spec)
    traj = evolve(spec, ground(basis.n_keep))
    assert np.max(np.abs(traj.final - rho_ss)) < 1e-8
    # true steady state: late-time change is tiny
    assert np.max(np.abs(traj.states[-1] - traj.states[-2])) < 1e-10


def test_steady_state_degenerate_reported():
    spec, basis, _ = make_spec(kappa=0.0)  # no dissipation: every state stationary
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(spec)


def test_rk4_order_check():
    spec, basis, xp = make_spec(kappa=0.1, p_inc=0.02, t_end=2.0)
    gen = compile_generator(spec)
    rng = np.random.default_rng(3)
    rho0 = random_density_matrix(rng, basis.n_keep)

    def endpoint(dt):
        from usc_qed.dynamics import rk4_step
        rho, t = rho0.copy(), 0.0
        n = int(round(2.0 / dt))
        for _ in range(n):
            rho = rk4_step(gen, rho, t, dt)
            t += dt
        return rho

    dt0 = 0.05
    ref = endpoint(dt0 / 4)
    e1 = np.max(np.abs(endpoint(dt0) - ref))
    e2 = np.max(np.abs(endpoint(dt0 / 2) - ref))
    ratio = e1 / e2
    assert 13.0 < ratio < 19.0


def test_propagator_matches_rk4(rng):
    spec, basis, _ = make_spec(kappa=0.1, p_inc=0.01)
    gen = compile_generator(spec)
    rho0 = random_density_matrix(rng, basis.n_keep)
    step = 0.2
    prop = propagator(gen, step)
    via_prop = prop @ rho0.reshape(-1)
    from usc_qed.dynamics import rk4_step
    n_sub = 64
    rho = rho0.copy()
    for k in range(n_sub):
        rho = rk4_step(gen, rho, k * step / n_sub, step / n_sub)
    assert np.max(np.abs(via_prop.reshape(rho.shape) - rho)) < 1e-10


def test_detect_pseudo_steady_undriven_decay():
    spec, basis, _ = make_spec(kappa=0.3, t_end=400.0, corrected=False)
    rng = np.random.default_rng(5)
    rho0 = random_density_matrix(rng, basis.n_keep)
    spec.store_stride = 16
    traj = evolve(spec, rho0)
    period = 8 * traj.sample_step()
    t1 = detect_pseudo_steady_state(traj, period)
    rho_ss = steady_state(spec)
    i1 = int(np.argmin(np.abs(traj.times - t1)))
    assert np.max(np.abs(traj.states[i1 + 8] - traj.states[i1])) < 1e-6
    assert np.max(np.abs(traj.final - rho_ss)) < 1e-6


def test_detect_pseudo_steady_errors():
    spec, basis, _ = make_spec(kappa=0.3, t_end=30.0)
    rng = np.random.default_rng(5)
    traj = evolve(spec, random_density_matrix(rng, basis.n_keep))
    with pytest.raises(ValueError):
        detect_pseudo_steady_state(traj, period=traj.sample_step() * 2.3)
    with pytest.raises(ValueError):  # spans fewer than 3 periods
        detect_pseudo_steady_state(traj, period=traj.times[-1] / 2)
    fast = evolve(make_spec(kappa=1e-4, t_end=10.0)[0],
                  random_density_matrix(rng, basis.n_keep))
    with pytest.raises(PseudoSteadyStateNotReached):
        detect_pseudo_steady_state(fast, period=fast.sample_step())


def test_evolve_until_periodic_driven():
    spec, basis, xp = make_spec(kappa=0.15, omega_d=0.05, t_end=4000.0)
    t1, stimes, sstates = evolve_until_periodic(spec, ground(basis.n_keep),
                                                period=2 * np.pi)
    assert len(stimes) == 20
    assert t1 < 4000.0
    # one more period reproduces the samples to the tolerance
    from usc_qed.dynamics import rk4_step
    gen = compile_generator(spec)
    rho = sstates[-1].copy()
    t = stimes[-1]
    sub = (stimes[1] - stimes[0])
    n_sub = 8
    dt = sub / n_sub
    again = []
    for s in range(20):
        for _ in range(n_sub):
            rho = rk4_step(gen, rho, t, dt)
            t += dt
        again.append(rho.copy())
    assert np.max(np.abs(np.array(again) - sstates)) < 2e-6


def test_channel_validation():
    with pytest.raises(ValueError):
        DissipationChannel(np.eye(3), rate=-0.1)
    with pytest.raises(ValueError):
        DissipationChannel(np.eye(3))
    with pytest.raises(ValueError):
        DissipationChannel(np.eye(3), weighted=np.eye(4))
    with pytest.raises(ValueError):
        generalized_dissipator([], BathModel("flat", 0.1))
