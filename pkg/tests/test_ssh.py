from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import minimize

from fermidecoh.density import DeterminantBasis
from fermidecoh.fock import coherence_order
from fermidecoh.rdm import pair_table
from fermidecoh.ssh import dynamics
from fermidecoh.ssh.dynamics import SectorPropagator, TrajectoryState, ehrenfest_step
from fermidecoh.ssh.experiment import (
    Experiment,
    RunSettings,
    analyze_run,
    preset,
    prepare,
    run_ensemble,
    sample_reports,
)
from fermidecoh.ssh.model import (
    HBAR,
    ConvergenceError,
    LaserPulse,
    SSHParams,
    build_h1,
    field_amplitude,
    ground_state_energy,
    lattice_energy,
    many_body_hamiltonian,
    normal_modes,
    optimize_geometry,
    sector_basis,
    spatial_h,
    wigner_sample,
)
from fermidecoh.validation import suite_ssh

PARAMS = SSHParams()


@pytest.fixture(scope="module")
def geometry():
    return optimize_geometry(PARAMS)


def test_params_validation_and_json():
    assert SSHParams.from_json(PARAMS.to_json()) == PARAMS
    with pytest.raises(ValueError):
        SSHParams(t0=-1)
    with pytest.raises(ValueError):
        SSHParams(n_electrons=9)
    with pytest.raises(ValueError):
        SSHParams.from_json({"hopping": 2})
    SSHParams(alpha=0.0)  # decoupled limit is allowed


def test_h1_uniform_chain():
    h = build_h1(PARAMS, np.zeros(4))
    assert h.shape == (8, 8)
    np.testing.assert_array_equal(h, h.T)
    hs = spatial_h(PARAMS, np.zeros(4))
    np.testing.assert_array_equal(np.diag(hs, 1), [-2.5] * 3)
    np.testing.assert_array_equal(h[0::2, 0::2], hs)
    np.testing.assert_array_equal(h[0::2, 1::2], 0)


def test_chiral_spectrum():
    rng = np.random.default_rng(0)
    for _ in range(10):
        e = np.linalg.eigvalsh(spatial_h(PARAMS, 0.1 * rng.normal(size=4)))
        np.testing.assert_allclose(e, -e[::-1], atol=1e-12)


def test_uniform_chain_energy_is_analytic():
    # eigenvalues -2 t0 cos(k pi / 5), k = 1..4; two lowest doubly occupied
    expected = -2 * 2 * 2.5 * (np.cos(np.pi / 5) + np.cos(2 * np.pi / 5))
    assert ground_state_energy(PARAMS, np.zeros(4)) == pytest.approx(expected, abs=1e-12)


def test_optimized_geometry(geometry):
    u, e, C = geometry
    assert u[0] == 0 and u[-1] == 0
    # independent minimization over the free coordinates
    res = minimize(lambda x: ground_state_energy(PARAMS, np.r_[0, x, 0]), [0.01, -0.01], method="BFGS", tol=1e-12)
    np.testing.assert_allclose(u[1:3], res.x, atol=1e-6)
    # dimerized: interior sites displaced with alternating sign, gap opens between orbitals 2 and 3
    assert abs(u[1]) > 0.05 and np.sign(u[1]) == -np.sign(u[2])
    assert ground_state_energy(PARAMS, u) < ground_state_energy(PARAMS, np.zeros(4))
    uniform_gap = 2 * 2 * 2.5 * np.cos(2 * np.pi / 5)
    assert e[2] - e[1] > uniform_gap + 0.5
    np.testing.assert_allclose(C.T @ C, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(C.T @ spatial_h(PARAMS, u) @ C, np.diag(e), atol=1e-12)


def test_optimizer_reports_non_convergence():
    with pytest.raises(ConvergenceError, match="grad"):
        optimize_geometry(PARAMS, max_iter=3)


def test_normal_modes_and_wigner_sampling(geometry):
    u = geometry[0]
    modes = normal_modes(PARAMS, u)
    assert np.all(modes.frequencies > 0)
    np.testing.assert_array_equal(modes.vectors[[0, 3]], 0)
    a = wigner_sample(PARAMS, u, modes, 123)
    b = wigner_sample(PARAMS, u, modes, 123)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    n = 10_000
    q, p = wigner_sample(PARAMS, u, modes, 7, size=n)
    dq = (q - u) @ modes.vectors
    pq = p @ modes.vectors
    sigma = np.sqrt(HBAR / (2 * PARAMS.mass * modes.frequencies))
    assert np.all(np.abs(dq.mean(0)) < 4 * sigma / np.sqrt(n))
    energy = pq**2 / (2 * PARAMS.mass) + 0.5 * PARAMS.mass * modes.frequencies**2 * dq**2
    np.testing.assert_allclose(energy.mean(0), HBAR * modes.frequencies / 2, rtol=0.05)


def test_field_amplitude_examples():
    pulse = LaserPulse.from_photon_energy(1.0, 10.0, 4.15)
    assert field_amplitude(pulse, 50.0) == pytest.approx(np.cos(50 * pulse.omega))
    assert abs(field_amplitude(pulse, 0.0)) <= np.exp(-25)
    t = np.linspace(0, 100, 100_001)
    env = pulse.e0 * np.exp(-(((t - 50) / 10) ** 2))
    assert t[np.argmax(env)] == pytest.approx(50.0)
    assert np.all(field_amplitude(None, t) == 0)
    assert pulse.photon_energy == pytest.approx(4.15)
    with pytest.raises(ValueError):
        LaserPulse(e0=-1)


def test_many_body_hamiltonian_structure():
    basis = sector_basis(PARAMS)
    rng = np.random.default_rng(1)
    h1 = build_h1(PARAMS, 0.05 * rng.normal(size=4), 0.3)
    H = many_body_hamiltonian(h1, basis)
    assert np.max(np.abs(H - H.T.conj())) <= 1e-14
    s = pair_table(basis).orders
    assert np.all(H[s >= 2] == 0)
    f = basis.occupations()
    np.testing.assert_allclose(np.diag(H), f @ np.diag(h1))
    with pytest.raises(ValueError):
        many_body_hamiltonian(np.eye(6), basis)


def test_validation_suite_passes():
    for check in suite_ssh(seed=3):
        assert check.passed, check.line()


def test_step_rejects_large_dt_and_flags_norm_drift(monkeypatch, geometry):
    basis = sector_basis(PARAMS)
    psi = np.zeros(len(basis), dtype=complex)
    psi[0] = 1
    state = TrajectoryState(geometry[0], np.zeros(4), psi)
    with pytest.raises(ValueError):
        ehrenfest_step(state, PARAMS, None, 0.02, basis)
    monkeypatch.setattr(dynamics, "NORM_STEP_TOL", -1.0)
    with pytest.raises(dynamics.NormDriftError, match="reduce dt"):
        ehrenfest_step(state, PARAMS, None, 1e-3, basis)


def test_sector_propagator_needs_full_sector():
    basis = sector_basis(PARAMS)
    with pytest.raises(ValueError):
        SectorPropagator(PARAMS, DeterminantBasis(basis.dets[:-1]))


def test_decoupled_limit_conserves_each_energy():
    params = SSHParams(alpha=0.0)
    exp = Experiment(params=params, initial="superposition1")
    setup = prepare(exp)
    prop = SectorPropagator(params, setup.basis)
    modes = normal_modes(params, setup.u_star)
    u, p = wigner_sample(params, setup.u_star, modes, 0)
    u, p = u[None], 20 * p[None]
    P = prop.density(prop.to_matrix(setup.psi0))[None]
    W = np.eye(4, dtype=complex)[None]

    def energies(u, p, P):
        e_el = np.real(np.sum(spatial_h(params, u) * P))
        return e_el, float(np.sum(p**2) / (2 * params.mass) + lattice_energy(params, u).sum())

    e0 = energies(u, p, P)
    u, p, P, W, _ = prop.advance_compiled(u, p, P, W, 0.0, 100_000, 1e-3)
    e1 = energies(u, p, P)
    assert abs(e1[0] - e0[0]) <= 1e-6
    assert abs(e1[1] - e0[1]) <= 1e-6
    assert abs(p).max() > 1  # the lattice did move


def test_ground_state_at_rest_is_stationary():
    exp = Experiment(initial="ground", nuclei="equilibrium", run=RunSettings(n_traj=1, t_final=20.0, dt=5e-3))
    res = run_ensemble(exp)
    reps = analyze_run(res)
    first = reps[0]
    for r in reps:
        for name in ("P", "P1", "P2", "dP1", "dP2"):
            assert abs(getattr(r.site, name) - getattr(first.site, name)) <= 1e-6
            assert abs(getattr(r.energy, name) - getattr(first.energy, name)) <= 1e-6
        assert r.energy.dP1 <= 1e-12 and r.energy.dP2 <= 1e-12
    assert np.ptp(res.dipole) <= 1e-6
    assert np.ptp(res.energy) <= 1e-6


def test_single_trajectory_stays_pure():
    exp = Experiment(initial="ground", run=RunSettings(n_traj=1, t_final=50.0, dt=5e-3))
    reps = analyze_run(run_ensemble(exp))
    assert all(abs(r.site.P - 1) <= 1e-10 for r in reps)
    # sampled nuclei deform the orbitals slightly away from the fixed orbital basis
    assert max(r.energy.dP1 for r in reps) < 5e-3
    assert max(r.energy.dP2 for r in reps) < 5e-3


def test_ensemble_density_is_valid_and_bases_agree():
    exp = preset("fig1a")
    exp = replace(exp, run=RunSettings(n_traj=30, t_final=20.0, dt=1e-2, sample_every=2.0))
    res = run_ensemble(exp)
    for k in range(len(res.times)):
        rho = res.density(k).check()
        rep = sample_reports(rho, res.setup.C)
        assert abs(rep.site.P1 - rep.energy.P1) <= 1e-10 and abs(rep.site.P2 - rep.energy.P2) <= 1e-10
        assert rep.energy.dP1 <= rep.energy.bounds.p1_max_tight + 1e-10
    rep0 = sample_reports(res.density(0), res.setup.C).energy
    assert rep0.dP1 == pytest.approx(0.5, abs=1e-12)
    assert abs(rep0.dP2 - 3 * rep0.dP1) <= 1e-12
    assert np.max(np.abs(res.norm - 1)) <= 1e-8


def test_initial_states_in_orbital_basis():
    for kind, order in (("fig1a", 1), ("fig1b", 2)):
        exp = preset(kind)
        setup = prepare(exp)
        c = setup.W.conj().T @ setup.psi0
        idx = np.flatnonzero(np.abs(c) > 1e-12)
        np.testing.assert_allclose(np.abs(c[idx]), 2**-0.5)
        assert coherence_order(setup.basis[idx[0]], setup.basis[idx[1]]) == order
    spin_down = replace(preset("fig1a"), excitation_spin=1)
    c = prepare(spin_down).W.conj().T @ prepare(spin_down).psi0
    assert len(np.flatnonzero(np.abs(c) > 1e-12)) == 2


def test_results_independent_of_worker_count():
    exp = replace(preset("fig1a"), run=RunSettings(n_traj=60, seed=5, t_final=3.0, dt=1e-2, sample_every=1.0))
    a = run_ensemble(exp, workers=1)
    b = run_ensemble(exp, workers=3)
    np.testing.assert_array_equal(a.rho, b.rho)
    np.testing.assert_array_equal(a.energy, b.energy)


def test_experiment_validation():
    with pytest.raises(ValueError):
        Experiment(kind="fig2")
    with pytest.raises(ValueError):
        Experiment(kind="fig1a", pulse=LaserPulse())
    with pytest.raises(ValueError):
        Experiment(initial="triplet")
    with pytest.raises(ValueError):
        RunSettings(dt=0.02)
    with pytest.raises(ValueError):
        RunSettings(dt=3e-3, sample_every=0.5)
    with pytest.raises(ValueError):
        RunSettings(n_traj=0)
    with pytest.raises(ValueError):
        Experiment.from_json({"kind": "fig1a", "runs": {}})
    exp = Experiment.from_json({"kind": "fig2", "run": {"n_traj": 4}})
    assert exp.pulse.photon_energy == pytest.approx(optimize_geometry(PARAMS)[1][2] - optimize_geometry(PARAMS)[1][1])
    assert exp.run.t_final == 150.0 and exp.run.n_traj == 4
    again = Experiment.from_json(exp.to_json())
    assert again == exp
