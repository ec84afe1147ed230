"""Trajectory-ensemble experiments on the SSH chain.

An experiment prepares every trajectory in the same electronic state (a
superposition of Slater determinants built from the molecular orbitals at the
optimal geometry), draws nuclear initial conditions from the ground-state
Wigner distribution, propagates with Ehrenfest dynamics and averages
``|psi><psi|`` over trajectories at each sample time.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ..density import DeterminantBasis, ManyBodyDensityMatrix, determinant_overlaps, purity
from ..purity import PurityReport, bounds_for, report_from_rdms
from ..rdm import one_rdm_oracle, rotate, spin_expand, two_rdm_oracle
from .dynamics import MAX_DT, NormDriftError, SectorPropagator, total_energy
from .model import (
    LaserPulse,
    SSHParams,
    field_amplitude,
    ground_configuration,
    mo_determinant,
    normal_modes,
    optimize_geometry,
    sector_basis,
    wigner_sample,
)

KINDS = ("fig1a", "fig1b", "fig2", "custom")
INITIAL_STATES = ("ground", "superposition1", "superposition2")
CHUNK_SIZE = 25
NORM_RUN_TOL = 1e-8
THREADS_ENV = "FERMIDECOH_THREADS"


@dataclass(frozen=True)
class RunSettings:
    n_traj: int = 100
    seed: int = 0
    t_final: float = 1000.0
    dt: float = 1e-3
    sample_every: float = 0.5

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be at least 1, got {self.n_traj}")
        if not 0 < self.dt <= MAX_DT:
            raise ValueError(f"dt must be in (0, {MAX_DT}] fs, got {self.dt}")
        if self.t_final < 0:
            raise ValueError(f"t_final must be nonnegative, got {self.t_final}")
        ratio = self.sample_every / self.dt
        if self.sample_every <= 0 or abs(ratio - round(ratio)) > 1e-6:
            raise ValueError("sample_every must be a positive multiple of dt")
        ratio = self.t_final / self.sample_every
        if abs(ratio - round(ratio)) > 1e-6:
            raise ValueError("t_final must be a multiple of sample_every")

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.sample_every / self.dt))

    @property
    def n_samples(self) -> int:
        return int(round(self.t_final / self.sample_every)) + 1


@dataclass(frozen=True)
class Experiment:
    """Resolved experiment description.

    ``initial`` picks the electronic state: the ground determinant, its equal
    superposition with the HOMO->LUMO single excitation in spin channel
    ``excitation_spin`` (0 up, 1 down), or with the double excitation that
    moves both HOMO electrons to the LUMO. ``nuclei`` is ``"wigner"`` or
    ``"equilibrium"`` (all trajectories start at rest at the optimal geometry).
    """

    kind: str = "custom"
    params: SSHParams = field(default_factory=SSHParams)
    pulse: LaserPulse | None = None
    initial: str = "ground"
    excitation_spin: int = 0
    nuclei: str = "wigner"
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "fig2" and self.pulse is None:
            raise ValueError("kind 'fig2' requires a pulse")
        if self.kind in ("fig1a", "fig1b") and self.pulse is not None:
            raise ValueError(f"kind {self.kind!r} does not allow a pulse")
        if self.initial not in INITIAL_STATES:
            raise ValueError(f"initial must be one of {INITIAL_STATES}, got {self.initial!r}")
        if self.excitation_spin not in (0, 1):
            raise ValueError("excitation_spin must be 0 or 1")
        if self.nuclei not in ("wigner", "equilibrium"):
            raise ValueError(f"nuclei must be 'wigner' or 'equilibrium', got {self.nuclei!r}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params.to_json(),
            "pulse": None if self.pulse is None else {"e0": self.pulse.e0, "t_w": self.pulse.t_w, "omega": self.pulse.omega},
            "initial": self.initial,
            "excitation_spin": self.excitation_spin,
            "nuclei": self.nuclei,
            "run": asdict(self.run),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Experiment":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        kind = data.get("kind", "custom")
        params = SSHParams.from_json(data.get("params") or {})
        base = preset(kind, params) if kind in ("fig1a", "fig1b", "fig2") else cls(params=params)
        run = asdict(base.run)
        run_over = data.get("run") or {}
        unknown = set(run_over) - set(run)
        if unknown:
            raise ValueError(f"unknown run keys: {sorted(unknown)}")
        run.update(run_over)
        pulse = base.pulse
        if "pulse" in data:
            pulse = _pulse_from_json(data["pulse"], params)
        kw = {k: data[k] for k in ("initial", "excitation_spin", "nuclei") if k in data}
        return replace(base, kind=kind, params=params, pulse=pulse, run=RunSettings(**run), **kw)


def _pulse_from_json(data, params):
    if data is None:
        return None
    data = dict(data)
    unknown = set(data) - {"e0", "t_w", "photon_energy_ev", "omega"}
    if unknown:
        raise ValueError(f"unknown pulse keys: {sorted(unknown)}")
    if "omega" in data and "photon_energy_ev" in data:
        raise ValueError("give either omega or photon_energy_ev, not both")
    e0 = data.get("e0", 1.0)
    t_w = data.get("t_w", 10.0)
    if "omega" in data:
        return LaserPulse(e0, t_w, data["omega"])
    photon = data.get("photon_energy_ev", "gap")
    if photon == "gap":
        photon = homo_lumo_gap(params)
    return LaserPulse.from_photon_energy(e0, t_w, float(photon))


def homo_lumo_gap(params: SSHParams) -> float:
    _, e, _ = optimize_geometry(params)
    h = params.n_electrons // 2
    return float(e[h] - e[h - 1]) if params.n_electrons % 2 == 0 else float(e[h + 1] - e[h])


def preset(kind: str, params: SSHParams | None = None) -> Experiment:
    """The three reference chain experiments with default run settings."""
    params = params or SSHParams()
    if kind == "fig1a":
        return Experiment("fig1a", params, None, "superposition1", run=RunSettings(t_final=1000.0))
    if kind == "fig1b":
        return Experiment("fig1b", params, None, "superposition2", run=RunSettings(t_final=1000.0))
    if kind == "fig2":
        pulse = LaserPulse.from_photon_energy(1.0, 10.0, homo_lumo_gap(params))
        return Experiment("fig2", params, pulse, "ground", run=RunSettings(t_final=150.0))
    raise ValueError(f"no preset named {kind!r}")


# --- setup ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Setup:
    basis: DeterminantBasis
    u_star: np.ndarray
    orbital_energies: np.ndarray
    C: np.ndarray  # spatial MO coefficients, columns
    W: np.ndarray  # W[n, p]: site determinant n in MO determinant p
    psi0: np.ndarray  # site-basis coefficients


def initial_mo_state(exp: Experiment, basis: DeterminantBasis) -> np.ndarray:
    """Coefficients over MO determinants (same occupation labels as ``basis``)."""
    params = exp.params
    ground = ground_configuration(params)
    homo = params.n_electrons // 2 - 1
    if params.n_electrons % 2 or homo + 1 >= params.n_sites:
        if exp.initial != "ground":
            raise ValueError("excited initial states need an even electron count and an empty LUMO")
    c = np.zeros(len(basis), dtype=complex)
    c[basis.index(mo_determinant(params, ground))] = 1
    if exp.initial == "ground":
        return c
    if exp.initial == "superposition1":
        occ = [(homo + 1, s) if (i, s) == (homo, exp.excitation_spin) else (i, s) for i, s in ground]
    else:
        occ = [(homo + 1, s) if i == homo else (i, s) for i, s in ground]
    c[basis.index(mo_determinant(params, occ))] = 1
    return c / np.sqrt(2)


def prepare(exp: Experiment) -> Setup:
    params = exp.params
    basis = sector_basis(params)
    u_star, e, C = optimize_geometry(params)
    W = determinant_overlaps(basis, spin_expand(C))
    psi0 = W @ initial_mo_state(exp, basis)
    return Setup(basis, u_star, e, C, W, psi0)


# --- propagation ------------------------------------------------------------


def _initial_nuclei(exp, setup, index):
    L = exp.params.n_sites
    if exp.nuclei == "equilibrium":
        return setup.u_star.copy(), np.zeros(L)
    modes = normal_modes(exp.params, setup.u_star)
    return wigner_sample(exp.params, setup.u_star, modes, exp.run.seed + index)


def _run_chunk(args):
    exp_json, start, stop = args
    exp = Experiment.from_json(exp_json)
    setup = prepare(exp)
    params, run = exp.params, exp.run
    prop = SectorPropagator(params, setup.basis)
    nuc = [_initial_nuclei(exp, setup, i) for i in range(start, stop)]
    u = np.array([a for a, _ in nuc])
    p = np.array([b for _, b in nuc])
    X0 = prop.to_matrix(setup.psi0)
    n = stop - start
    P = np.repeat(prop.density(X0)[None], n, axis=0)
    W = np.repeat(np.eye(params.n_sites, dtype=complex)[None], n, axis=0)

    S, K = run.n_samples, len(setup.basis)
    rho_sum = np.zeros((S, K, K), dtype=complex)
    dipole_sum = np.zeros(S)
    energy = np.zeros((n, S))
    norm = np.zeros((n, S))
    x = params.positions()
    F = None
    for k in range(S):
        t = k * run.sample_every
        if k:
            u, p, P, W, F = prop.advance_compiled(u, p, P, W, t - run.sample_every, run.steps_per_sample,
                                                  run.dt, exp.pulse, F)
        psi = prop.to_vector(prop.state(W, X0))
        norm[:, k] = np.linalg.norm(psi, axis=1)
        bad = np.flatnonzero(np.abs(norm[:, k] - 1) > NORM_RUN_TOL)
        if bad.size:
            raise NormDriftError(
                f"trajectory {start + bad[0]}: norm drift {abs(norm[bad[0], k] - 1):.2e} at t = {t} fs; reduce dt"
            )
        rho_sum[k] = psi.T @ psi.conj()
        dipole_sum[k] = np.sum(np.real(np.diagonal(P, axis1=-2, axis2=-1)) @ x)
        energy[:, k] = total_energy(params, u, p, P)
    return rho_sum, dipole_sum, energy, norm


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, int(workers))


@dataclass(frozen=True, eq=False)
class EnsembleRun:
    experiment: Experiment
    setup: Setup
    times: np.ndarray
    rho: np.ndarray  # (samples, K, K) ensemble density matrices, site determinants
    dipole: np.ndarray
    field: np.ndarray
    energy: np.ndarray  # (n_traj, samples)
    norm: np.ndarray  # (n_traj, samples)

    def density(self, k: int) -> ManyBodyDensityMatrix:
        return ManyBodyDensityMatrix(self.setup.basis, self.rho[k])


def run_ensemble(exp: Experiment, workers=None) -> EnsembleRun:
    """Propagate ``exp.run.n_traj`` trajectories and average at every sample time.

    Trajectories are processed in fixed chunks of :data:`CHUNK_SIZE` and the
    chunk sums are reduced in trajectory order, so results do not depend on
    ``workers`` (default from the ``FERMIDECOH_THREADS`` environment variable).
    """
    run = exp.run
    setup = prepare(exp)
    bounds = [(s, min(s + CHUNK_SIZE, run.n_traj)) for s in range(0, run.n_traj, CHUNK_SIZE)]
    tasks = [(exp.to_json(), a, b) for a, b in bounds]
    workers = min(resolve_workers(workers), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_chunk, tasks))
    else:
        results = [_run_chunk(t) for t in tasks]
    rho = sum(r[0] for r in results) / run.n_traj
    dipole = sum(r[1] for r in results) / run.n_traj
    times = np.arange(run.n_samples) * run.sample_every
    return EnsembleRun(
        exp,
        setup,
        times,
        rho,
        dipole,
        field_amplitude(exp.pulse, times),
        np.concatenate([r[2] for r in results]),
        np.concatenate([r[3] for r in results]),
    )


# --- analysis ---------------------------------------------------------------


@dataclass(frozen=True)
class SampleReports:
    site: PurityReport
    energy: PurityReport


def sample_reports(rho: ManyBodyDensityMatrix, C, W=None, tol=1e-10) -> SampleReports:
    """Purity reports in the site basis and the MO basis ``C`` (spatial columns).

    Raises if the basis-independent reduced purities disagree by more than ``tol``.
    """
    U = spin_expand(C)
    if W is None:
        W = determinant_overlaps(rho.basis, U)
    g = one_rdm_oracle(rho, "site")
    G = two_rdm_oracle(rho, "site")
    P = purity(rho)
    site = report_from_rdms(g, G, P, bounds_for(rho))
    # populations over MO determinants: rho_E = W^+ rho W
    rho_e = ManyBodyDensityMatrix(rho.basis, W.conj().T @ rho.a @ W)
    energy = report_from_rdms(rotate(g, U, "energy"), rotate(G, U, "energy"), P, bounds_for(rho_e))
    if abs(site.P1 - energy.P1) > tol or abs(site.P2 - energy.P2) > tol:
        raise RuntimeError(
            f"reduced purities differ between bases: dP1 {site.P1 - energy.P1:.2e}, dP2 {site.P2 - energy.P2:.2e}"
        )
    return SampleReports(site, energy)


def analyze_run(result: EnsembleRun) -> list[SampleReports]:
    W = result.setup.W
    return [sample_reports(result.density(k), result.setup.C, W) for k in range(len(result.times))]
