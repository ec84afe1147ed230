"""SSH chain: single-particle Hamiltonian, optimal geometry, normal modes, sampling.

Units throughout: eV, fs, Angstrom. Masses are in eV fs^2 / A^2, momenta in
eV fs / A, fields in V / A and dipoles in e A.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..density import DeterminantBasis
from ..fock import SlaterDeterminant, enumerate_sz_sector, spin_orbital
from ..rdm import pair_table, spin_expand

HBAR = 0.6582119569  # eV fs


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SSHParams:
    n_sites: int = 4
    n_electrons: int = 4
    t0: float = 2.5
    alpha: float = 4.1
    k_spring: float = 21.0
    mass: float = 1349.14
    lattice_const: float = 1.22
    clamped: bool = True

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "clamped":
                continue
            # alpha = 0 is the decoupled limit
            if not (v >= 0 if f.name == "alpha" else v > 0):
                raise ValueError(f"{f.name} must be positive, got {v}")
        if self.n_sites < 2 or self.clamped and self.n_sites < 3:
            raise ValueError(f"chain too short: {self.n_sites} sites")
        if self.n_electrons > 2 * self.n_sites:
            raise ValueError("more electrons than spin-orbitals")

    @property
    def m(self) -> int:
        return 2 * self.n_sites

    @property
    def n_up(self) -> int:
        return (self.n_electrons + 1) // 2

    @property
    def n_down(self) -> int:
        return self.n_electrons // 2

    def free_sites(self) -> np.ndarray:
        if self.clamped:
            return np.arange(1, self.n_sites - 1)
        return np.arange(self.n_sites)

    def positions(self) -> np.ndarray:
        """Lattice site positions centred on the chain midpoint."""
        return (np.arange(self.n_sites) - (self.n_sites - 1) / 2) * self.lattice_const

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "SSHParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SSH parameters: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class LaserPulse:
    """Gaussian-enveloped field ``e0 exp(-((t - 5 t_w) / t_w)^2) cos(omega t)``."""

    e0: float = 1.0
    t_w: float = 10.0
    omega: float = 4.15 / HBAR

    def __post_init__(self):
        if self.e0 < 0:
            raise ValueError(f"field amplitude must be nonnegative, got {self.e0}")
        if not self.t_w > 0:
            raise ValueError(f"pulse width must be positive, got {self.t_w}")

    @classmethod
    def from_photon_energy(cls, e0, t_w, photon_ev):
        return cls(e0=e0, t_w=t_w, omega=photon_ev / HBAR)

    @property
    def photon_energy(self) -> float:
        return self.omega * HBAR

    def to_json(self) -> dict:
        return {"e0": self.e0, "t_w": self.t_w, "photon_energy_ev": self.photon_energy}


def field_amplitude(pulse: LaserPulse | None, t):
    if pulse is None:
        return np.zeros_like(np.asarray(t, dtype=float))
    t = np.asarray(t, dtype=float)
    return pulse.e0 * np.exp(-(((t - 5 * pulse.t_w) / pulse.t_w) ** 2)) * np.cos(pulse.omega * t)


def envelope(pulse: LaserPulse, t):
    return pulse.e0 * np.exp(-(((np.asarray(t, dtype=float) - 5 * pulse.t_w) / pulse.t_w) ** 2))


# --- single-particle Hamiltonian --------------------------------------------


def hopping(params: SSHParams, u) -> np.ndarray:
    """Bond hoppings ``t0 - alpha (u[n+1] - u[n])``; leading axes of ``u`` broadcast."""
    u = np.asarray(u, dtype=float)
    return params.t0 - params.alpha * np.diff(u, axis=-1)


def spatial_h(params: SSHParams, u, field=0.0) -> np.ndarray:
    """Spatial tight-binding matrix; batched over leading axes of ``u``.

    The field enters as ``-E(t) x_n`` on the site energies.
    """
    u = np.asarray(u, dtype=float)
    L = params.n_sites
    t = hopping(params, u)
    h = np.zeros(u.shape[:-1] + (L, L))
    i = np.arange(L - 1)
    h[..., i, i + 1] = -t
    h[..., i + 1, i] = -t
    field = np.asarray(field, dtype=float)
    if np.any(field != 0):
        x = params.positions()
        h[..., np.arange(L), np.arange(L)] = -field[..., None] * x
    return h


def build_h1(params: SSHParams, u, field=0.0) -> np.ndarray:
    """Single-particle Hamiltonian over interleaved spin-orbitals (no spin mixing)."""
    return spin_expand(spatial_h(params, u, field))


def lattice_energy(params: SSHParams, u) -> np.ndarray:
    d = np.diff(np.asarray(u, dtype=float), axis=-1)
    return 0.5 * params.k_spring * np.sum(d**2, axis=-1)


def lattice_gradient(params: SSHParams, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    d = np.diff(u, axis=-1)
    g = np.zeros_like(u)
    g[..., 1:] += params.k_spring * d
    g[..., :-1] -= params.k_spring * d
    return g


def electronic_gradient(params: SSHParams, bond_order) -> np.ndarray:
    """Hellmann-Feynman gradient of the electronic energy from bond orders.

    ``bond_order[n] = sum_s <c^+_{n s} c_{n+1 s} + h.c.>``.
    """
    b = np.asarray(bond_order, dtype=float)
    shape = b.shape[:-1] + (b.shape[-1] + 1,)
    g = np.zeros(shape)
    g[..., 1:] += params.alpha * b
    g[..., :-1] -= params.alpha * b
    return g


def aufbau_occupations(params: SSHParams) -> np.ndarray:
    """Spatial-MO occupation numbers (0, 1 or 2) of the ground configuration."""
    occ = np.zeros(params.n_sites)
    occ[: params.n_electrons // 2] = 2
    if params.n_electrons % 2:
        occ[params.n_electrons // 2] = 1
    return occ


def molecular_orbitals(params: SSHParams, u):
    """Orbital energies (ascending) and coefficient columns with a fixed sign convention."""
    e, C = np.linalg.eigh(spatial_h(params, u))
    pivot = np.argmax(np.abs(C) > 1e-8, axis=0)
    signs = np.sign(C[pivot, np.arange(C.shape[1])])
    return e, C * signs


def ground_state_energy(params: SSHParams, u) -> float:
    e, _ = np.linalg.eigh(spatial_h(params, u))
    return float(aufbau_occupations(params) @ e + lattice_energy(params, u))


def ground_state_gradient(params: SSHParams, u) -> np.ndarray:
    e, C = molecular_orbitals(params, u)
    P = (C * aufbau_occupations(params)) @ C.T
    b = 2 * np.diagonal(P, offset=1)
    g = electronic_gradient(params, b) + lattice_gradient(params, u)
    mask = np.zeros(params.n_sites, dtype=bool)
    mask[params.free_sites()] = True
    return np.where(mask, g, 0.0)


def optimize_geometry(params: SSHParams, tol=1e-8, max_iter=200_000, seed_dimerization=0.02):
    """Minimize the ground-state energy by steepest descent on Hellmann-Feynman forces.

    Returns ``(u, orbital_energies, C)``; raises :class:`ConvergenceError`
    with the final gradient norm if ``tol`` (eV/A) is not reached.
    """
    free = params.free_sites()
    u = np.zeros(params.n_sites)
    u[free] = seed_dimerization * (-1.0) ** free
    # stable step for the stiffest lattice mode plus the electronic curvature bound
    step = 1.0 / (4 * params.k_spring + 8 * params.alpha**2 / params.t0)
    energy = ground_state_energy(params, u)
    for it in range(max_iter):
        g = ground_state_gradient(params, u)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            e, C = molecular_orbitals(params, u)
            return u, e, C
        trial = u - step * g
        e_trial = ground_state_energy(params, trial)
        if e_trial > energy + 1e-14:
            step *= 0.5
            continue
        u, energy = trial, e_trial
    raise ConvergenceError(f"geometry optimization did not converge: |grad| = {gnorm:.3e} eV/A after {max_iter} iterations")


def hessian(params: SSHParams, u, h=1e-4) -> np.ndarray:
    """Central-difference Hessian of the ground-state energy over the free coordinates."""
    free = params.free_sites()
    n = len(free)
    H = np.zeros((n, n))
    E = lambda x: ground_state_energy(params, x)
    for a in range(n):
        for b in range(a, n):
            def shifted(sa, sb):
                x = np.array(u, dtype=float)
                x[free[a]] += sa * h
                x[free[b]] += sb * h
                return E(x)
            val = (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4 * h * h)
            H[a, b] = H[b, a] = val
    return H


@dataclass(frozen=True)
class NormalModes:
    frequencies: np.ndarray  # rad/fs
    vectors: np.ndarray  # (n_sites, n_modes), zero rows on clamped sites


def normal_modes(params: SSHParams, u) -> NormalModes:
    H = hessian(params, u)
    w2, V = np.linalg.eigh(H / params.mass)
    if np.any(w2 <= 0):
        raise ValueError(f"geometry is not a minimum: squared frequencies {w2}")
    vectors = np.zeros((params.n_sites, len(w2)))
    vectors[params.free_sites()] = V
    return NormalModes(np.sqrt(w2), vectors)


def wigner_sample(params: SSHParams, u_star, modes: NormalModes, rng_seed, size=None):
    """Ground-state Wigner sample of displacements and momenta around ``u_star``.

    Each mode gets independent Gaussians with variances ``hbar / (2 m w)`` and
    ``hbar m w / 2``. With ``size`` given, returns arrays with a leading axis.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    shape = (len(modes.frequencies),) if size is None else (size, len(modes.frequencies))
    w = modes.frequencies
    q = rng.normal(size=shape) * np.sqrt(HBAR / (2 * params.mass * w))
    p = rng.normal(size=shape) * np.sqrt(HBAR * params.mass * w / 2)
    return np.asarray(u_star) + q @ modes.vectors.T, p @ modes.vectors.T


# --- many-body pieces -------------------------------------------------------


def sector_basis(params: SSHParams) -> DeterminantBasis:
    """Determinants with the ground configuration's spin-up and spin-down counts."""
    return DeterminantBasis(tuple(enumerate_sz_sector(params.n_sites, params.n_up, params.n_down)))


def many_body_hamiltonian(h1, basis: DeterminantBasis) -> np.ndarray:
    """Matrix of ``sum_ij h1[i, j] c^+_i c_j`` between determinants (Slater-Condon rules)."""
    h1 = np.asarray(h1)
    if h1.shape != (basis.m, basis.m):
        raise ValueError(f"h1 shape {h1.shape} does not match {basis.m} spin-orbitals")
    f = basis.occupations()
    H = np.diag(f @ np.diagonal(h1)).astype(h1.dtype if np.iscomplexobj(h1) else float)
    pt = pair_table(basis)
    sel = pt.order == 1
    # <Phi_n| c^+_a c_b |Phi_m> = phase for |Phi_n> = phase c^+_a c_b |Phi_m>
    H[pt.n[sel], pt.m[sel]] = pt.string_phase[sel] * h1[pt.alpha2[sel], pt.beta1[sel]]
    return H


def mo_determinant(params: SSHParams, spatial_occ) -> SlaterDeterminant:
    """Determinant over MO spin-orbitals from ``[(mo, spin), ...]``."""
    return SlaterDeterminant.from_orbitals(params.m, [spin_orbital(i, s) for i, s in spatial_occ])


def ground_configuration(params: SSHParams) -> list[tuple[int, int]]:
    occ = aufbau_occupations(params)
    out = []
    for i, n in enumerate(occ):
        out += [(i, 0)] if n == 1 else [(i, 0), (i, 1)] if n == 2 else []
    return out
