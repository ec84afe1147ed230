"""Ehrenfest propagation of SSH chains over a fixed-spin determinant sector.

Two propagators share one integrator scheme (velocity Verlet for the nuclei,
exact exponentiation of the electronic Hamiltonian at the midpoint geometry
and field):

* :func:`ehrenfest_step` acts on one :class:`TrajectoryState` and
  diagonalizes the full many-body Hamiltonian of the determinant sector.
* :class:`SectorPropagator` advances a batch of trajectories at once. Because
  the Hamiltonian is one-body and spin-diagonal, the many-body propagator is
  the tensor product of the compound matrices of the spatial one-body
  propagator in each spin channel; the state is kept as a matrix over
  (spin-up subset, spin-down subset).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..density import DeterminantBasis, ManyBodyDensityMatrix
from ..fock import bits
from ..rdm import one_rdm_oracle
from .model import (
    HBAR,
    LaserPulse,
    SSHParams,
    build_h1,
    electronic_gradient,
    field_amplitude,
    lattice_energy,
    lattice_gradient,
    many_body_hamiltonian,
    spatial_h,
)

NORM_STEP_TOL = 1e-10
MAX_DT = 1e-2


class NormDriftError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TrajectoryState:
    u: np.ndarray
    p: np.ndarray
    psi: np.ndarray
    t: float = 0.0


def _free_mask(params: SSHParams) -> np.ndarray:
    mask = np.zeros(params.n_sites, dtype=bool)
    mask[params.free_sites()] = True
    return mask


def forces(params: SSHParams, u, density) -> np.ndarray:
    """Mean-field nuclear forces from the spin-summed spatial 1-RDM ``density``.

    ``density[..., i, j] = sum_s <c^+_{i s} c_{j s}>``; batched over leading axes.
    """
    b = 2 * np.real(np.diagonal(density, offset=1, axis1=-2, axis2=-1))
    f = -(electronic_gradient(params, b) + lattice_gradient(params, u))
    return np.where(_free_mask(params), f, 0.0)


def spatial_density_generic(psi, basis: DeterminantBasis) -> np.ndarray:
    rho = ManyBodyDensityMatrix(basis, np.outer(psi, np.conj(psi)))
    g = one_rdm_oracle(rho).g
    return g[0::2, 0::2] + g[1::2, 1::2]


def total_energy(params: SSHParams, u, p, density) -> np.ndarray:
    """Electronic (field-free) + nuclear kinetic + lattice energy."""
    h = spatial_h(params, u)
    e_el = np.real(np.einsum("...ij,...ij->...", h, density))
    return e_el + np.sum(np.asarray(p) ** 2, axis=-1) / (2 * params.mass) + lattice_energy(params, u)


def _check_dt(dt):
    if not 0 < dt <= MAX_DT:
        raise ValueError(f"time step must be in (0, {MAX_DT}] fs, got {dt}")


def ehrenfest_step(state: TrajectoryState, params: SSHParams, pulse: LaserPulse | None, dt: float,
                   basis: DeterminantBasis) -> TrajectoryState:
    """Advance one trajectory by ``dt`` using the full many-body Hamiltonian."""
    _check_dt(dt)
    m = params.mass
    p_half = state.p + 0.5 * dt * forces(params, state.u, spatial_density_generic(state.psi, basis))
    u_new = state.u + dt * p_half / m
    field = field_amplitude(pulse, state.t + 0.5 * dt)
    H = many_body_hamiltonian(build_h1(params, 0.5 * (state.u + u_new), field), basis)
    w, V = np.linalg.eigh(H)
    psi = V @ (np.exp(-1j * w * dt / HBAR) * (V.conj().T @ state.psi))
    drift = abs(np.linalg.norm(psi) - np.linalg.norm(state.psi))
    if drift > NORM_STEP_TOL:
        raise NormDriftError(f"norm drift {drift:.2e} in one step; reduce dt (now {dt} fs)")
    p_new = p_half + 0.5 * dt * forces(params, u_new, spatial_density_generic(psi, basis))
    return TrajectoryState(u_new, p_new, psi, state.t + dt)


def expm_taylor(A, tol=1e-18) -> np.ndarray:
    """Batched ``exp(A)`` for small anti-Hermitian ``A`` by a Taylor series truncated below ``tol``.

    The truncation degree comes from the max-row-sum norm bound on the
    remainder, so for ``|A| < 0.1`` (any step allowed here) the result is
    accurate to rounding.
    """
    x = float(np.max(np.sum(np.abs(A), axis=-1))) if A.size else 0.0
    if x > 0.5:
        w, V = np.linalg.eigh(1j * A)
        return (V * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))
    out = np.broadcast_to(np.eye(A.shape[-1], dtype=complex), A.shape).copy()
    term = out.copy()
    k, bound = 0, 1.0
    while True:
        k += 1
        term = term @ A / k
        out += term
        bound = bound * x / k
        if bound * x / (k + 1) < tol:
            return out


class SectorPropagator:
    """Batched propagation over determinants with fixed spin-up/spin-down counts.

    ``basis`` lists the sector in canonical (interleaved spin-orbital) order.
    Internally a state is ``X[a, b] = sign[n] * psi[n]`` where ``a``/``b``
    index the spin-up/spin-down site subsets of determinant ``n`` and
    ``sign[n]`` reorders its interleaved creators into all-up-then-all-down.
    """

    def __init__(self, params: SSHParams, basis: DeterminantBasis):
        self.params = params
        self.basis = basis
        L = params.n_sites
        self.up_sets = list(combinations(range(L), params.n_up))
        self.dn_sets = list(combinations(range(L), params.n_down))
        up_index = {s: i for i, s in enumerate(self.up_sets)}
        dn_index = {s: i for i, s in enumerate(self.dn_sets)}
        ia, ib, sign = [], [], []
        for det in basis:
            orbs = bits(det.occ)
            up = tuple(o // 2 for o in orbs if o % 2 == 0)
            dn = tuple(o // 2 for o in orbs if o % 2 == 1)
            if len(up) != params.n_up or len(dn) != params.n_down:
                raise ValueError(f"determinant {det} is outside the spin sector")
            inversions = sum(1 for i in up for j in dn if j < i)
            ia.append(up_index[up])
            ib.append(dn_index[dn])
            sign.append(-1 if inversions % 2 else 1)
        if len(basis) != len(self.up_sets) * len(self.dn_sets):
            raise ValueError("basis does not span the whole spin sector")
        self.ia = np.array(ia)
        self.ib = np.array(ib)
        self.sign = np.array(sign, dtype=float)
        self.ops_up = self._one_body_ops(self.up_sets)
        self.ops_dn = self._one_body_ops(self.dn_sets)
        # g[i, j] = sum_{x y} E[i, j, x, y] rho[y, x] as one matmul over flattened rho[y, x]
        self._flat_up = np.swapaxes(self.ops_up, -1, -2).reshape(L * L, -1).T
        self._flat_dn = np.swapaxes(self.ops_dn, -1, -2).reshape(L * L, -1).T
        self._up_rows = np.array(self.up_sets, dtype=int).reshape(len(self.up_sets), params.n_up)
        self._dn_rows = np.array(self.dn_sets, dtype=int).reshape(len(self.dn_sets), params.n_down)

    def _one_body_ops(self, sets):
        """``E[i, j, a', a] = <a'| c^+_i c_j |a>`` within one spin channel."""
        L = self.params.n_sites
        index = {s: k for k, s in enumerate(sets)}
        E = np.zeros((L, L, len(sets), len(sets)))
        for a, s in enumerate(sets):
            for j in s:
                for i in range(L):
                    if i != j and i in s:
                        continue
                    rest = [x for x in s if x != j]
                    sign = (-1) ** sum(1 for x in s if x < j)
                    new = sorted(rest + [i])
                    sign *= (-1) ** sum(1 for x in rest if x < i)
                    E[i, j, index[tuple(new)], a] += sign
        return E

    def to_matrix(self, psi):
        psi = np.asarray(psi, dtype=complex)
        X = np.zeros(psi.shape[:-1] + (len(self.up_sets), len(self.dn_sets)), dtype=complex)
        X[..., self.ia, self.ib] = psi * self.sign
        return X

    def to_vector(self, X):
        return X[..., self.ia, self.ib] * self.sign

    @staticmethod
    def compound(u, rows):
        """Matrix of ``k x k`` minors ``det(u[rows[a'], rows[a]])`` (batched over ``u``)."""
        k = rows.shape[1]
        if k == 0:
            return np.ones(u.shape[:-2] + (1, 1), dtype=u.dtype)
        sub = u[..., rows[:, None, :, None], rows[None, :, None, :]]
        if k == 1:
            return sub[..., 0, 0]
        if k == 2:
            return sub[..., 0, 0] * sub[..., 1, 1] - sub[..., 0, 1] * sub[..., 1, 0]
        return np.linalg.det(sub)

    def density(self, X) -> np.ndarray:
        """Spin-summed spatial 1-RDM ``<c^+_i c_j>`` (batched)."""
        Xh = np.conj(np.swapaxes(X, -1, -2))
        rho_up = X @ Xh  # rho_up[a, a'] = sum_b X[a, b] conj(X[a', b])
        rho_dn = np.swapaxes(Xh @ X, -1, -2)
        L = self.params.n_sites
        lead = X.shape[:-2]
        g = rho_up.reshape(lead + (-1,)) @ self._flat_up + rho_dn.reshape(lead + (-1,)) @ self._flat_dn
        return g.reshape(lead + (L, L))

    def propagator(self, h, dt):
        u = expm_taylor(-1j * dt / HBAR * h)
        lam_up = self.compound(u, self._up_rows)
        lam_dn = lam_up if self.params.n_up == self.params.n_down else self.compound(u, self._dn_rows)
        return lam_up, lam_dn

    def step(self, u, p, X, t, dt, pulse=None, F=None):
        """One velocity-Verlet step for a batch; returns ``(u, p, X, F)``."""
        params = self.params
        if F is None:
            F = forces(params, u, self.density(X))
        p_half = p + 0.5 * dt * F
        u_new = u + dt * p_half / params.mass
        field = field_amplitude(pulse, t + 0.5 * dt)
        h = spatial_h(params, 0.5 * (u + u_new), np.full(u.shape[:-1], field))
        lam_up, lam_dn = self.propagator(h, dt)
        X = lam_up @ X @ np.swapaxes(lam_dn, -1, -2)
        F = forces(params, u_new, self.density(X))
        return u_new, p_half + 0.5 * dt * F, X, F

    def advance(self, u, p, P, W, t, n_steps, dt, pulse=None, F=None):
        """``n_steps`` velocity-Verlet steps tracking only one-body quantities.

        Under a one-body propagator ``w`` the spin-summed 1-RDM maps as
        ``P -> conj(w) P w^T``, which is all the forces need; ``W`` accumulates
        the product of the ``w`` so that :meth:`state` can rebuild the
        many-body state on demand. Returns ``(u, p, P, W, F)``.
        """
        params = self.params
        if F is None:
            F = forces(params, u, P)
        lead = u.shape[:-1]
        for k in range(n_steps):
            tk = t + k * dt
            p_half = p + 0.5 * dt * F
            u_new = u + dt * p_half / params.mass
            h = spatial_h(params, 0.5 * (u + u_new), np.full(lead, field_amplitude(pulse, tk + 0.5 * dt)))
            w = expm_taylor(-1j * dt / HBAR * h)
            P = np.conj(w) @ P @ np.swapaxes(w, -1, -2)
            W = w @ W
            F = forces(params, u_new, P)
            u, p = u_new, p_half + 0.5 * dt * F
        return u, p, P, W, F

    def advance_compiled(self, u, p, P, W, t, n_steps, dt, pulse=None, F=None):
        """Compiled equivalent of :meth:`advance` (returns new arrays)."""
        from ._kernels import advance_kernel

        params = self.params
        u = np.array(u, dtype=float)
        p = np.array(p, dtype=float)
        P = np.array(P, dtype=complex)
        W = np.array(W, dtype=complex)
        F = np.array(forces(params, u, P) if F is None else F, dtype=float)
        e0, t_w, omega = (0.0, 1.0, 0.0) if pulse is None else (pulse.e0, pulse.t_w, pulse.omega)
        advance_kernel(u, p, P, W, F, float(t), int(n_steps), float(dt), params.t0, params.alpha,
                       params.k_spring, params.mass, _free_mask(params), params.positions(),
                       float(e0), float(t_w), float(omega), HBAR)
        return u, p, P, W, F

    def state(self, W, X0):
        """Many-body state ``Lambda(W) X0 Lambda(W)^T`` after the one-body propagator ``W``."""
        lam_up = self.compound(W, self._up_rows)
        lam_dn = lam_up if self.params.n_up == self.params.n_down else self.compound(W, self._dn_rows)
        return lam_up @ X0 @ np.swapaxes(lam_dn, -1, -2)
