"""Compiled inner loop of :meth:`SectorPropagator.advance` (same arithmetic, one trajectory at a time)."""

import numpy as np
from numba import njit

TAYLOR_TOL = 1e-18


@njit(cache=True)
def _expm_step(h, theta, out, term, tmp):
    # out = exp(-i theta h) by Taylor series; h real symmetric
    L = h.shape[0]
    x = 0.0
    for i in range(L):
        row = 0.0
        for j in range(L):
            row += abs(h[i, j])
        x = max(x, row)
    x *= theta
    for i in range(L):
        for j in range(L):
            out[i, j] = 1.0 if i == j else 0.0
            term[i, j] = out[i, j]
    k = 0
    bound = 1.0
    while True:
        k += 1
        c = -1j * theta / k
        for i in range(L):
            for j in range(L):
                acc = 0j
                for l in range(L):
                    acc += term[i, l] * h[l, j]
                tmp[i, j] = acc * c
        for i in range(L):
            for j in range(L):
                term[i, j] = tmp[i, j]
                out[i, j] += tmp[i, j]
        bound = bound * x / k
        if bound * x / (k + 1) < TAYLOR_TOL:
            return


@njit(cache=True)
def _forces(u, P, alpha, k_spring, free, F):
    L = u.shape[0]
    for n in range(L):
        F[n] = 0.0
    for n in range(L - 1):
        b = 2.0 * P[n, n + 1].real
        d = u[n + 1] - u[n]
        g = alpha * b + k_spring * d
        F[n + 1] -= g
        F[n] += g
    for n in range(L):
        if not free[n]:
            F[n] = 0.0


@njit(cache=True)
def advance_kernel(u, p, P, W, F, t, n_steps, dt, t0, alpha, k_spring, mass, free, x,
                   e0, t_w, omega, hbar):
    """In-place advance of every trajectory; ``F`` must hold the current forces."""
    T, L = u.shape
    theta = dt / hbar
    h = np.zeros((L, L))
    w = np.zeros((L, L), dtype=np.complex128)
    term = np.zeros((L, L), dtype=np.complex128)
    tmp = np.zeros((L, L), dtype=np.complex128)
    tmp2 = np.zeros((L, L), dtype=np.complex128)
    u_new = np.zeros(L)
    for s in range(T):
        for k in range(n_steps):
            tm = t + k * dt + 0.5 * dt
            field = 0.0
            if e0 != 0.0:
                z = (tm - 5.0 * t_w) / t_w
                field = e0 * np.exp(-z * z) * np.cos(omega * tm)
            for n in range(L):
                p[s, n] += 0.5 * dt * F[s, n]
                u_new[n] = u[s, n] + dt * p[s, n] / mass
            for i in range(L):
                for j in range(L):
                    h[i, j] = 0.0
                h[i, i] = -field * x[i]
            for n in range(L - 1):
                hop = t0 - alpha * (0.5 * (u[s, n + 1] + u_new[n + 1]) - 0.5 * (u[s, n] + u_new[n]))
                h[n, n + 1] = -hop
                h[n + 1, n] = -hop
            _expm_step(h, theta, w, term, tmp)
            # P <- conj(w) P w^T
            for i in range(L):
                for j in range(L):
                    acc = 0j
                    for l in range(L):
                        acc += np.conj(w[i, l]) * P[s, l, j]
                    tmp[i, j] = acc
            for i in range(L):
                for j in range(L):
                    acc = 0j
                    for l in range(L):
                        acc += tmp[i, l] * w[j, l]
                    P[s, i, j] = acc
            # W <- w W
            for i in range(L):
                for j in range(L):
                    acc = 0j
                    for l in range(L):
                        acc += w[i, l] * W[s, l, j]
                    tmp2[i, j] = acc
            for i in range(L):
                for j in range(L):
                    W[s, i, j] = tmp2[i, j]
            for n in range(L):
                u[s, n] = u_new[n]
            _forces(u[s], P[s], alpha, k_spring, free, F[s])
            for n in range(L):
                p[s, n] += 0.5 * dt * F[s, n]
