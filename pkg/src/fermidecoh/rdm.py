"""One- and two-body reduced density matrices.

Index conventions::

    g[i, j]       = Tr[c^+_i c_j rho]
    G[i, j, k, l] = 1/2 Tr[c^+_i c^+_j c_l c_k rho]

so ``G[e1, e2, e4, e3]`` is the two-body element with lower labels
``(e1, e2)`` and upper labels ``(e4, e3)``. With this normalization the pair
trace ``sum_ij G[i, j, i, j]`` equals ``N (N - 1) / 2``.

Two independent routes are provided. The ``*_oracle`` functions apply ladder
strings to every basis determinant and accumulate signed coefficients. The
``*_closed`` functions evaluate the pair-sum expressions driven by
:class:`~fermidecoh.fock.TransitionDescriptor` labels and never touch ladder
operators directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .density import DeterminantBasis, InvariantError, ManyBodyDensityMatrix
from .fock import ANNIHILATE, CREATE, apply_string, bits, coherence_order, transition_descriptor

UNITARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class OneBodyRDM:
    g: np.ndarray
    basis_tag: str = "site"

    @property
    def m(self) -> int:
        return self.g.shape[0]

    def trace(self) -> complex:
        return np.trace(self.g)

    def check(self, n=None, tol=1e-10):
        herm = np.max(np.abs(self.g - self.g.conj().T))
        if herm > tol:
            raise InvariantError("1-RDM hermiticity", f"max deviation {herm:.3e}")
        if n is not None and abs(self.trace() - n) > tol:
            raise InvariantError("1-RDM trace", f"trace {self.trace():.12g} != {n}")
        return self

    def to_json(self) -> dict:
        return _tensor_json(self.g, self.basis_tag)

    @classmethod
    def from_json(cls, data):
        return cls(_tensor_from_json(data, 2), data.get("basis_tag", "site"))


@dataclass(frozen=True, eq=False)
class TwoBodyRDM:
    G: np.ndarray
    basis_tag: str = "site"

    @property
    def m(self) -> int:
        return self.G.shape[0]

    def pair_trace(self) -> complex:
        return np.einsum("ijij->", self.G)

    def check(self, n=None, tol=1e-10):
        G = self.G
        anti = max(np.max(np.abs(G + G.transpose(1, 0, 2, 3))), np.max(np.abs(G + G.transpose(0, 1, 3, 2))))
        if anti > tol:
            raise InvariantError("2-RDM antisymmetry", f"max deviation {anti:.3e}")
        herm = np.max(np.abs(G - G.transpose(2, 3, 0, 1).conj()))
        if herm > tol:
            raise InvariantError("2-RDM pair hermiticity", f"max deviation {herm:.3e}")
        if n is not None and abs(self.pair_trace() - n * (n - 1) / 2) > tol:
            raise InvariantError("2-RDM pair trace", f"{self.pair_trace():.12g} != {n * (n - 1) / 2}")
        return self

    def to_json(self) -> dict:
        return _tensor_json(self.G, self.basis_tag)

    @classmethod
    def from_json(cls, data):
        return cls(_tensor_from_json(data, 4), data.get("basis_tag", "site"))


def _tensor_json(t, tag):
    flat = t.ravel()
    return {"m": t.shape[0], "basis_tag": tag, "re": flat.real.tolist(), "im": flat.imag.tolist()}


def _tensor_from_json(data, rank):
    m = int(data["m"])
    arr = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    return arr.reshape((m,) * rank)


# --- brute-force route -------------------------------------------------------


@lru_cache(maxsize=64)
def _one_body_table(basis: DeterminantBasis):
    """Rows ``(i, j, n, k, sign)`` with ``c^+_i c_j |Phi_n> = sign |Phi_k>``."""
    rows = []
    for n, det in enumerate(basis):
        occ = det.orbitals
        free = [e for e in range(det.m) if not det.is_occupied(e)]
        for j in occ:
            for i in [j] + free:
                res = apply_string(det, [(i, CREATE), (j, ANNIHILATE)])
                if res is None:
                    continue
                sign, image = res
                k = basis.get(image.occ)
                if k is not None:
                    rows.append((i, j, n, k, sign))
    return np.array(rows, dtype=np.int64).reshape(-1, 5)


@lru_cache(maxsize=64)
def _two_body_table(basis: DeterminantBasis):
    """Rows ``(i, j, k, l, n, p, sign)`` with ``c^+_i c^+_j c_l c_k |Phi_n> = sign |Phi_p>``."""
    rows = []
    for n, det in enumerate(basis):
        occ = det.orbitals
        for k, l in permutations(occ, 2):
            holes = [e for e in range(det.m) if not det.is_occupied(e) or e in (k, l)]
            for i, j in permutations(holes, 2):
                res = apply_string(det, [(i, CREATE), (j, CREATE), (l, ANNIHILATE), (k, ANNIHILATE)])
                if res is None:
                    continue
                sign, image = res
                p = basis.get(image.occ)
                if p is not None:
                    rows.append((i, j, k, l, n, p, sign))
    return np.array(rows, dtype=np.int64).reshape(-1, 7)


def one_rdm_oracle(rho: ManyBodyDensityMatrix, basis_tag="site") -> OneBodyRDM:
    # Tr[O rho] = sum_nm a[n, m] <Phi_m|O|Phi_n>
    t = _one_body_table(rho.basis)
    g = np.zeros((rho.basis.m,) * 2, dtype=complex)
    np.add.at(g, (t[:, 0], t[:, 1]), t[:, 4] * rho.a[t[:, 2], t[:, 3]])
    return OneBodyRDM(g, basis_tag)


def two_rdm_oracle(rho: ManyBodyDensityMatrix, basis_tag="site") -> TwoBodyRDM:
    t = _two_body_table(rho.basis)
    G = np.zeros((rho.basis.m,) * 4, dtype=complex)
    np.add.at(G, (t[:, 0], t[:, 1], t[:, 2], t[:, 3]), 0.5 * t[:, 6] * rho.a[t[:, 4], t[:, 5]])
    return TwoBodyRDM(G, basis_tag)


# --- closed-form route -------------------------------------------------------


@dataclass(frozen=True)
class PairTable:
    """Transition descriptors for all ordered pairs ``(n, m)`` with order 1 or 2.

    ``string_phase`` converts a canonical-basis coefficient ``a[n, m]`` into the
    coefficient of ``c^+_{a2} c_{b2} c^+_{a1} c_{b1} |Phi_m>``, the operator
    string the closed-form pair sums are written in.
    """

    n: np.ndarray
    m: np.ndarray
    order: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    string_phase: np.ndarray
    orders: np.ndarray  # full K x K coherence-order matrix


@lru_cache(maxsize=64)
def pair_table(basis: DeterminantBasis) -> PairTable:
    cols = {k: [] for k in ("n", "m", "order", "alpha1", "alpha2", "beta1", "beta2", "string_phase")}
    k = len(basis)
    orders = np.zeros((k, k), dtype=np.int64)
    for n, dn in enumerate(basis):
        for m, dm in enumerate(basis):
            if n == m:
                continue
            orders[n, m] = coherence_order(dn, dm)
            d = transition_descriptor(dm, dn)
            if d is None:
                continue
            if d.order == 1:
                # spectator a1 == b2 on any orbital empty in m; never read beyond the delta
                spectator = next((e for e in range(dm.m) if not dm.is_occupied(e) and e != d.created[0]), -1)
                a1, a2 = spectator, d.created[0]
                b1, b2 = d.destroyed[0], spectator
                phase = d.phase
            else:
                a1, a2 = d.created
                b1, b2 = d.destroyed
                # c+_{a2} c_{b2} c+_{a1} c_{b1} = -c+_{a2} c+_{a1} c_{b2} c_{b1} for a1 != b2
                phase = -d.phase
            for key, val in zip(cols, (n, m, d.order, a1, a2, b1, b2, phase)):
                cols[key].append(val)
    arrays = {key: np.array(v, dtype=np.int64) for key, v in cols.items()}
    return PairTable(orders=orders, **arrays)


def one_rdm_closed(rho: ManyBodyDensityMatrix, basis_tag="site") -> OneBodyRDM:
    basis = rho.basis
    f = basis.occupations()
    g = np.diag(rho.populations @ f).astype(complex)
    pt = pair_table(basis)
    sel = pt.order == 1
    at = pt.string_phase[sel] * rho.a[pt.n[sel], pt.m[sel]]
    np.add.at(g, (pt.beta1[sel], pt.alpha2[sel]), at)
    return OneBodyRDM(g, basis_tag)


def two_rdm_closed(rho: ManyBodyDensityMatrix, basis_tag="site") -> TwoBodyRDM:
    basis = rho.basis
    M = basis.m
    f = basis.occupations()
    pops = rho.populations
    G = np.zeros((M,) * 4, dtype=complex)

    # populations: 1/2 a_mm f(e1) f(e2) (d(e1,e4) d(e2,e3) - d(e1,e3) d(e2,e4))
    w = np.einsum("n,ni,nj->ij", pops, f, f)
    idx = np.arange(M)
    G[idx[:, None], idx[None, :], idx[:, None], idx[None, :]] += 0.5 * w
    G[idx[:, None], idx[None, :], idx[None, :], idx[:, None]] -= 0.5 * w

    pt = pair_table(basis)
    for p in range(len(pt.n)):
        at = 0.5 * pt.string_phase[p] * rho.a[pt.n[p], pt.m[p]]
        if at == 0:
            continue
        a1, a2, b1, b2 = pt.alpha1[p], pt.alpha2[p], pt.beta1[p], pt.beta2[p]
        if pt.order[p] == 1:
            # d(a1,b2) block; e runs over orbitals occupied in m
            occ = np.array(bits(basis[pt.m[p]].occ))
            G[b1, occ, a2, occ] += at
            G[b1, occ, occ, a2] -= at
            G[occ, b1, occ, a2] += at
            G[occ, b1, a2, occ] -= at
        else:
            # (d(e1,b2) d(e2,b1) - d(e1,b1) d(e2,b2)) (d(a1,e3) d(a2,e4) - d(a2,e3) d(a1,e4))
            G[b2, b1, a2, a1] += at
            G[b2, b1, a1, a2] -= at
            G[b1, b2, a2, a1] -= at
            G[b1, b2, a1, a2] += at
    return TwoBodyRDM(G, basis_tag)


# --- basis rotation ----------------------------------------------------------


def check_unitary(U, tol=UNITARY_TOL):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"unitary must be square, got shape {U.shape}")
    dev = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if dev > tol:
        raise ValueError(f"matrix is not unitary: max |U^+ U - 1| = {dev:.3e}")
    return U


def rotate(rdm, U, basis_tag=None):
    """Express an RDM in the basis ``c^+_new,a = sum_j U[j, a] c^+_old,j``.

    Creation labels transform with ``U`` and annihilation labels with ``conj(U)``.
    """
    U = check_unitary(U)
    if isinstance(rdm, OneBodyRDM):
        if U.shape[0] != rdm.m:
            raise ValueError(f"unitary size {U.shape[0]} != {rdm.m}")
        g = U.T @ rdm.g @ U.conj()
        return OneBodyRDM(g, basis_tag or rdm.basis_tag)
    if isinstance(rdm, TwoBodyRDM):
        if U.shape[0] != rdm.m:
            raise ValueError(f"unitary size {U.shape[0]} != {rdm.m}")
        Uc = U.conj()
        G = np.einsum("ijkl,ia,jb,kc,ld->abcd", rdm.G, U, U, Uc, Uc, optimize=True)
        return TwoBodyRDM(G, basis_tag or rdm.basis_tag)
    raise TypeError(f"cannot rotate {type(rdm).__name__}")


def spin_expand(C):
    """Spatial orbital matrix ``C`` (L x L) to interleaved spin-orbital form (2L x 2L)."""
    C = np.asarray(C)
    L = C.shape[0]
    out = np.zeros((2 * L, 2 * L), dtype=C.dtype)
    out[0::2, 0::2] = C
    out[1::2, 1::2] = C
    return out
