"""Many-body electronic density matrices over an explicit determinant basis."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fock import SlaterDeterminant

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
NORM_TOL = 1e-10


class InvariantError(ValueError):
    """A density matrix or RDM violates one of its defining invariants."""

    def __init__(self, invariant: str, detail: str):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}")


@dataclass(frozen=True)
class DeterminantBasis:
    """Ordered list of distinct determinants sharing ``m`` and ``n``."""

    dets: tuple[SlaterDeterminant, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        dets = tuple(self.dets)
        object.__setattr__(self, "dets", dets)
        if not dets:
            raise ValueError("basis must contain at least one determinant")
        ms = {d.m for d in dets}
        ns = {d.n for d in dets}
        if len(ms) != 1 or len(ns) != 1:
            raise ValueError(f"determinants must share m and n, got m={sorted(ms)} n={sorted(ns)}")
        index = {d.occ: i for i, d in enumerate(dets)}
        if len(index) != len(dets):
            raise ValueError("basis contains duplicate determinants")
        object.__setattr__(self, "_index", index)

    @property
    def m(self) -> int:
        return self.dets[0].m

    @property
    def n(self) -> int:
        return self.dets[0].n

    def __len__(self):
        return len(self.dets)

    def __iter__(self):
        return iter(self.dets)

    def __getitem__(self, i):
        return self.dets[i]

    def index(self, det: SlaterDeterminant) -> int:
        return self._index[det.occ]

    def get(self, occ: int):
        return self._index.get(occ)

    def occupations(self) -> np.ndarray:
        """``(K, m)`` array of 0/1 occupation numbers."""
        occ = np.array([d.occ for d in self.dets], dtype=np.uint64)
        return ((occ[:, None] >> np.arange(self.m, dtype=np.uint64)) & np.uint64(1)).astype(float)

    def to_json(self) -> list:
        return [d.to_json() for d in self.dets]

    @classmethod
    def from_json(cls, data) -> "DeterminantBasis":
        return cls(tuple(SlaterDeterminant.from_json(d) for d in data))


@dataclass(frozen=True, eq=False)
class ManyBodyDensityMatrix:
    """``rho = sum_nm a[n, m] |Phi_n><Phi_m|`` with canonical determinants."""

    basis: DeterminantBasis
    a: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        a = np.array(self.a, dtype=complex)
        k = len(self.basis)
        if a.shape != (k, k):
            raise ValueError(f"coefficient matrix shape {a.shape} does not match basis size {k}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    def check(self, hermitian_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, psd_tol=PSD_TOL):
        """Raise :class:`InvariantError` naming the first violated invariant."""
        herm = np.max(np.abs(self.a - self.a.conj().T))
        if herm > hermitian_tol:
            raise InvariantError("hermiticity", f"max |a - a^+| = {herm:.3e}")
        tr = np.trace(self.a)
        if abs(tr - 1) > trace_tol:
            raise InvariantError("unit trace", f"trace = {tr:.15g}")
        lam = np.linalg.eigvalsh((self.a + self.a.conj().T) / 2)
        if lam[0] < -psd_tol:
            raise InvariantError("positive semidefinite", f"min eigenvalue = {lam[0]:.3e}")
        return self

    @property
    def populations(self) -> np.ndarray:
        return self.a.diagonal().real.copy()

    def to_json(self) -> dict:
        return {
            "basis": self.basis.to_json(),
            "a": [[[z.real, z.imag] for z in row] for row in self.a],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ManyBodyDensityMatrix":
        basis = DeterminantBasis.from_json(data["basis"])
        raw = np.asarray(data["a"], dtype=float)
        return cls(basis, raw[..., 0] + 1j * raw[..., 1])

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def from_pure(basis: DeterminantBasis, coeffs) -> ManyBodyDensityMatrix:
    """Projector onto ``sum_n coeffs[n] |Phi_n>``; normalizes (with a warning) if needed."""
    c = np.asarray(coeffs, dtype=complex)
    if c.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} coefficients, got shape {c.shape}")
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ValueError("cannot build a state from the zero vector")
    normalized = abs(norm - 1) > NORM_TOL
    if normalized:
        warnings.warn(f"state norm {norm:.6g} != 1; normalizing", stacklevel=2)
        c = c / norm
    return ManyBodyDensityMatrix(basis, np.outer(c, c.conj()), normalized=normalized)


def ensemble_average(members) -> ManyBodyDensityMatrix:
    """Weighted sum of ``(weight, rho)`` pairs over a common basis."""
    members = list(members)
    if not members:
        raise ValueError("empty ensemble")
    basis = members[0][1].basis
    total = 0.0
    acc = np.zeros((len(basis), len(basis)), dtype=complex)
    for w, rho in members:
        if rho.basis != basis:
            raise ValueError("ensemble members use different determinant bases")
        if w < 0:
            raise ValueError(f"negative weight {w}")
        acc += w * rho.a
        total += w
    if abs(total - 1) > NORM_TOL:
        raise ValueError(f"weights sum to {total}, not 1")
    return ManyBodyDensityMatrix(basis, acc)


def purity(rho: ManyBodyDensityMatrix) -> float:
    """``Tr[rho^2]``."""
    return float(np.sum(np.abs(rho.a) ** 2))


def determinant_overlaps(basis: DeterminantBasis, V, target: DeterminantBasis | None = None) -> np.ndarray:
    """``W[p, n] = det(V[occ_p, occ_n])``: many-body image of a one-body map.

    If every creator transforms as ``c^+_j -> sum_a V[a, j] c^+_a`` then
    ``|Phi_n> -> sum_p W[p, n] |Phi_p>`` over the ``target`` determinants.
    """
    target = basis if target is None else target
    V = np.asarray(V)
    rows = [d.orbitals for d in target]
    cols = [d.orbitals for d in basis]
    sub = V[np.array(rows)[:, None, :, None], np.array(cols)[None, :, None, :]]
    return np.linalg.det(sub)


def rotate_density(rho: ManyBodyDensityMatrix, U, tol=1e-10) -> ManyBodyDensityMatrix:
    """Re-express ``rho`` over determinants of the orbitals ``c^+_new,a = sum_j U[j, a] c^+_old,j``.

    The determinant basis must be closed under the rotation, e.g. a full
    fixed-``N`` space or a spin sector with a spin-diagonal ``U``.
    """
    U = np.asarray(U, dtype=complex)
    W = determinant_overlaps(rho.basis, U.conj().T)
    leak = np.max(np.abs(W.conj().T @ W - np.eye(len(rho.basis))))
    if leak > tol:
        raise ValueError(f"determinant basis is not closed under the rotation (leak {leak:.2e})")
    return ManyBodyDensityMatrix(rho.basis, W @ rho.a @ W.conj().T)
