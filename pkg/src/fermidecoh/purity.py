"""Reduced purities, distilled purities and their population bounds.

For a fixed single-particle basis the distilled purities keep only the part
of the reduced purities carried by coherences between Slater determinants:

    dP1 = Tr[g^2] - sum_e g[e, e]^2
    dP2 = Tr[G^2] - 2 sum_ij G[i, j, i, j]^2

Both RDM-based definitions and determinant pair-sum evaluations are shipped;
the RDM route is the one used for reporting.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .density import ManyBodyDensityMatrix, purity, rotate_density
from .rdm import OneBodyRDM, TwoBodyRDM, one_rdm_oracle, pair_table, rotate, two_rdm_oracle

CLIP_TOL = 1e-12


def _clip(x: float) -> float:
    return 0.0 if -CLIP_TOL < x < 0 else x


def reduced_purity_1(g: OneBodyRDM) -> float:
    return float(np.einsum("ij,ji->", g.g, g.g).real)


def reduced_purity_2(G: TwoBodyRDM) -> float:
    return float(np.einsum("ijkl,klij->", G.G, G.G).real)


def distilled_p1(g: OneBodyRDM) -> float:
    diag = g.g.diagonal().real
    return _clip(reduced_purity_1(g) - float(diag @ diag))


def distilled_p2(G: TwoBodyRDM) -> float:
    diag = np.einsum("ijij->ij", G.G).real
    return _clip(reduced_purity_2(G) - 2.0 * float(np.sum(diag**2)))


# --- determinant pair sums ---------------------------------------------------


def _folded(rho: ManyBodyDensityMatrix):
    pt = pair_table(rho.basis)
    coeff = pt.string_phase * rho.a[pt.n, pt.m]
    return pt, coeff


def _one_body_coherence_sum(rho) -> complex:
    # pairs (n,m) and (p,q) of order one whose transitions are mutual reverses
    pt, coeff = _folded(rho)
    by_transition = defaultdict(complex)
    for i in np.flatnonzero(pt.order == 1):
        by_transition[pt.beta1[i], pt.alpha2[i]] += coeff[i]
    return sum(v * by_transition.get((a, b), 0) for (b, a), v in by_transition.items())


def _two_body_coherence_sum(rho) -> complex:
    pt, coeff = _folded(rho)
    n_part = rho.basis.n
    total = 0j

    # order one: weight (N - s_mq) with m, q the reference determinants of each pair
    groups = defaultdict(list)
    for i in np.flatnonzero(pt.order == 1):
        groups[pt.beta1[i], pt.alpha2[i]].append(i)
    for (b, a), left in groups.items():
        right = groups.get((a, b))
        if not right:
            continue
        right = np.array(right)
        for i in left:
            weight = n_part - pt.orders[pt.m[i], pt.m[right]]
            total += coeff[i] * np.sum(coeff[right] * weight)

    # order two: destroyed labels of one pair are the created labels of the other
    doubles = defaultdict(complex)
    for i in np.flatnonzero(pt.order == 2):
        key = (pt.beta1[i], pt.beta2[i], pt.alpha1[i], pt.alpha2[i])
        doubles[key] += coeff[i]
    for (b1, b2, a1, a2), v in doubles.items():
        total += v * doubles.get((a1, a2, b1, b2), 0)
    return total


def p1_closed(rho: ManyBodyDensityMatrix) -> float:
    diag = rho.populations @ rho.basis.occupations()
    return float(diag @ diag + _one_body_coherence_sum(rho).real)


def p2_closed(rho: ManyBodyDensityMatrix) -> float:
    f = rho.basis.occupations()
    pops = rho.populations
    shared = f @ f.T
    pop_term = 0.5 * pops @ (shared**2 - shared) @ pops
    return float(pop_term + _two_body_coherence_sum(rho).real)


def distilled_p1_closed(rho: ManyBodyDensityMatrix) -> float:
    return _clip(float(_one_body_coherence_sum(rho).real))


def distilled_p2_closed(rho: ManyBodyDensityMatrix) -> float:
    return _clip(float(_two_body_coherence_sum(rho).real))


# --- bounds ------------------------------------------------------------------


@dataclass(frozen=True)
class DistilledBounds:
    p1_max_tight: float
    p1_max_loose: float
    p2_max_tight: float
    p2_max_loose: float


def distilled_bounds(populations, orders, n: int, k: int) -> DistilledBounds:
    """Upper limits of the distilled purities given determinant populations.

    ``orders`` is the symmetric matrix of coherence orders between the
    determinants carrying ``populations``; ``k`` is the number of determinants
    available in the basis.
    """
    pops = np.asarray(populations, dtype=float)
    s = np.asarray(orders, dtype=float)
    if pops.ndim != 1 or np.any(pops < -1e-12) or abs(pops.sum() - 1) > 1e-10:
        raise ValueError("populations must be nonnegative and sum to one")
    if s.shape != (len(pops), len(pops)):
        raise ValueError(f"orders shape {s.shape} does not match {len(pops)} populations")
    if np.any(s != s.T) or np.any(np.diag(s) != 0):
        raise ValueError("orders must be symmetric with zero diagonal")
    if k < len(pops) or k < 1:
        raise ValueError(f"basis size {k} smaller than number of populations {len(pops)}")
    pp = np.outer(pops, pops)
    return DistilledBounds(
        p1_max_tight=float(np.sum(pp * s)),
        p1_max_loose=n * (1 - 1 / k),
        p2_max_tight=float(0.5 * np.sum(pp * s * (2 * n - s - 1))),
        p2_max_loose=n * (n - 1) / 2 * (1 - 1 / k),
    )


# --- report ------------------------------------------------------------------


@dataclass(frozen=True)
class PurityReport:
    P: float
    P1: float
    P2: float
    dP1: float
    dP2: float
    bounds: DistilledBounds | None
    basis_tag: str

    def to_json(self) -> dict:
        return asdict(self)


def report_from_rdms(g: OneBodyRDM, G: TwoBodyRDM, P: float, bounds: DistilledBounds | None) -> PurityReport:
    return PurityReport(
        P=P,
        P1=reduced_purity_1(g),
        P2=reduced_purity_2(G),
        dP1=distilled_p1(g),
        dP2=distilled_p2(G),
        bounds=bounds,
        basis_tag=g.basis_tag,
    )


def bounds_for(rho: ManyBodyDensityMatrix) -> DistilledBounds:
    pops = rho.populations.clip(min=0)
    return distilled_bounds(pops / pops.sum(), pair_table(rho.basis).orders, rho.basis.n, len(rho.basis))


def purity_report(rho: ManyBodyDensityMatrix, U=None, basis_tag=None) -> PurityReport:
    """All purity measures of ``rho``, optionally in the orbital basis rotated by ``U``.

    Bounds need the determinant populations in the same orbital basis; for a
    rotation they are available only when the determinant basis is closed
    under ``U``, otherwise ``bounds`` is ``None``.
    """
    g = one_rdm_oracle(rho)
    G = two_rdm_oracle(rho)
    if U is None:
        tag = basis_tag or "native"
        return report_from_rdms(OneBodyRDM(g.g, tag), TwoBodyRDM(G.G, tag), purity(rho), bounds_for(rho))
    tag = basis_tag or "custom"
    g = rotate(g, U, tag)
    G = rotate(G, U, tag)
    try:
        bounds = bounds_for(rotate_density(rho, U))
    except ValueError:
        bounds = None
    return report_from_rdms(g, G, purity(rho), bounds)
