"""Randomized oracle-equivalence and property suites.

Each suite draws its instances from ``numpy.random.default_rng(seed)`` and
returns :class:`Check` records (property name, instance count, worst
deviation, tolerance). A failing check carries the seed needed to reproduce
it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .density import DeterminantBasis, ManyBodyDensityMatrix, from_pure, purity, rotate_density
from .fock import (
    ANNIHILATE,
    CREATE,
    SlaterDeterminant,
    apply_string,
    coherence_order,
    enumerate_determinants,
    transition_descriptor,
)
from .purity import (
    bounds_for,
    distilled_p1,
    distilled_p1_closed,
    distilled_p2,
    distilled_p2_closed,
    p1_closed,
    p2_closed,
    reduced_purity_1,
    reduced_purity_2,
)
from .rdm import pair_table, one_rdm_closed, one_rdm_oracle, rotate, two_rdm_closed, two_rdm_oracle

SCOPES = ("fock", "rdm", "purity", "ssh")
SIZES = [(m, n) for m in range(2, 9) for n in range(1, min(m, 4) + 1) if n < m]


@dataclass(frozen=True)
class Check:
    name: str
    instances: int
    max_dev: float
    tol: float
    seed: int

    @property
    def passed(self) -> bool:
        return bool(self.max_dev <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "" if self.passed else f"  (reproduce with --seed {self.seed})"
        return f"{status}  {self.name:<58s} n={self.instances:<5d} max|dev|={self.max_dev:.2e}  tol={self.tol:.0e}{extra}"


# --- random instances --------------------------------------------------------


def random_basis(rng, m: int, n: int, k_max=20) -> DeterminantBasis:
    dets = enumerate_determinants(m, n)
    k = int(rng.integers(2 if len(dets) > 1 else 1, min(len(dets), k_max) + 1))
    pick = np.sort(rng.choice(len(dets), k, replace=False))
    return DeterminantBasis(tuple(dets[i] for i in pick))


def random_density(rng, basis: DeterminantBasis, max_order=2, rank=None) -> ManyBodyDensityMatrix:
    """Random valid density matrix with coherences only between determinants of order <= ``max_order``.

    Without a restriction the matrix is ``X X^+`` normalized. With one, the
    disallowed entries are zeroed and the spectrum is shifted back to
    nonnegative, which keeps the support pattern.
    """
    K = len(basis)
    r = K if rank is None else rank
    X = rng.normal(size=(K, r)) + 1j * rng.normal(size=(K, r))
    a = X @ X.conj().T
    if max_order is not None:
        a = np.where(pair_table(basis).orders <= max_order, a, 0)
        lam = np.linalg.eigvalsh(a)[0]
        if lam < 0:
            a = a - 1.0001 * lam * np.eye(K)
    return ManyBodyDensityMatrix(basis, a / np.trace(a).real)


def random_instance(rng, max_order=2):
    m, n = SIZES[rng.integers(len(SIZES))]
    return random_density(rng, random_basis(rng, m, n), max_order)


def random_unitary(rng, m: int) -> np.ndarray:
    return unitary_group.rvs(m, random_state=rng)


def two_det_superposition(m: int, n: int, order: int, rng=None, weight=0.5):
    """Pure ``sqrt(w)|Phi_0> + e^{i phi} sqrt(1-w)|Phi_1>`` with ``Phi_0``, ``Phi_1`` of the given order."""
    first = SlaterDeterminant.from_orbitals(m, range(n))
    moved = list(range(n - order, n))
    second = SlaterDeterminant.from_orbitals(m, [o for o in range(n) if o not in moved] + list(range(n, n + order)))
    phase = 1.0 if rng is None else np.exp(2j * np.pi * rng.random())
    basis = DeterminantBasis((first, second))
    return from_pure(basis, [np.sqrt(weight), phase * np.sqrt(1 - weight)])


# --- fock -----------------------------------------------------------------------


def _list_phase(m: SlaterDeterminant, ops) -> tuple[int, int] | None:
    """Apply ladder ops (rightmost first) to the ordered creator list of ``m`` by permutation parity."""
    creators = list(m.orbitals)
    sign = 1
    for orb, kind in reversed(ops):
        if kind == ANNIHILATE:
            if orb not in creators:
                return None
            k = creators.index(orb)
            sign *= (-1) ** k
            creators.pop(k)
        else:
            if orb in creators:
                return None
            creators.insert(0, orb)
    # sort creators into ascending order, counting transpositions
    inversions = sum(1 for i in range(len(creators)) for j in range(i + 1, len(creators)) if creators[i] > creators[j])
    occ = 0
    for o in creators:
        occ |= 1 << o
    return sign * (-1) ** inversions, occ


def suite_fock(seed=0, max_m=6) -> list[Check]:
    phase_dev, count, order_dev = 0, 0, 0
    for m in range(2, max_m + 1):
        for n in range(1, m):
            dets = enumerate_determinants(m, n)
            for a in dets:
                for b in dets:
                    s = coherence_order(b, a)
                    order_dev = max(order_dev, abs(s - len(set(b.orbitals) - set(a.orbitals))))
                    desc = transition_descriptor(a, b)
                    if desc is None:
                        continue
                    count += 1
                    sign, occ = _list_phase(a, desc.operator_string())
                    phase_dev = max(phase_dev, abs(sign - desc.phase) + (occ != b.occ))
                    got = apply_string(a, desc.operator_string())
                    phase_dev = max(phase_dev, abs(got[0] - desc.phase) + (got[1] != b))
    return [
        Check(f"transition phase vs permutation parity (M<={max_m})", count, float(phase_dev), 0.0, seed),
        Check(f"coherence order = transitions needed (M<={max_m})", count, float(order_dev), 0.0, seed),
    ]


# --- rdm ------------------------------------------------------------------------


def suite_rdm(seed=0, instances=500) -> list[Check]:
    rng = np.random.default_rng(seed)
    d1 = d2 = tr1 = tr2 = 0.0
    for _ in range(instances):
        rho = random_instance(rng)
        g, G = one_rdm_oracle(rho), two_rdm_oracle(rho)
        d1 = max(d1, np.max(np.abs(g.g - one_rdm_closed(rho).g)))
        d2 = max(d2, np.max(np.abs(G.G - two_rdm_closed(rho).G)))
        n = rho.basis.n
        tr1 = max(tr1, abs(g.trace() - n))
        tr2 = max(tr2, abs(G.pair_trace() - n * (n - 1) / 2))
    unrestricted = 0.0
    for _ in range(max(1, instances // 10)):
        m, n = [(8, 4), (7, 3), (8, 3)][rng.integers(3)]
        rho = random_density(rng, random_basis(rng, m, n), max_order=None)
        unrestricted = max(unrestricted, np.max(np.abs(two_rdm_oracle(rho).G - two_rdm_closed(rho).G)),
                           np.max(np.abs(one_rdm_oracle(rho).g - one_rdm_closed(rho).g)))
    return [
        Check("closed-form 1-RDM = oracle (s<=2 support)", instances, float(d1), 1e-12, seed),
        Check("closed-form 2-RDM = oracle (s<=2 support)", instances, float(d2), 1e-12, seed),
        Check("1-RDM trace = N", instances, float(tr1), 1e-10, seed),
        Check("2-RDM pair trace = N(N-1)/2", instances, float(tr2), 1e-10, seed),
        Check("closed forms = oracles with order>2 coherences present", max(1, instances // 10), float(unrestricted), 1e-12, seed),
    ]


# --- purity ---------------------------------------------------------------------


def suite_purity(seed=0, instances=500, unitaries=20) -> list[Check]:
    rng = np.random.default_rng(seed)
    dp = {k: 0.0 for k in ("P1", "P2", "dP1", "dP2")}
    viol = {k: 0.0 for k in ("p1_tight", "p1_loose", "p2_tight", "p2_loose", "neg")}
    for _ in range(instances):
        rho = random_instance(rng)
        g, G = one_rdm_oracle(rho), two_rdm_oracle(rho)
        dp["P1"] = max(dp["P1"], abs(reduced_purity_1(g) - p1_closed(rho)))
        dp["P2"] = max(dp["P2"], abs(reduced_purity_2(G) - p2_closed(rho)))
        a1, a2 = distilled_p1(g), distilled_p2(G)
        dp["dP1"] = max(dp["dP1"], abs(a1 - distilled_p1_closed(rho)))
        dp["dP2"] = max(dp["dP2"], abs(a2 - distilled_p2_closed(rho)))
        b = bounds_for(rho)
        viol["p1_tight"] = max(viol["p1_tight"], a1 - b.p1_max_tight)
        viol["p1_loose"] = max(viol["p1_loose"], a1 - b.p1_max_loose)
        viol["p2_tight"] = max(viol["p2_tight"], a2 - b.p2_max_tight)
        viol["p2_loose"] = max(viol["p2_loose"], a2 - b.p2_max_loose)
        viol["neg"] = max(viol["neg"], -a1, -a2)

    inv = 0.0
    n_inv = 0
    for _ in range(unitaries):
        m, n = [(6, 3), (8, 4), (5, 2)][rng.integers(3)]
        rho = random_density(rng, DeterminantBasis(tuple(enumerate_determinants(m, n))), max_order=None)
        g, G = one_rdm_oracle(rho), two_rdm_oracle(rho)
        U = random_unitary(rng, m)
        inv = max(inv, abs(reduced_purity_1(rotate(g, U)) - reduced_purity_1(g)),
                  abs(reduced_purity_2(rotate(G, U)) - reduced_purity_2(G)))
        # the rotated many-body state gives the same RDMs as rotating the RDMs
        rho_u = rotate_density(rho, U)
        inv = max(inv, np.max(np.abs(one_rdm_oracle(rho_u).g - rotate(g, U).g)),
                  abs(purity(rho_u) - purity(rho)))
        n_inv += 1

    ratio = 0.0
    for n in (2, 3, 4):
        for _ in range(5):
            rho = two_det_superposition(2 * n + 2, n, 1, rng, weight=rng.uniform(0.05, 0.95))
            ratio = max(ratio, abs(distilled_p2(two_rdm_oracle(rho)) - (n - 1) * distilled_p1(one_rdm_oracle(rho))))

    return [
        Check("P1 closed form = Tr g^2", instances, dp["P1"], 1e-10, seed),
        Check("P2 closed form = Tr G^2", instances, dp["P2"], 1e-10, seed),
        Check("distilled P1 closed form = RDM definition", instances, dp["dP1"], 1e-10, seed),
        Check("distilled P2 closed form = RDM definition", instances, dp["dP2"], 1e-10, seed),
        Check("distilled purities nonnegative", instances, max(0.0, viol.pop("neg")), 1e-12, seed),
        *[Check(f"bound {k} respected (violation)", instances, max(0.0, v), 1e-10, seed) for k, v in viol.items()],
        Check("P1, P2 invariant under random unitaries", n_inv, float(inv), 1e-10, seed),
        Check("ratio law dP2 = (N-1) dP1, order-1 pairs", 15, float(ratio), 1e-12, seed),
    ]


# --- ssh ------------------------------------------------------------------------


def suite_ssh(seed=0) -> list[Check]:
    from .ssh.dynamics import (
        SectorPropagator,
        TrajectoryState,
        ehrenfest_step,
        spatial_density_generic,
    )
    from .ssh.model import (
        LaserPulse,
        SSHParams,
        build_h1,
        ground_state_gradient,
        many_body_hamiltonian,
        optimize_geometry,
        sector_basis,
    )

    rng = np.random.default_rng(seed)
    params = SSHParams()
    u_star, e, C = optimize_geometry(params)
    basis = sector_basis(params)
    out = [
        Check("optimized geometry gradient norm", 1, float(np.linalg.norm(ground_state_gradient(params, u_star))), 1e-8, seed),
        Check("orbital spectrum symmetric about zero", 1, float(np.max(np.abs(e + e[::-1]))), 1e-12, seed),
    ]

    # many-body Hamiltonian against ladder-operator matrix elements
    dev = 0.0
    for _ in range(3):
        u = u_star + 0.05 * rng.normal(size=params.n_sites)
        h1 = build_h1(params, u, rng.normal())
        H = many_body_hamiltonian(h1, basis)
        ref = np.zeros_like(H)
        for j, dm in enumerate(basis):
            for p in range(basis.m):
                for q in range(basis.m):
                    if h1[p, q] == 0:
                        continue
                    r = apply_string(dm, [(p, CREATE), (q, ANNIHILATE)])
                    if r is not None:
                        ref[basis.index(r[1]), j] += r[0] * h1[p, q]
        dev = max(dev, np.max(np.abs(H - ref)))
    out.append(Check("many-body Hamiltonian = ladder-operator matrix", 3, float(dev), 1e-12, seed))

    # batched propagators against the full many-body step
    prop = SectorPropagator(params, basis)
    pulse = LaserPulse(1.0, 10.0, 6.3)
    psi = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    psi /= np.linalg.norm(psi)
    mask = np.zeros(params.n_sites)
    mask[params.free_sites()] = 1
    u0, p0 = u_star + 0.02 * rng.normal(size=params.n_sites) * mask, 2 * rng.normal(size=params.n_sites) * mask
    state = TrajectoryState(u0, p0, psi, 45.0)
    X0 = prop.to_matrix(psi)[None]
    P0 = prop.density(X0)
    W0 = np.eye(params.n_sites, dtype=complex)[None]
    steps, dt = 200, 5e-3
    for _ in range(steps):
        state = ehrenfest_step(state, params, pulse, dt, basis)
    fast = prop.advance(u0[None], p0[None], P0, W0, 45.0, steps, dt, pulse)
    comp = prop.advance_compiled(u0[None], p0[None], P0, W0, 45.0, steps, dt, pulse)
    d_fast = max(np.max(np.abs(prop.to_vector(prop.state(fast[3], X0))[0] - state.psi)), np.max(np.abs(fast[1][0] - state.p)))
    d_comp = max(np.max(np.abs(prop.to_vector(prop.state(comp[3], X0))[0] - state.psi)), np.max(np.abs(comp[1][0] - state.p)))
    d_dens = np.max(np.abs(fast[2][0] - spatial_density_generic(state.psi, basis)))
    out += [
        Check("one-body propagation = full many-body step", steps, float(max(d_fast, d_dens)), 1e-10, seed),
        Check("compiled propagation = full many-body step", steps, float(d_comp), 1e-10, seed),
    ]
    return out


SUITES = {"fock": suite_fock, "rdm": suite_rdm, "purity": suite_purity, "ssh": suite_ssh}


def run_validation(scope="all", seed=0, instances=500, echo=print) -> bool:
    """Run the selected suites, echo one line per check, return overall success."""
    scopes = SCOPES if scope == "all" else (scope,)
    ok = True
    for name in scopes:
        if name not in SUITES:
            raise ValueError(f"unknown scope {name!r}; choose from all, {', '.join(SCOPES)}")
        t0 = time.perf_counter()
        kw = {"seed": seed}
        if name in ("rdm", "purity"):
            kw["instances"] = instances
        checks = SUITES[name](**kw)
        echo(f"[{name}] {time.perf_counter() - t0:.1f} s")
        for c in checks:
            echo("  " + c.line())
            ok &= c.passed
    return ok
