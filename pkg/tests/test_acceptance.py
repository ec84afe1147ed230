"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The dynamics criteria share three cached full-length ensemble runs, about
four minutes on a single core. Set ``FERMIDECOH_THREADS`` to spread the
trajectory chunks over several processes.
"""
import time

import numpy as np
import pytest
from scipy.signal import find_peaks

from fermidecoh.cli import CSV_COLUMNS, time_series
from fermidecoh.density import DeterminantBasis, ManyBodyDensityMatrix, from_pure
from fermidecoh.fock import SlaterDeterminant, enumerate_determinants
from fermidecoh.purity import (
    bounds_for,
    distilled_p1,
    distilled_p1_closed,
    distilled_p2,
    distilled_p2_closed,
    p1_closed,
    p2_closed,
    purity_report,
    reduced_purity_1,
    reduced_purity_2,
)
from fermidecoh.rdm import one_rdm_closed, one_rdm_oracle, two_rdm_closed, two_rdm_oracle
from fermidecoh.ssh.experiment import preset, run_ensemble
from fermidecoh.validation import SIZES, random_basis, random_density, random_unitary, two_det_superposition

N_RANDOM = 500
COL = {name: i for i, name in enumerate(CSV_COLUMNS)}


def verdict(request, number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    with request.config.pluginmanager.getplugin("capturemanager").global_and_fixture_disabled():
        print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def ensemble():
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(N_RANDOM):
        m, n = SIZES[rng.integers(len(SIZES))]
        out.append(random_density(rng, random_basis(rng, m, n), max_order=2))
    return out


_RUNS = {}


def run(kind):
    if kind not in _RUNS:
        start = time.perf_counter()
        result = run_ensemble(preset(kind))
        _RUNS[kind] = (result, time_series(result), time.perf_counter() - start)
    return _RUNS[kind]


def dominant_period(t, y, min_freq=1 / 200):
    dt = t[1] - t[0]
    spec = np.abs(np.fft.rfft((y - y.mean()) * np.hanning(len(y))))
    freq = np.fft.rfftfreq(len(y), dt)
    keep = freq >= min_freq
    return 1 / freq[keep][np.argmax(spec[keep])]


# oracle and property suite

def test_criterion_1_closed_rdms_match_oracles(request):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(N_RANDOM):
        m, n = SIZES[rng.integers(len(SIZES))]
        rho = random_density(rng, random_basis(rng, m, n), max_order=2)
        worst = max(worst,
                    np.abs(one_rdm_closed(rho).g - one_rdm_oracle(rho).g).max(),
                    np.abs(two_rdm_closed(rho).G - two_rdm_oracle(rho).G).max())
    elapsed = time.perf_counter() - start
    verdict(request, 1, worst <= 1e-12 and elapsed < 120,
            f"{N_RANDOM} instances, max |closed - oracle| = {worst:.2e} (tol 1e-12), {elapsed:.1f} s (limit 120 s)")


def test_criterion_2_closed_purities_match_definitions(ensemble, request):
    worst = 0.0
    for rho in ensemble:
        g, G = one_rdm_oracle(rho), two_rdm_oracle(rho)
        worst = max(worst,
                    abs(p1_closed(rho) - reduced_purity_1(g)),
                    abs(p2_closed(rho) - reduced_purity_2(G)),
                    abs(distilled_p1_closed(rho) - distilled_p1(g)),
                    abs(distilled_p2_closed(rho) - distilled_p2(G)))
    verdict(request, 2, worst <= 1e-10, f"{len(ensemble)} instances, max deviation {worst:.2e} (tol 1e-10)")


def _random_hermitian_unit_trace(rng, k):
    # positive and unit trace, so the coefficients form a physical state
    x = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    a = x @ x.conj().T
    return a / np.trace(a).real


def test_criterion_3_worked_examples(request):
    det = SlaterDeterminant.from_orbitals
    ex1 = DeterminantBasis(tuple(det(4, o) for o in ([0, 1], [2, 3], [0, 3], [1, 2])))
    ex2 = DeterminantBasis(tuple(det(6, o) for o in ([0, 1, 2], [0, 1, 5], [2, 3, 4], [3, 4, 5])))
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        a = _random_hermitian_unit_trace(rng, 4)
        symbolic = (2 * (abs(a[0, 2]) ** 2 + abs(a[0, 3]) ** 2 + abs(a[1, 2]) ** 2 + abs(a[1, 3]) ** 2)
                    - 2 * (a[0, 3] * a[1, 2] + a[1, 3] * a[0, 2]
                           + np.conj(a[0, 2] * a[1, 3]) + np.conj(a[1, 2] * a[0, 3]))).real
        worst = max(worst, abs(distilled_p1(one_rdm_oracle(ManyBodyDensityMatrix(ex1, a))) - symbolic))
    for _ in range(100):
        a = _random_hermitian_unit_trace(rng, 4)
        symbolic = (4 * (abs(a[0, 1]) ** 2 + abs(a[2, 3]) ** 2)
                    + 2 * (abs(a[0, 2]) ** 2 + abs(a[1, 3]) ** 2 + a[0, 2] * a[3, 1] + a[2, 0] * a[1, 3])).real
        worst = max(worst, abs(distilled_p2(two_rdm_oracle(ManyBodyDensityMatrix(ex2, a))) - symbolic))
    verdict(request, 3, worst <= 1e-12, f"2 x 100 coefficient sets, max deviation {worst:.2e} (tol 1e-12)")


def test_criterion_4_single_determinant_limits(request):
    problems = []
    for n in (2, 3, 4):
        rho = from_pure(DeterminantBasis((SlaterDeterminant.from_orbitals(2 * n, range(n)),)), [1])
        g, G = one_rdm_oracle(rho), two_rdm_oracle(rho)
        p1, p2 = reduced_purity_1(g), reduced_purity_2(G)
        if p1 != n:
            problems.append(f"N={n}: P1={p1}")
        if p2 != n * (n + 1) / 2:
            problems.append(f"N={n}: P2={p2:g}, required N(N+1)/2={n * (n + 1) // 2}")
        if distilled_p1(g) != 0 or distilled_p2(G) != 0:
            problems.append(f"N={n}: distilled purities nonzero")
    verdict(request, 4, not problems, "; ".join(problems) or "P1 = N, P2 = N(N+1)/2, distilled = 0 for N = 2, 3, 4")


def test_criterion_5_bounds(ensemble, request):
    worst = -np.inf
    for rho in ensemble:
        d1, d2 = distilled_p1(one_rdm_oracle(rho)), distilled_p2(two_rdm_oracle(rho))
        b = bounds_for(rho)
        n, k = rho.basis.n, len(rho.basis)
        assert b.p1_max_loose == pytest.approx(n * (1 - 1 / k))
        assert b.p2_max_loose == pytest.approx(n * (n - 1) / 2 * (1 - 1 / k))
        worst = max(worst, d1 - b.p1_max_tight, d2 - b.p2_max_tight,
                    b.p1_max_tight - b.p1_max_loose, b.p2_max_tight - b.p2_max_loose)
    verdict(request, 5, worst <= 1e-10, f"{len(ensemble)} instances, largest bound excess {worst:.2e} (tol 1e-10)")


def test_criterion_6_ratio_law(request):
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in (2, 3, 4):
        for _ in range(30):
            rho = two_det_superposition(2 * n + 2, n, 1, rng, weight=rng.uniform(0.01, 0.99))
            d1, d2 = distilled_p1(one_rdm_oracle(rho)), distilled_p2(two_rdm_oracle(rho))
            worst = max(worst, abs(d2 - (n - 1) * d1))
    verdict(request, 6, worst <= 1e-12, f"90 superpositions, max |dP2 - (N-1) dP1| = {worst:.2e} (tol 1e-12)")


def test_criterion_7_basis_invariance_and_dependence(request):
    rng = np.random.default_rng(7)
    basis = DeterminantBasis(tuple(enumerate_determinants(6, 3)))
    rho = random_density(rng, basis, max_order=None)
    ref = purity_report(rho)
    worst = 0.0
    for _ in range(20):
        rep = purity_report(rho, random_unitary(rng, 6))
        worst = max(worst, abs(rep.P1 - ref.P1), abs(rep.P2 - ref.P2))
    det = from_pure(basis, np.eye(len(basis))[0])
    change = purity_report(det, random_unitary(rng, 6)).dP1 - purity_report(det).dP1
    verdict(request, 7, worst <= 1e-10 and change > 1e-3,
            f"20 unitaries, max P1/P2 change {worst:.2e} (tol 1e-10); "
            f"single determinant dP1 change under rotation {change:.3f} (> 1e-3)")


# dynamics suite

@pytest.mark.slow
def test_criterion_8_fig1a(request):
    result, rows, elapsed = run("fig1a")
    t, d1e, d1s = rows[:, COL["t_fs"]], rows[:, COL["dP1_energy"]], rows[:, COL["dP1_site"]]
    initial = d1e[0]
    period = dominant_period(t, d1e)
    tail = t >= t[-1] - 100
    late, late_site = d1e[tail].mean(), d1s[tail].mean()
    ok = (abs(initial - 0.5) <= 1e-3 and abs(period - 30) <= 8 and late < 0.3 * initial
          and late_site > 0.02 and elapsed < 600)
    verdict(request, 8, ok,
            f"dP1(energy) initial {initial:.6f}, dominant period {period:.1f} fs, final-100-fs mean {late:.4f} "
            f"(< {0.3 * initial:.4f}), dP1(site) final mean {late_site:.3f}, run {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_9_fig1b(request):
    result, rows, _ = run("fig1b")
    t, d1e, d2e = rows[:, COL["t_fs"]], rows[:, COL["dP1_energy"]], rows[:, COL["dP2_energy"]]
    spread = np.abs(d1e - d1e[0]).max()
    late = d2e[t >= t[-1] - 100].mean()
    peaks, _ = find_peaks(d2e, prominence=0.05)
    ok = spread <= 0.05 and late <= 0.5 * d2e[0] and len(peaks) >= 2
    verdict(request, 9, ok,
            f"dP1(energy) max deviation {spread:.4f} (tol 0.05); dP2(energy) {d2e[0]:.3f} -> final-100-fs mean "
            f"{late:.3f}, {len(peaks)} recurrence peaks")


@pytest.mark.slow
def test_criterion_10_fig2(request):
    result, rows, _ = run("fig2")
    t = rows[:, COL["t_fs"]]
    d1e = rows[:, COL["dP1_energy"]]
    p1, p2 = rows[:, COL["P1"]], rows[:, COL["P2"]]
    d1s, d2s = rows[:, COL["dP1_site"]], rows[:, COL["dP2_site"]]
    t_max = t[np.argmax(d1e)]
    t_field = t[np.argmax(np.abs(rows[:, COL["field_VperA"]]))]
    # site coherences before the pulse arrives versus the last 20 fs
    before, tail = t <= 20, t >= t[-1] - 20
    site_drop = min(d1s[before].mean() - d1s[tail].mean(), d2s[before].mean() - d2s[tail].mean())
    ok = (d1e[0] <= 1e-6 and abs(t_max - 50) <= 10 and abs(t_field - 50) <= 10
          and p1[-1] < p1[0] - 0.1 and p2[-1] < p2[0] - 0.1 and site_drop > 0.1)
    verdict(request, 10, ok,
            f"dP1(energy) {d1e[0]:.1e} -> max {d1e.max():.3f} at {t_max:.1f} fs (field peak {t_field:.1f} fs); "
            f"P1 {p1[0]:.3f} -> {p1[-1]:.3f}, P2 {p2[0]:.3f} -> {p2[-1]:.3f}; "
            f"dP1(site) {d1s[before].mean():.3f} -> {d1s[tail].mean():.3f}, "
            f"dP2(site) {d2s[before].mean():.3f} -> {d2s[tail].mean():.3f}")


@pytest.mark.slow
def test_criterion_11_conservation(request):
    parts = []
    ok = True
    for kind in ("fig1a", "fig1b"):
        result = run(kind)[0]
        drift = np.abs(result.energy.mean(axis=0) - result.energy.mean(axis=0)[0]).max()
        norm = np.abs(result.norm - 1).max()
        ok &= drift <= 1e-3 and norm <= 1e-8
        parts.append(f"{kind}: mean energy drift {drift:.1e} eV, max norm drift {norm:.1e}")
    verdict(request, 11, ok, "; ".join(parts) + " (tol 1e-3 eV, 1e-8)")
