"""
Distilled purity on small determinant sets
==========================================

Build a few states by hand and see which coherences each purity picks up.
"""

import numpy as np

from fermidecoh.density import DeterminantBasis, ManyBodyDensityMatrix, from_pure
from fermidecoh.fock import SlaterDeterminant, transition_descriptor
from fermidecoh.purity import purity_report
from fermidecoh.rdm import one_rdm_oracle

det = SlaterDeterminant.from_orbitals

# two electrons in four spin-orbitals
phi = [det(4, [0, 1]), det(4, [2, 3]), det(4, [0, 3]), det(4, [1, 2])]
basis = DeterminantBasis(tuple(phi))

# which transition links each pair, and with what sign
for a in range(4):
    for b in range(a + 1, 4):
        d = transition_descriptor(phi[a], phi[b])
        print(a, b, "order 2" if d is None else f"order {d.order}, phase {d.phase:+d}")

# a single determinant is idempotent: no distilled purity at all
print(purity_report(from_pure(basis, [1, 0, 0, 0])))

# an equal superposition of two determinants one hop apart
psi = np.array([1, 0, 1, 0]) / np.sqrt(2)
rep = purity_report(from_pure(basis, psi))
print(f"dP1 = {rep.dP1:.3f}, dP2 = {rep.dP2:.3f}")  # 0.5 and 0.5 for N = 2

# the 1-RDM carries the coherence as an off-diagonal element
print(np.round(one_rdm_oracle(from_pure(basis, psi)).g.real, 3))

# the same pair as an incoherent mixture: nothing distilled survives
mix = ManyBodyDensityMatrix(basis, np.diag([0.5, 0, 0.5, 0]))
print(f"mixture dP1 = {purity_report(mix).dP1:.3f}")

# a double excitation is invisible to the 1-RDM but not the 2-RDM
psi = np.array([1, 1, 0, 0]) / np.sqrt(2)
rep = purity_report(from_pure(basis, psi))
print(f"order-2 pair: dP1 = {rep.dP1:.3f}, dP2 = {rep.dP2:.3f}")

# interference between two pairs sharing the same hop
a = np.diag([0.25] * 4).astype(complex)
for sign in (+1, -1):
    a[0, 2] = a[2, 0] = 0.2
    a[1, 3] = a[3, 1] = 0.2 * sign
    print(f"relative sign {sign:+d}: dP1 = {purity_report(ManyBodyDensityMatrix(basis, a)).dP1:.3f}")
