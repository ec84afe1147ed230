"""
Basis dependence of distilled purity
====================================

The reduced purities P1 and P2 do not care which orbitals describe the
state. Their distilled parts do.
"""

import numpy as np

from fermidecoh.density import DeterminantBasis, from_pure
from fermidecoh.fock import enumerate_determinants
from fermidecoh.purity import purity_report
from fermidecoh.validation import random_unitary

rng = np.random.default_rng(0)
basis = DeterminantBasis(tuple(enumerate_determinants(6, 3)))  # closed under rotations
rho = from_pure(basis, np.eye(len(basis))[0])

print(purity_report(rho))

# rotate the orbitals a little at a time, towards a random unitary
target = random_unitary(rng, 6)
lam, vec = np.linalg.eig(target)
for s in np.linspace(0, 1, 6):
    U = vec @ np.diag(lam**s) @ np.linalg.inv(vec)
    rep = purity_report(rho, U)
    print(f"s = {s:.1f}  P1 = {rep.P1:.6f}  P2 = {rep.P2:.6f}  dP1 = {rep.dP1:.4f}  dP2 = {rep.dP2:.4f}")

# the tight bound depends on populations in the rotated basis
print(rep.bounds)
