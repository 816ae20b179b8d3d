"""
A local measurement reshapes every bond
========================================

A unitary gate on sites l, l+1 only changes the Schmidt values of bond l.
A non-unitary map does not have that locality.  Here a GHZ state on six
qubits is measured on one qubit and the Schmidt values of *every* bond move.
"""

import numpy as np

from noisympo import entropy_profile, from_dense, kraus_channel, trace
from noisympo.update import apply_two_site

n = 6
psi = np.zeros(2**n)
psi[0] = psi[-1] = 1 / np.sqrt(2)
rho = np.outer(psi, psi)

# The vectorized GHZ state has four equal Schmidt values at every cut,
# which is twice the pure-state entropy of one bit.
mpo = from_dense(rho)
print("GHZ bond entropies:", entropy_profile(mpo).round(3))

###############################################################################
# Keep only the outcome 0 of a computational-basis measurement of qubit 3.
# The channel acts on sites 3 and 4 as |0><0| ⊗ I.

project = kraus_channel([np.kron(np.diag([1.0, 0.0]), np.eye(2))])
apply_two_site(mpo, project, 3)
print("after outcome 0:   ", entropy_profile(mpo).round(3), " bond dims", mpo.bond_dims)
print("probability of that outcome:", round(trace(mpo), 6))

###############################################################################
# Averaging over both outcomes is trace preserving.  The coherence between
# |000000> and |111111> is gone, and each bond drops to two Schmidt values.

mpo = from_dense(rho)
dephase = kraus_channel([np.kron(np.diag([1.0, 0.0]), np.eye(2)), np.kron(np.diag([0.0, 1.0]), np.eye(2))])
apply_two_site(mpo, dephase, 3)
print("after dephasing:   ", entropy_profile(mpo).round(3), " bond dims", mpo.bond_dims)
