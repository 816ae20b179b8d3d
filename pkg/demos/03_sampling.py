"""
Sampling bitstrings from a noisy circuit
========================================

Output probabilities are single contractions of the chain.  Sampling draws
one qubit at a time from its conditional distribution, reusing cached
right environments.  For four qubits both can be checked against the
exhaustive table.
"""

import itertools

import numpy as np

from noisympo import CircuitConfig, all_probabilities, run_realization, sample

cfg = CircuitConfig(n=4, depth_max=6, p=0.1, chi=16, master_seed=3)
state = run_realization(cfg, 0, keep_state=True).final_state

probs = all_probabilities(state)
shots = sample(state, np.random.default_rng(0), size=20_000)
counts = np.bincount(shots @ np.array([8, 4, 2, 1]), minlength=16)

print(" x     exact   sampled")
for k, bits in enumerate(itertools.product("01", repeat=4)):
    print(f"{''.join(bits)}  {probs[k]:.4f}  {counts[k] / len(shots):.4f}")
print("sum of probabilities (the trace):", round(probs.sum(), 12))
