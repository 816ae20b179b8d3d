"""Matrix-product-operator simulation of noisy one-dimensional random circuits."""

from noisympo.channels import (
    TwoQubitChannel,
    compose,
    depolarize2,
    identity_channel,
    kraus_channel,
    unitary_channel,
)
from noisympo.circuit import (
    CircuitConfig,
    EnsembleResult,
    HeuristicFit,
    Trajectory,
    brickwork_gates,
    fit_heuristic,
    page_entropy,
    run_ensemble,
    run_realization,
)
from noisympo.linalg import SvdError, haar_unitary, svd
from noisympo.mpo import (
    Mpo,
    all_probabilities,
    canonical_defect,
    entropy_profile,
    from_dense,
    load_mpo,
    max_mpo_entropy,
    mpo_entanglement_entropy,
    probability,
    product_zero_state,
    sample,
    save_mpo,
    trace,
)
from noisympo.update import UpdateStats, apply_two_site, apply_two_site_fast

__all__ = [
    "CircuitConfig",
    "EnsembleResult",
    "HeuristicFit",
    "Mpo",
    "SvdError",
    "Trajectory",
    "TwoQubitChannel",
    "UpdateStats",
    "all_probabilities",
    "apply_two_site",
    "apply_two_site_fast",
    "brickwork_gates",
    "canonical_defect",
    "compose",
    "depolarize2",
    "entropy_profile",
    "fit_heuristic",
    "from_dense",
    "haar_unitary",
    "identity_channel",
    "kraus_channel",
    "load_mpo",
    "max_mpo_entropy",
    "mpo_entanglement_entropy",
    "page_entropy",
    "probability",
    "product_zero_state",
    "run_ensemble",
    "run_realization",
    "sample",
    "save_mpo",
    "svd",
    "trace",
    "unitary_channel",
]
