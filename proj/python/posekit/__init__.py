"""Desk-scale single-stage multi-person pose estimation.

Thin wrappers over the C++ core: OKS, greedy suppression, the AP evaluator,
the synthetic scene generator, toy training/inference, and the
finite-difference gradient audit.
"""

from ._core import (
    __version__,
    config_hash,
    default_sigmas,
    detect,
    greedy_nms,
    oks,
    oks_ap,
    parse_config,
    refinement_gain,
    run_gradient_suite,
    synth_scenes,
    train,
)

__all__ = [
    "__version__",
    "config_hash",
    "default_sigmas",
    "detect",
    "greedy_nms",
    "oks",
    "oks_ap",
    "parse_config",
    "refinement_gain",
    "run_gradient_suite",
    "synth_scenes",
    "train",
]
