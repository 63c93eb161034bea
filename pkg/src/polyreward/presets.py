"""Ready-made desk-scale game instances.

Two six-trace, three-answer games sized so every study in the package
runs in seconds:

* ``euclid_toy`` - the diversity game with the collision penalty and a
  skewed reference policy; its equilibrium is interior and the
  falling-factorial reward makes the dynamics exactly unbiased.
* ``kl_toy`` - the consensus game with the reference marginal balanced
  exactly across answers.  The symmetric point is the equilibrium, and
  escaping it is driven by estimator noise and bias, which makes the
  quality ordering of reward tables directly visible in the l1 error.
"""

from __future__ import annotations

import numpy as np

from .game import GameSpec

_TRACES = ("y1", "y2", "y3", "y4", "y5", "y6")
_ANSWERS = ("a", "b", "c")
_PARSER = {"y1": "a", "y2": "a", "y3": "b", "y4": "b", "y5": "c", "y6": "c"}


def euclid_toy(K: int = 16, beta: float = 1.0) -> GameSpec:
    return GameSpec(
        traces=_TRACES,
        answers=_ANSWERS,
        parser=dict(_PARSER),
        ref_policy=np.array([0.34, 0.26, 0.16, 0.10, 0.08, 0.06]),
        beta=beta,
        geometry="euclid",
        alignment="diversity_collision",
        K=K,
    )


def kl_toy(K: int = 16, beta: float = 1.0) -> GameSpec:
    third = 1.0 / 3.0
    pi0 = np.array(
        [0.25, third - 0.25, 0.20, third - 0.20, 0.30, third - 0.30]
    )
    return GameSpec(
        traces=_TRACES,
        answers=_ANSWERS,
        parser=dict(_PARSER),
        ref_policy=pi0 / pi0.sum(),
        beta=beta,
        geometry="kl",
        alignment="coherence_empirical",
        K=K,
    )


PRESETS = {"euclid-toy": euclid_toy, "kl-toy": kl_toy}
