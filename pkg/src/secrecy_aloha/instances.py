"""Random two-user parameter sets drawn inside one region geometry.

Used by the acceptance suite and the experiment scripts. Each sampler
returns a ``SystemParams`` whose case label is the requested one; the
normalized arrivals are drawn first and mapped back through ``1 - p_f``.
"""

from __future__ import annotations

import numpy as np

from .regions import CaseLabel, SystemParams, classify_case, joint_region_nonempty

# keeps draws away from the case boundaries so the label is not decided by rounding
_GAP = 1e-3


def _params(lam_norm, rho, pf, tx_prob=(0.5, 0.5)) -> SystemParams:
    pf = np.asarray(pf, dtype=float)
    lam_norm = np.asarray(lam_norm, dtype=float)
    return SystemParams(lam_norm * (1.0 - pf), np.asarray(tx_prob, float), pf, np.asarray(rho, float))


def _case1(rng):
    s1 = rng.uniform(0.05, 0.9)
    s2 = rng.uniform(0.05, 1.0 - s1)
    rho = np.array([s1, s2]) ** 2
    lam = rho * rng.uniform(0.0, 0.9, size=2)
    return lam, rho


def _case2(rng):
    while True:
        s = rng.uniform(0.0, 1.0, size=2)
        if s.sum() > 1.0 + _GAP:
            break
    l2 = rng.uniform(0.0, 1.0 - _GAP) * (1.0 - s[0])
    l1 = rng.uniform(0.0, 1.0 - _GAP) * (1.0 - s[1])
    return np.array([l1, l2]) ** 2, s**2


def _case3(rng):
    while True:
        l = rng.uniform(0.0, 1.0, size=2)
        if l.sum() < 1.0 - _GAP:
            break
    s1 = rng.uniform(1.0 - l[1] + _GAP, 1.0)
    s2 = rng.uniform(1.0 - l[0] + _GAP, 1.0)
    return l**2, np.array([s1, s2]) ** 2


_SAMPLERS = {CaseLabel.CASE1: _case1, CaseLabel.CASE2: _case2, CaseLabel.CASE3: _case3}


def random_case_instance(case: CaseLabel, rng: np.random.Generator, max_fail_prob: float = 0.5) -> SystemParams:
    """One feasible parameter set labelled ``case``, with random fading failures."""
    sampler = _SAMPLERS[CaseLabel(case)]
    while True:
        lam, rho = sampler(rng)
        pf = rng.uniform(0.0, max_fail_prob, size=2)
        if joint_region_nonempty(lam, rho) and classify_case(lam, rho) is CaseLabel(case):
            return _params(lam, rho, pf)
