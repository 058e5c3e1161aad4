"""Throughput-optimal transmission probabilities for two-user dominant ALOHA.

The closed-form optimizer enumerates the candidate corners of each region
geometry; ``grid_search_oracle`` checks it by brute force.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyFeasibleSet, InfeasibleRegion
from .regions import (
    CaseLabel,
    SystemParams,
    classify_case,
    dominant_success_prob,
    joint_region_nonempty,
)

# Candidates sit exactly on active constraints; rounding may leave them a few
# ulps on the wrong side.
FEASIBILITY_TOL = 1e-12
TIE_TOL = 1e-12
INTERIOR_STEP = 1e-6
DEFAULT_RESOLUTION = 2000


@dataclass
class OptimResult:
    q_opt: np.ndarray
    throughput: float
    case_label: CaseLabel
    active_constraints: list = field(default_factory=list)
    is_supremum_on_open_boundary: bool = False
    candidates_evaluated: list = field(default_factory=list)
    q_interior: Optional[np.ndarray] = None
    method: str = "closed_form"

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "q_opt": self.q_opt.tolist(),
            "throughput": self.throughput,
            "case_label": self.case_label.value,
            "active_constraints": list(self.active_constraints),
            "is_supremum_on_open_boundary": self.is_supremum_on_open_boundary,
            "q_interior": None if self.q_interior is None else self.q_interior.tolist(),
            "candidates_evaluated": [
                {"q": list(map(float, q)), "throughput": s} for q, s in self.candidates_evaluated
            ],
        }


def throughput_dominant(params: SystemParams) -> float:
    """Expected successful packets per slot with every queue backlogged."""
    return float(np.sum(dominant_success_prob(params)))


def _occupancy_pair(q1, q2):
    return q1 * (1.0 - q2), q2 * (1.0 - q1)


def constraint_margins(params: SystemParams, q: Sequence[float]) -> dict:
    """Signed slack of the four N=2 constraints at ``q`` (positive = satisfied)."""
    x, y = _occupancy_pair(q[0], q[1])
    lam = params.arrival_norm
    return {
        "secrecy1": params.rho[0] - x,
        "secrecy2": params.rho[1] - y,
        "stability1": x - lam[0],
        "stability2": y - lam[1],
    }


def _case1_candidates(rho):
    # Both secrecy constraints active: q1(1-q2) = rho1 and q2(1-q1) = rho2
    # give q1^2 - (1 + rho1 - rho2) q1 + rho1 = 0, and the two roots r_lo,
    # r_hi satisfy q2 = 1 - rho1/q1, i.e. pairs (r_lo, 1-r_hi), (r_hi, 1-r_lo).
    r1, r2 = rho
    b = 1.0 + r1 - r2
    disc = max(b * b - 4.0 * r1, 0.0)
    r_hi = 0.5 * (b + np.sqrt(disc))
    r_lo = r1 / r_hi if r_hi > 0 else 0.0
    return [((r_lo, 1.0 - r_hi), ("secrecy1", "secrecy2")), ((r_hi, 1.0 - r_lo), ("secrecy1", "secrecy2"))]


def _case2_candidates(lam, rho):
    s1, s2 = np.sqrt(rho)
    out = []
    if s1 + np.sqrt(lam[1]) < 1.0:
        out.append(((s1, 1.0 - s1), ("secrecy1",)))
    if s2 + np.sqrt(lam[0]) < 1.0:
        out.append(((1.0 - s2, s2), ("secrecy2",)))
    return out


def _case3_candidates(lam):
    l1, l2 = np.sqrt(lam)
    return [((l1, 1.0 - l1), ("stability1",)), ((1.0 - l2, l2), ("stability2",))]


def _interior_point(params: SystemParams, q, active) -> np.ndarray:
    """Shift ``q`` by INTERIOR_STEP along the gradient of its tight stability constraint."""
    q = np.asarray(q, dtype=float)
    if "stability1" in active:
        grad = np.array([1.0 - q[1], -q[0]])
    else:
        grad = np.array([-q[1], 1.0 - q[0]])
    norm = np.linalg.norm(grad)
    if norm == 0:
        return q.copy()
    return np.clip(q + INTERIOR_STEP * grad / norm, 0.0, 1.0)


def _pick_best(candidates):
    """Highest throughput; near-ties go to the lexicographically smallest q."""
    best = None
    for q, s, meta in candidates:
        if best is None or s > best[1] + TIE_TOL:
            best = (q, s, meta)
        elif abs(s - best[1]) <= TIE_TOL and tuple(q) < tuple(best[0]):
            best = (q, s, meta)
    return best


def optimize_dominant_n2(params: SystemParams, oracle_resolution: int = DEFAULT_RESOLUTION) -> OptimResult:
    """Maximize dominant-system throughput subject to secrecy and stability.

    Mixed geometries, which none of the three closed-form cases cover, are
    delegated to ``grid_search_oracle``.
    """
    if params.n_users != 2:
        raise ValueError("closed-form optimization is implemented for two users only")
    lam, rho = params.arrival_norm, params.rho
    if not joint_region_nonempty(lam, rho):
        raise InfeasibleRegion(f"no secrecy-stability region for lam'={lam.tolist()}, rho={rho.tolist()}")
    label = classify_case(lam, rho)
    if label is CaseLabel.MIXED:
        return grid_search_oracle(params, oracle_resolution)

    if label is CaseLabel.CASE1:
        raw = _case1_candidates(rho)
    elif label is CaseLabel.CASE2:
        raw = _case2_candidates(lam, rho)
    else:
        raw = _case3_candidates(lam)
    supremum = label is CaseLabel.CASE3

    evaluated = []
    admissible = []
    for q, active in raw:
        q = np.clip(np.array(q, dtype=float), 0.0, 1.0)
        s = throughput_dominant(params.with_tx_prob(q))
        evaluated.append((tuple(q), s))
        m = constraint_margins(params, q)
        secure = m["secrecy1"] >= -FEASIBILITY_TOL and m["secrecy2"] >= -FEASIBILITY_TOL
        if supremum:
            # Tight stability constraints are open; only the others must hold strictly.
            stable = all(m[c] > 0 for c in ("stability1", "stability2") if c not in active)
        else:
            stable = m["stability1"] > 0 and m["stability2"] > 0
        if secure and stable:
            admissible.append((q, s, active))
    if not admissible:
        return grid_search_oracle(params, oracle_resolution)

    q_best, s_best, active = _pick_best(admissible)
    return OptimResult(
        q_opt=q_best,
        throughput=s_best,
        case_label=label,
        active_constraints=list(active),
        is_supremum_on_open_boundary=supremum,
        candidates_evaluated=evaluated,
        q_interior=_interior_point(params, q_best, active) if supremum else None,
    )


def grid_search_oracle(params: SystemParams, resolution: int = DEFAULT_RESOLUTION) -> OptimResult:
    """Brute-force maximum over the uniform ``(resolution+1)^2`` grid on [0, 1]^2.

    Only grid points meeting both secrecy constraints (non-strict) and both
    stability constraints (strict) are eligible.
    """
    if params.n_users != 2:
        raise ValueError("the grid oracle is implemented for two users only")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    lam, rho = params.arrival_norm, params.rho
    w1, w2 = 1.0 - params.fail_prob
    axis = np.linspace(0.0, 1.0, resolution + 1)
    one_minus = 1.0 - axis
    best_s, best_q = -np.inf, None
    rows = max(1, (1 << 20) // axis.size)
    for start in range(0, axis.size, rows):
        q1 = axis[start : start + rows, None]
        x = q1 * one_minus[None, :]
        y = axis[None, :] * (1.0 - q1)
        ok = (x <= rho[0]) & (y <= rho[1]) & (x > lam[0]) & (y > lam[1])
        if not ok.any():
            continue
        s = np.where(ok, w1 * x + w2 * y, -np.inf)
        k = int(np.argmax(s))
        a, b = divmod(k, axis.size)
        if s[a, b] > best_s:
            best_s = float(s[a, b])
            best_q = np.array([axis[start + a], axis[b]])
    if best_q is None:
        raise EmptyFeasibleSet(f"no feasible point on a {resolution + 1}-point grid")

    margins = constraint_margins(params, best_q)
    slack = 2.0 / resolution
    active = [name for name, m in margins.items() if m <= slack]
    try:
        label = classify_case(lam, rho)
    except Exception:
        label = CaseLabel.NOT_APPLICABLE
    return OptimResult(
        q_opt=best_q,
        throughput=best_s,
        case_label=label,
        active_constraints=active,
        candidates_evaluated=[(tuple(best_q), best_s)],
        method="grid",
    )


def original_throughput(arrival: Sequence[float]) -> float:
    """Long-run throughput of a stable, secure original system: the total arrival rate."""
    return float(np.sum(np.asarray(arrival, dtype=float)))
