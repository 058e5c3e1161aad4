"""Stability and secrecy conditions for finite-user slotted ALOHA.

Conventions used throughout:

* ``lam_norm`` is the fading-normalized arrival rate ``lam / (1 - p_f)``.
* Stability conditions are strict (``<``), secrecy conditions are not
  (``<=``). Margins are signed slacks; a boundary point has margin 0 and
  follows the inequality as written.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import NoRealRoot, NotApplicable


@dataclass
class SystemParams:
    """Arrival rates, transmission and fading-failure probabilities, secrecy ratios."""

    arrival: np.ndarray
    tx_prob: np.ndarray
    fail_prob: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None

    def __post_init__(self):
        self.arrival = np.asarray(self.arrival, dtype=float)
        self.tx_prob = np.asarray(self.tx_prob, dtype=float)
        n = self.arrival.shape[0] if self.arrival.ndim == 1 else -1
        if n < 2:
            raise ValueError("need a 1-D arrival vector with at least 2 users")
        if self.fail_prob is None:
            self.fail_prob = np.zeros(n)
        if self.rho is None:
            self.rho = np.ones(n)
        self.fail_prob = np.asarray(self.fail_prob, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        for name in ("tx_prob", "fail_prob", "rho"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have length {n}")
        _check_range("arrival", self.arrival, 0.0, 1.0)
        _check_range("tx_prob", self.tx_prob, 0.0, 1.0)
        _check_range("rho", self.rho, 0.0, 1.0)
        if np.any(self.fail_prob < 0) or np.any(self.fail_prob >= 1):
            raise ValueError("fail_prob entries must lie in [0, 1)")
        _check_range("normalized arrival", self.arrival_norm, 0.0, 1.0)

    @property
    def n_users(self) -> int:
        return self.arrival.shape[0]

    @property
    def arrival_norm(self) -> np.ndarray:
        return self.arrival / (1.0 - self.fail_prob)

    def with_tx_prob(self, tx_prob) -> "SystemParams":
        return replace(self, tx_prob=np.asarray(tx_prob, dtype=float))

    def swapped(self) -> "SystemParams":
        """Same system with the user order reversed."""
        return SystemParams(
            self.arrival[::-1].copy(),
            self.tx_prob[::-1].copy(),
            self.fail_prob[::-1].copy(),
            self.rho[::-1].copy(),
        )


def _check_range(name, x, lo, hi):
    if not np.all(np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
        raise ValueError(f"{name} entries must lie in [{lo}, {hi}], got {x}")


class CaseLabel(str, Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    MIXED = "Mixed"
    NOT_APPLICABLE = "NotApplicable"


@dataclass
class RegionReport:
    """Per-user verdicts and margins. Fields an operation does not compute stay ``None``."""

    stable: Optional[np.ndarray] = None
    secure: Optional[np.ndarray] = None
    stability_margin: Optional[np.ndarray] = None
    secrecy_margin: Optional[np.ndarray] = None
    joint_nonempty: Optional[bool] = None
    case_label: CaseLabel = CaseLabel.NOT_APPLICABLE

    def to_dict(self) -> dict:
        def lst(x):
            return None if x is None else np.asarray(x).tolist()

        out = {
            "stable": lst(self.stable),
            "secure": lst(self.secure),
            "stability_margin": lst(self.stability_margin),
            "secrecy_margin": lst(self.secrecy_margin),
        }
        out = {k: v for k, v in out.items() if v is not None}
        if self.joint_nonempty is not None:
            out["joint_nonempty"] = self.joint_nonempty
            out["case_label"] = self.case_label.value
        return out


def prod_others(x: np.ndarray) -> np.ndarray:
    """``out[..., i] = prod_{j != i} x[..., j]`` without dividing by ``x[..., i]``."""
    x = np.asarray(x, dtype=float)
    ones = np.ones_like(x[..., :1])
    left = np.cumprod(np.concatenate([ones, x[..., :-1]], axis=-1), axis=-1)
    right = np.cumprod(np.concatenate([ones, x[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return left * right


def clean_slot_prob(tx_prob: np.ndarray) -> np.ndarray:
    """Probability that user i transmits and nobody else does, all queues backlogged."""
    q = np.asarray(tx_prob, dtype=float)
    return q * prod_others(1.0 - q)


def dominant_success_prob(params: SystemParams) -> np.ndarray:
    return (1.0 - params.fail_prob) * clean_slot_prob(params.tx_prob)


def is_stable_dominant(params: SystemParams) -> RegionReport:
    margin = clean_slot_prob(params.tx_prob) - params.arrival_norm
    return RegionReport(stable=margin > 0, stability_margin=margin)


def is_secure_dominant(params: SystemParams) -> RegionReport:
    margin = params.rho - clean_slot_prob(params.tx_prob)
    return RegionReport(secure=margin >= 0, secrecy_margin=margin)


def max_secure_tx_prob(params: SystemParams, i: int) -> float:
    """Largest q_i that keeps user i secure in the dominant system, others fixed."""
    others = np.prod(np.delete(1.0 - params.tx_prob, i))
    if others == 0:
        return 1.0
    return float(min(1.0, params.rho[i] / others))


# -- existence of a stability region ----------------------------------------

_EXISTENCE_GRID = np.linspace(0.0, 1.0, 129)[1:]
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def _existence_objective(x: np.ndarray, lam_norm: np.ndarray) -> np.ndarray:
    # x: (M, K), lam_norm: (M, N)
    n = lam_norm.shape[-1]
    return x ** (n - 1) - np.prod(x[..., None] + lam_norm[:, None, :], axis=-1)


def existence_max_numeric(lam_norm: np.ndarray, iterations: int = 80) -> tuple[np.ndarray, np.ndarray]:
    """Maximize ``x**(N-1) - prod(x + lam_norm_i)`` over ``x`` in (0, 1].

    Works on a batch: ``lam_norm`` has shape (M, N) or (N,). A 128-point grid
    locates the best cell, then golden-section search refines inside the two
    neighbouring cells. Returns ``(argmax, max)`` arrays of shape (M,).
    """
    lam = np.atleast_2d(np.asarray(lam_norm, dtype=float))
    m = lam.shape[0]
    grid = np.broadcast_to(_EXISTENCE_GRID, (m, _EXISTENCE_GRID.size))
    f_grid = _existence_objective(grid, lam)
    k = np.argmax(f_grid, axis=1)
    step = _EXISTENCE_GRID[1] - _EXISTENCE_GRID[0]
    a = np.maximum(_EXISTENCE_GRID[k] - step, 1e-300)
    b = np.minimum(_EXISTENCE_GRID[k] + step, 1.0)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = _existence_objective(c[:, None], lam)[:, 0]
    fd = _existence_objective(d[:, None], lam)[:, 0]
    for _ in range(iterations):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        d_new = np.where(left, c, a + _INV_PHI * (b - a))
        c_new = np.where(left, b - _INV_PHI * (b - a), d)
        f_new = _existence_objective(np.where(left, c_new, d_new)[:, None], lam)[:, 0]
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_new, d_new
    x_ref = np.where(fc > fd, c, d)
    f_ref = np.maximum(fc, fd)
    f_best_grid = f_grid[np.arange(m), k]
    use_grid = f_best_grid > f_ref
    return np.where(use_grid, _EXISTENCE_GRID[k], x_ref), np.where(use_grid, f_best_grid, f_ref)


def stability_region_nonempty(arrival_norm: Sequence[float], method: str = "auto") -> bool:
    """Whether some transmission-probability vector stabilizes the dominant system.

    ``method="closed_form"`` (N=2 only) tests ``sqrt(l1) + sqrt(l2) < 1``;
    ``"numeric"`` checks that ``x**(N-1) - prod(x + l_i)`` is positive for some
    ``x`` in (0, 1]. ``"auto"`` uses the closed form when N=2.
    """
    lam = np.asarray(arrival_norm, dtype=float)
    if method == "auto":
        method = "closed_form" if lam.size == 2 else "numeric"
    if method == "closed_form":
        if lam.size != 2:
            raise ValueError("closed form exists only for N=2")
        return bool(np.sqrt(lam[0]) + np.sqrt(lam[1]) < 1.0)
    if method == "numeric":
        return bool(existence_max_numeric(lam)[1][0] > 0)
    raise ValueError(f"unknown method {method!r}")


def joint_region_nonempty(arrival_norm: Sequence[float], rho: Sequence[float]) -> bool:
    lam = np.asarray(arrival_norm, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return bool(np.all(lam < rho)) and stability_region_nonempty(lam)


def classify_case(arrival_norm: Sequence[float], rho: Sequence[float]) -> CaseLabel:
    """Geometry of the N=2 dominant secrecy-stability region.

    Raises ``NotApplicable`` unless N=2 and the joint region is non-empty.
    Configurations matching none of the three textbook cases are ``MIXED``.
    """
    lam = np.asarray(arrival_norm, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if lam.size != 2 or rho.size != 2:
        raise NotApplicable("case classification needs exactly two users")
    if not joint_region_nonempty(lam, rho):
        raise NotApplicable("joint secrecy-stability region is empty")
    sr1, sr2 = np.sqrt(rho)
    sl1, sl2 = np.sqrt(lam)
    if sr1 + sr2 <= 1.0:
        return CaseLabel.CASE1
    if sr1 + sl2 < 1.0 and sr2 + sl1 < 1.0:
        return CaseLabel.CASE2
    if sr1 + sl2 > 1.0 and sr2 + sl1 > 1.0:
        return CaseLabel.CASE3
    return CaseLabel.MIXED


def region_report(params: SystemParams) -> RegionReport:
    """Dominant-system verdicts plus joint-region and case information."""
    stab = is_stable_dominant(params)
    sec = is_secure_dominant(params)
    lam, rho = params.arrival_norm, params.rho
    try:
        label = classify_case(lam, rho)
    except NotApplicable:
        label = CaseLabel.NOT_APPLICABLE
    return RegionReport(
        stable=stab.stable,
        secure=sec.secure,
        stability_margin=stab.stability_margin,
        secrecy_margin=sec.secrecy_margin,
        joint_nonempty=joint_region_nonempty(lam, rho),
        case_label=label,
    )


# -- original system ----------------------------------------------------------

@dataclass
class EmptyProbs:
    p_e: np.ndarray
    converged: bool
    iterations: int
    residual: float


def occupancy_given_busy(tx_prob: np.ndarray, p_e: np.ndarray) -> np.ndarray:
    """``q_i * prod_{j!=i} ((1-p_e,j)(1-q_j) + p_e,j)``: clean-slot chance of a backlogged user."""
    q = np.asarray(tx_prob, dtype=float)
    p = np.asarray(p_e, dtype=float)
    return q * prod_others((1.0 - p) * (1.0 - q) + p)


def service_rates(params: SystemParams, p_e: np.ndarray) -> np.ndarray:
    return (1.0 - params.fail_prob) * occupancy_given_busy(params.tx_prob, p_e)


def _empty_prob_map(lam, q, pf, p):
    mu = (1.0 - pf) * occupancy_given_busy(q, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 1.0 - lam / mu
    g = np.where(lam == 0, 1.0, np.where(mu > 0, g, 0.0))
    return np.clip(g, 0.0, 1.0)


def solve_empty_probs_batch(
    arrival: np.ndarray,
    tx_prob: np.ndarray,
    fail_prob: np.ndarray,
    tolerance: float = 1e-10,
    max_iter: int = 100_000,
    damping: float = 0.5,
):
    """Damped fixed-point iteration for empty-queue probabilities, broadcast over leading axes.

    Returns ``(p_e, converged, iterations, residual)``; the last three are per
    batch element.
    """
    lam, q, pf = np.broadcast_arrays(
        np.asarray(arrival, float), np.asarray(tx_prob, float), np.asarray(fail_prob, float)
    )
    p = np.zeros(q.shape)
    batch = q.shape[:-1]
    converged = np.zeros(batch, dtype=bool)
    iterations = np.zeros(batch, dtype=np.int64)
    residual = np.full(batch, np.inf)
    active = np.ones(batch, dtype=bool)
    for it in range(max_iter + 1):
        g = _empty_prob_map(lam, q, pf, p)
        res = np.max(np.abs(g - p), axis=-1)
        newly = active & (res < tolerance)
        converged |= newly
        residual = np.where(active, res, residual)
        iterations = np.where(active, it, iterations)
        active &= ~newly
        if not active.any() or it == max_iter:
            break
        step = (1.0 - damping) * p + damping * g
        p = np.where(active[..., None], step, p)
    return p, converged, iterations, residual


def solve_empty_probs(
    params: SystemParams,
    tolerance: float = 1e-10,
    max_iter: int = 100_000,
    damping: float = 0.5,
) -> EmptyProbs:
    """Empty-queue probabilities from ``p_e,i = 1 - lam_i / mu_i(p_e)``.

    Starts from all-backlogged queues (``p_e = 0``) and clamps every iterate
    to [0, 1]. If ``max_iter`` is exhausted the last iterate is returned with
    ``converged=False``.
    """
    p, conv, its, res = solve_empty_probs_batch(
        params.arrival, params.tx_prob, params.fail_prob, tolerance, max_iter, damping
    )
    out = EmptyProbs(p_e=p, converged=bool(conv), iterations=int(its), residual=float(res))
    if not out.converged:
        warnings.warn(
            f"empty-queue fixed point did not converge in {max_iter} iterations "
            f"(residual {out.residual:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return out


def original_secrecy_ok(params: SystemParams, p_e: np.ndarray) -> RegionReport:
    margin = params.rho - occupancy_given_busy(params.tx_prob, p_e)
    return RegionReport(secure=margin >= 0, secrecy_margin=margin)


def original_stability_ok(params: SystemParams, p_e: np.ndarray) -> RegionReport:
    margin = occupancy_given_busy(params.tx_prob, p_e) - params.arrival_norm
    return RegionReport(stable=margin > 0, stability_margin=margin)


@dataclass
class SecrecyThresholds:
    """Corner points of the N=2 original-system secrecy region.

    ``q1_star``/``q2_2star`` bound user 1's secrecy; ``q2_star``/``q1_2star``
    are the same quantities with the users swapped.
    """

    q1_star: float
    q2_2star: float
    q2_star: float
    q1_2star: float

    def to_dict(self) -> dict:
        return {
            "q1_star": self.q1_star,
            "q2_2star": self.q2_2star,
            "q2_star": self.q2_star,
            "q1_2star": self.q1_2star,
        }


def secrecy_threshold_quadratic(q: float, lam_own: float, lam_other: float, rho_own: float) -> float:
    """``lam_own*q^2 + rho_own*(lam_other - 1 - lam_own)*q + rho_own^2``."""
    return lam_own * q * q + rho_own * (lam_other - 1.0 - lam_own) * q + rho_own * rho_own


def _threshold_pair(lam_own: float, lam_other: float, rho_own: float) -> tuple[float, float]:
    if lam_own <= 0:
        raise ValueError("secrecy thresholds need a positive normalized arrival rate")
    b = 1.0 + lam_own - lam_other
    disc = b * b - 4.0 * lam_own
    if disc < 0:
        raise NoRealRoot(
            f"discriminant {disc:.3g} < 0 for lam'=({lam_own}, {lam_other})"
        )
    # Smaller root of lam*q^2 - rho*b*q + rho^2 in cancellation-free form.
    q_star = 2.0 * rho_own / (b + np.sqrt(disc))
    q_other = lam_other * rho_own / (rho_own - q_star * lam_own)
    return float(q_star), float(q_other)


def original_secrecy_thresholds_n2(
    arrival_norm: Sequence[float], rho: Sequence[float]
) -> SecrecyThresholds:
    lam = np.asarray(arrival_norm, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if lam.size != 2 or rho.size != 2:
        raise ValueError("thresholds are defined for two users only")
    q1s, q2ss = _threshold_pair(lam[0], lam[1], rho[0])
    q2s, q1ss = _threshold_pair(lam[1], lam[0], rho[1])
    return SecrecyThresholds(q1_star=q1s, q2_2star=q2ss, q2_star=q2s, q1_2star=q1ss)


def empty_prob_chain_n2(q1: float, q2: float, lam_norm: Sequence[float], rho1: float) -> float:
    """User 2's empty probability when user 1 sits on its secrecy boundary.

    User 1 busy with probability ``lam1'/rho1`` (its service rate equals
    ``rho1`` there), and Little's law then fixes user 2's empty probability.
    """
    l1, l2 = lam_norm
    busy1 = l1 / rho1
    return 1.0 - l2 / (q2 * (busy1 * (1.0 - q1) + 1.0 - busy1))


# -- boundary tracing ---------------------------------------------------------

BOUNDARY_KINDS = ("stability-dominant", "secrecy-dominant", "stability-original", "secrecy-original")


@dataclass
class Polyline:
    kind: str
    user: int
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "user": self.user, "points": self.points.tolist()}


def condition_margins_grid(params: SystemParams, kind: str, grid_points: int):
    """Signed margins of one condition family on a uniform (q1, q2) grid.

    Returns ``(axis, margins)``: ``axis`` holds the grid coordinates and
    ``margins[a, b, i]`` is user i's slack at ``q = (axis[a], axis[b])``.
    Original-system kinds solve the empty-queue fixed point in every cell.
    """
    if params.n_users != 2:
        raise ValueError("grid margins are defined for two users only")
    if kind not in BOUNDARY_KINDS:
        raise ValueError(f"kind must be one of {BOUNDARY_KINDS}")
    axis = np.linspace(0.0, 1.0, grid_points)
    q1, q2 = np.meshgrid(axis, axis, indexing="ij")
    q = np.stack([q1, q2], axis=-1)
    if kind.endswith("dominant"):
        occ = clean_slot_prob(q)
    else:
        p_e, *_ = solve_empty_probs_batch(params.arrival, q, params.fail_prob)
        occ = occupancy_given_busy(q, p_e)
    if kind.startswith("stability"):
        return axis, occ - params.arrival_norm
    return axis, params.rho - occ


def _dominant_curves(kind: str, bound: np.ndarray, axis: np.ndarray) -> list[Polyline]:
    with np.errstate(divide="ignore", invalid="ignore"):
        curves = [1.0 - bound[0] / axis, bound[1] / (1.0 - axis)]
    out = []
    for user, q2 in enumerate(curves):
        keep = np.isfinite(q2) & (q2 >= 0.0) & (q2 <= 1.0)
        out.append(Polyline(kind, user, np.column_stack([axis[keep], q2[keep]])))
    return out


def trace_boundaries_n2(params: SystemParams, kind: str, grid_points: int = 201) -> list[Polyline]:
    """Boundary curves of one condition family in the (q1, q2) square.

    Dominant kinds are closed-form curves sampled on a uniform q1 grid.
    Original kinds are zero contours of the grid margins.
    """
    if params.n_users != 2:
        raise ValueError("boundary tracing is defined for two users only")
    if kind not in BOUNDARY_KINDS:
        raise ValueError(f"kind must be one of {BOUNDARY_KINDS}")
    axis = np.linspace(0.0, 1.0, grid_points)
    if kind == "stability-dominant":
        return _dominant_curves(kind, params.arrival_norm, axis)
    if kind == "secrecy-dominant":
        return _dominant_curves(kind, params.rho, axis)

    from skimage.measure import find_contours

    axis, margins = condition_margins_grid(params, kind, grid_points)
    scale = 1.0 / (grid_points - 1)
    out = []
    for user in range(2):
        field_ = margins[..., user]
        if field_.min() >= 0 or field_.max() <= 0:
            continue
        for contour in find_contours(field_, 0.0):
            out.append(Polyline(kind, user, contour * scale))
    return out
