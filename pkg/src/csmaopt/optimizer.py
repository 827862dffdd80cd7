"""Search for the ASE-maximizing carrier-sense threshold.

The primary path is the nested iteration: an outer Newton update on the
threshold wrapped around the inner access-probability fixed point.  Newton
steps are taken in log10(threshold) because the objective varies over
decades of threshold; a golden-section fallback and an exhaustive grid
oracle certify the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import NoBracket, UnsupportedAlpha
from .model import (
    BackoffParams,
    ContentionState,
    LinkBudget,
    SpatialState,
    active_density,
    evaluate_threshold,
    sensing_range,
    success_prob_closed,
    success_prob_general,
)
from .numerics import SolverConfig, golden_section_max, newton_safeguarded
from .units import watts_to_dbm

# Search interval in log10(watts): floor -90 dBm, ceiling 0.3 dB under the
# transmit power where the sensing geometry degenerates (the margin keeps
# difference stencils evaluable at the edge).  The received signal power
# r_t^-alpha P only anchors the initialization; clamping the iterates there
# would cut off the low-SIR optima that sit above it.
_LOG10_FLOOR = -12.0
_CEILING_MARGIN = 0.03  # log10 decades, i.e. 0.3 dB
# log10 step for the outer eta'/eta'' differences; the inner fixed point is
# solved far tighter so second differences at this step stay clean
_OUTER_FD_STEP = 0.02
_BOUNDARY_TOL = 0.005  # log10 distance treated as "sitting on the edge"


@dataclass
class OptimizerReport:
    """Outcome of one threshold optimization."""

    optimal_threshold_watts: float
    optimal_threshold_dbm: float
    converged_state: SpatialState
    converged_contention: ContentionState
    outer_iterations: int
    trace: List[Tuple[float, float, float]] = field(default_factory=list)
    method: str = "newton"
    boundary: bool = False


def _tight_inner_cfg(cfg: SolverConfig) -> SolverConfig:
    # the outer second differences need the inner fixed point at machine
    # accuracy, otherwise solver noise dominates eta''
    return SolverConfig(
        abs_tol=1e-14,
        rel_tol=1e-13,
        max_iter=max(cfg.max_iter, 200),
        fd_step_rel=cfg.fd_step_rel,
    )


def optimize_threshold(
    density: float,
    link: LinkBudget,
    backoff: BackoffParams,
    cfg: Optional[SolverConfig] = None,
    freeze_tau: bool = False,
) -> OptimizerReport:
    """Nested Newton search for the ASE-maximizing threshold.

    Outer loop: Newton on log10(threshold) with finite-difference first and
    second derivatives of the ASE; inner loop: the access-probability fixed
    point re-solved at every evaluation.  With freeze_tau the derivatives
    hold the access probability at the current outer iterate instead of
    re-solving it at the perturbed thresholds.

    Falls back to golden-section over the admissible interval when Newton
    leaves it repeatedly, hits a non-concave region, or stalls; the report's
    method field names the path that produced the answer.
    """
    cfg = cfg or SolverConfig()
    inner_cfg = _tight_inner_cfg(cfg)
    u_hi = math.log10(link.tx_power_watts) - _CEILING_MARGIN
    u_lo = _LOG10_FLOOR

    def eval_at(u: float) -> Tuple[ContentionState, SpatialState]:
        return evaluate_threshold(density, link, backoff, 10.0 ** u, inner_cfg)

    def eta_at(u: float) -> float:
        return eval_at(u)[1].ase

    def eta_frozen(u: float, tau: float) -> float:
        rs = sensing_range(density, tau, link.tx_power_watts, 10.0 ** u, link.path_loss_exp)
        lt = active_density(density, tau, rs)
        ps = (
            success_prob_closed(lt, link, rs)
            if link.path_loss_exp == 4.0
            else success_prob_general(lt, link, rs)
        )
        return lt * math.log2(1.0 + link.target_sir) * ps

    trace: List[Tuple[float, float, float]] = []
    # init three decades under the received signal power, per the algorithm,
    # pulled into the search interval for extreme link budgets
    u = min(max(math.log10(link.received_signal_watts) - 3.0, u_lo), u_hi)
    method = "newton"
    outer_tol = max(cfg.rel_tol, 1e-7) / math.log(10.0)
    iterations = 0
    clamped_last = False
    converged = False

    for iterations in range(1, cfg.max_iter + 1):
        cont, state = eval_at(u)
        trace.append((10.0 ** u, cont.tau, state.ase))
        h = _OUTER_FD_STEP
        if freeze_tau:
            f_p = eta_frozen(u + h, cont.tau)
            f_m = eta_frozen(u - h, cont.tau)
            f_0 = eta_frozen(u, cont.tau)
        else:
            f_p = eta_at(u + h)
            f_m = eta_at(u - h)
            f_0 = state.ase
        d1 = (f_p - f_m) / (2.0 * h)
        d2 = (f_p - 2.0 * f_0 + f_m) / (h * h)
        if not (math.isfinite(d1) and math.isfinite(d2)):
            method = "golden"
            break
        if d2 >= 0.0:
            # outside the concave basin (the init point usually is): walk
            # uphill half a decade at a time until curvature turns over
            if d1 == 0.0:
                method = "golden"
                break
            u_next = u + math.copysign(0.5, d1)
        else:
            u_next = u - d1 / d2
        if u_next < u_lo or u_next > u_hi:
            u_next = min(max(u_next, u_lo), u_hi)
            if clamped_last:
                method = "golden"
                break
            clamped_last = True
        else:
            clamped_last = False
        if d2 < 0.0 and abs(u_next - u) <= outer_tol:
            u = u_next
            converged = True
            break
        u = u_next

    if method == "newton" and not converged:
        method = "golden"

    if method == "newton":
        # certify against the immediate 0.1 dB neighbors; an interior result
        # that fails it goes to the fallback rather than being reported
        cell = 0.01
        if u_lo + cell < u < u_hi - cell:
            if eta_at(u) < max(eta_at(u - cell), eta_at(u + cell)):
                method = "newton+golden"
        else:
            method = "golden"

    if method != "newton":
        u, _ = golden_section_max(eta_at, u_lo, u_hi, tol=1e-12)

    cont, state = eval_at(u)
    if not trace or trace[-1][0] != state.sense_threshold_watts:
        trace.append((state.sense_threshold_watts, cont.tau, state.ase))
    boundary = (u - u_lo) < _BOUNDARY_TOL or (u_hi - u) < _BOUNDARY_TOL
    return OptimizerReport(
        optimal_threshold_watts=state.sense_threshold_watts,
        optimal_threshold_dbm=watts_to_dbm(state.sense_threshold_watts),
        converged_state=state,
        converged_contention=cont,
        outer_iterations=iterations,
        trace=trace,
        method=method,
        boundary=boundary,
    )


def grid_search_threshold(
    density: float,
    link: LinkBudget,
    backoff: BackoffParams,
    grid_db: float = 0.1,
    cfg: Optional[SolverConfig] = None,
) -> OptimizerReport:
    """Exhaustive argmax over a dB grid of thresholds.

    Grid spans [-90 dBm, transmit power) in steps of grid_db, the same
    interval the Newton path searches; serves as its certification oracle.
    """
    if grid_db <= 0.0:
        raise ValueError(f"grid_db must be positive, got {grid_db}")
    # evaluate with the same tight inner fixed point as the Newton path:
    # near a flat peak, looser tau tolerances would jitter the argmax cell
    cfg = _tight_inner_cfg(cfg or SolverConfig())
    lo_dbm = -90.0
    hi_dbm = watts_to_dbm(link.tx_power_watts) - 10.0 * _CEILING_MARGIN
    n = int(math.floor((hi_dbm - lo_dbm) / grid_db))
    if lo_dbm + n * grid_db >= hi_dbm - 1e-12:
        n -= 1
    trace: List[Tuple[float, float, float]] = []
    best_idx = 0
    best_eta = -math.inf
    for i in range(n + 1):
        threshold = 10.0 ** ((lo_dbm + i * grid_db - 30.0) / 10.0)
        cont, state = evaluate_threshold(density, link, backoff, threshold, cfg)
        trace.append((threshold, cont.tau, state.ase))
        if state.ase > best_eta:
            best_eta = state.ase
            best_idx = i
    threshold = trace[best_idx][0]
    cont, state = evaluate_threshold(density, link, backoff, threshold, cfg)
    return OptimizerReport(
        optimal_threshold_watts=threshold,
        optimal_threshold_dbm=lo_dbm + best_idx * grid_db,
        converged_state=state,
        converged_contention=cont,
        outer_iterations=n + 1,
        trace=trace,
        method="grid",
        boundary=best_idx in (0, n),
    )


def no_beb_optimal_range(link: LinkBudget) -> float:
    """High-density optimal sensing range with backoff ignored.

    Closed form ((1 + sqrt(5))/2 * beta)^(1/4) * r_t; the familiar 1.1278
    coefficient is ((1 + sqrt(5))/2)^(1/4).
    """
    if link.path_loss_exp != 4.0:
        raise UnsupportedAlpha(
            f"no-backoff closed form requires alpha = 4, got {link.path_loss_exp}"
        )
    golden = 0.5 * (1.0 + math.sqrt(5.0))
    return (golden * link.target_sir) ** 0.25 * link.link_distance_m


def no_beb_optimal_threshold(density: float, link: LinkBudget) -> float:
    """Threshold whose mean sensing range at full contention (tau = 1)
    equals the no-backoff optimal range.

    The range is monotone in the threshold between the one-interferer and
    six-interferer inversions, which bracket the root.
    """
    if link.path_loss_exp != 4.0:
        raise UnsupportedAlpha(
            f"no-backoff inversion requires alpha = 4, got {link.path_loss_exp}"
        )
    r_star = no_beb_optimal_range(link)
    p = link.tx_power_watts
    lo = p / r_star ** 4
    hi = 6.0 * p / r_star ** 4

    # solve in log10(threshold): the root lives many decades below 1 W, so
    # finite-difference steps on the linear scale would leave the bracket
    def gap(u: float) -> float:
        return sensing_range(density, 1.0, p, 10.0 ** u, 4.0) - r_star

    u_lo, u_hi = math.log10(lo), math.log10(hi)
    g_lo, g_hi = gap(u_lo), gap(u_hi)
    # the endpoints attain the sparse/dense limits exactly, so float noise
    # around zero counts as a root rather than a broken bracket
    tol = 1e-10 * r_star
    if abs(g_lo) <= tol:
        return lo
    if abs(g_hi) <= tol:
        return hi
    if g_lo < 0.0 or g_hi > 0.0:
        raise NoBracket(
            f"target range {r_star:.3f} m not attainable between the "
            f"one- and six-interferer inversions ({g_lo:.3e}, {g_hi:.3e})"
        )
    root = newton_safeguarded(
        gap,
        x0=0.5 * (u_lo + u_hi),
        bracket=(u_lo, u_hi),
        cfg=SolverConfig(abs_tol=1e-12, rel_tol=1e-13, max_iter=200),
    )
    return 10.0 ** root
