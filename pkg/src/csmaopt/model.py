"""Analytic chain for carrier-sense CSMA/CA with exponential backoff.

Maps a carrier-sense threshold to area spectral efficiency:
control-collision and channel-busy probabilities feed the backoff access
probability (a fixed point solved by Newton), which sets the mean sensing
range, the hard-core active density, the transmission success probability,
and finally the ASE.

All quantities are linear (watts, meters, probabilities); dB conversion is
the CLI's job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import (
    DegenerateDenominator,
    InvalidAlpha,
    ThresholdAbovePower,
    UnsupportedAlpha,
)
from .numerics import SolverConfig, erf, integrate_semi_infinite, newton_safeguarded

# Interferer-count ladder behind the mean sensing range: with growing density
# up to six equally-strong nearest interferers matter, so the breakpoints are
# D_i = ((i+1) P / I_s)^(1/alpha) for i = 0..5.
_MAX_NEAR_INTERFERERS = 6


@dataclass(frozen=True)
class LinkBudget:
    """PHY-layer parameters of one transmitter/receiver pair.

    tx_power_watts     transmit power P
    link_distance_m    transmitter-receiver separation r_t
    path_loss_exp      path-loss exponent alpha (> 2 or interference diverges)
    target_sir         SIR threshold for data, linear
    control_target_sir SIR threshold for control frames (RTS/CTS), linear
    """

    tx_power_watts: float
    link_distance_m: float
    path_loss_exp: float
    target_sir: float
    control_target_sir: float

    def __post_init__(self) -> None:
        if self.tx_power_watts <= 0.0:
            raise ValueError(f"tx_power_watts must be positive, got {self.tx_power_watts}")
        if self.link_distance_m <= 0.0:
            raise ValueError(f"link_distance_m must be positive, got {self.link_distance_m}")
        if self.path_loss_exp <= 2.0:
            raise ValueError(
                f"path_loss_exp must exceed 2 (got {self.path_loss_exp}); "
                "aggregate interference diverges otherwise"
            )
        if self.target_sir <= 0.0:
            raise ValueError(f"target_sir must be positive, got {self.target_sir}")
        if self.control_target_sir <= 0.0:
            raise ValueError(f"control_target_sir must be positive, got {self.control_target_sir}")

    @property
    def received_signal_watts(self) -> float:
        """Mean received power at the paired receiver, r_t^-alpha P."""
        return self.link_distance_m ** -self.path_loss_exp * self.tx_power_watts


@dataclass(frozen=True)
class BackoffParams:
    """Binary exponential backoff configuration.

    initial_window  W0, slots in the stage-0 contention window
    max_stage       m, number of window doublings before saturation
    """

    initial_window: int
    max_stage: int

    def __post_init__(self) -> None:
        if self.initial_window < 1:
            raise ValueError(f"initial_window must be >= 1, got {self.initial_window}")
        if self.max_stage < 0:
            raise ValueError(f"max_stage must be >= 0, got {self.max_stage}")


@dataclass(frozen=True)
class ContentionState:
    """Converged MAC fixed point: access probability with its inputs."""

    tau: float
    busy_prob: float
    collision_prob: float


@dataclass(frozen=True)
class SpatialState:
    """Geometry and performance of one carrier-sense threshold."""

    sense_threshold_watts: float
    sense_range_m: float
    active_density: float
    success_prob: float
    ase: float


def collision_prob(density: float, tau: float, link: LinkBudget) -> float:
    """Control-message collision probability for contender density
    density*tau (thinned Poisson field, Rayleigh fading).
    """
    if density < 0.0:
        raise ValueError(f"density must be >= 0, got {density}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    alpha = link.path_loss_exp
    s = math.sin(2.0 * math.pi / alpha)
    if s <= 0.0:
        raise InvalidAlpha(f"sin(2*pi/alpha) must be positive, alpha={alpha}")
    x = (
        density
        * tau
        * link.link_distance_m ** 2
        * link.control_target_sir ** (2.0 / alpha)
        * 2.0
        * math.pi ** 2
        / (alpha * s)
    )
    return -math.expm1(-x)


def busy_prob(
    density: float,
    tau: float,
    tx_power_watts: float,
    threshold_watts: float,
    path_loss_exp: float = 4.0,
) -> float:
    """Probability that sensed aggregate interference reaches the threshold.

    erf CDF of the Rayleigh-faded Poisson shot noise; holds only for
    path-loss exponent 4.
    """
    if path_loss_exp != 4.0:
        raise UnsupportedAlpha(
            f"busy probability erf form requires alpha = 4, got {path_loss_exp}"
        )
    if threshold_watts <= 0.0:
        raise ValueError(f"threshold_watts must be positive, got {threshold_watts}")
    return erf(math.pi ** 2 * density * tau / 4.0 * math.sqrt(tx_power_watts / threshold_watts))


def tau_residual_rhs(tau: float, busy: float, coll: float, backoff: BackoffParams) -> float:
    """Right-hand side h(tau) of the backoff access-probability fixed point.

    The recursion corrects the classic saturation analysis so a node re-enters
    backoff after every success instead of transmitting freely.
    """
    for name, v in (("tau", tau), ("busy", busy), ("coll", coll)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    w0 = float(backoff.initial_window)
    m = backoff.max_stage
    two_pc = 2.0 * coll
    two_pc_m = two_pc ** m
    num = 2.0 * (1.0 - busy) * (1.0 - two_pc)
    den = (1.0 - two_pc) * (1.0 - 2.0 * busy + w0 * two_pc_m) + w0 * (1.0 - coll) * (
        1.0 - two_pc_m
    )
    if abs(den) < 1e-12 * max(1.0, w0 * max(1.0, two_pc_m)):
        raise DegenerateDenominator(
            f"access-probability denominator vanished: p_b={busy}, p_c={coll}, "
            f"W0={backoff.initial_window}, m={m} (den={den:.3e})"
        )
    return num / den


def _composed_h(density, link, backoff, threshold_watts):
    """h(tau) with the busy and collision probabilities substituted in."""

    def h(tau: float) -> float:
        pb = busy_prob(
            density, tau, link.tx_power_watts, threshold_watts, link.path_loss_exp
        )
        pc = collision_prob(density, tau, link)
        return tau_residual_rhs(tau, pb, pc, backoff)

    return h


def solve_tau(
    density: float,
    link: LinkBudget,
    backoff: BackoffParams,
    threshold_watts: float,
    cfg: Optional[SolverConfig] = None,
) -> ContentionState:
    """Solve tau = h(tau) by safeguarded Newton from tau0 = 0.

    The busy and collision probabilities are recomputed from the current
    iterate at every step; the bracket [0, 1] guards the Newton updates.
    """
    cfg = cfg or SolverConfig()
    h = _composed_h(density, link, backoff, threshold_watts)

    def residual(tau: float) -> float:
        return tau - h(tau)

    def residual_prime(tau: float) -> float:
        # clip the stencil into [0, 1]; h is only defined on probabilities
        step = cfg.fd_step_rel * max(abs(tau), 1.0)
        lo = max(tau - step, 0.0)
        hi = min(tau + step, 1.0)
        return 1.0 - (h(hi) - h(lo)) / (hi - lo)

    tau = newton_safeguarded(
        residual, x0=0.0, df=residual_prime, bracket=(0.0, 1.0), cfg=cfg
    )
    tau = min(max(tau, 0.0), 1.0)
    pb = busy_prob(density, tau, link.tx_power_watts, threshold_watts, link.path_loss_exp)
    pc = collision_prob(density, tau, link)
    return ContentionState(tau=tau, busy_prob=pb, collision_prob=pc)


def sensing_range(
    density: float,
    tau: float,
    tx_power_watts: float,
    threshold_watts: float,
    path_loss_exp: float = 4.0,
) -> float:
    """Mean sensing range induced by the threshold at contender density
    density*tau.

    Closed-form integral of the nearest-interferer-count mixture: with
    F(a, b) = exp(-lt*pi*a^2) - exp(-lt*pi*b^2) the Rayleigh-type distance
    density integrates exactly, so no quadrature enters the optimization path.
    """
    if threshold_watts <= 0.0:
        raise ValueError(f"threshold_watts must be positive, got {threshold_watts}")
    if threshold_watts >= tx_power_watts:
        raise ThresholdAbovePower(
            f"threshold {threshold_watts} W >= transmit power {tx_power_watts} W; "
            "the sensing region degenerates below the 1 m path-loss reference"
        )
    d = [
        ((i + 1) * tx_power_watts / threshold_watts) ** (1.0 / path_loss_exp)
        for i in range(_MAX_NEAR_INTERFERERS)
    ]
    lt_pi = density * tau * math.pi

    def cdf(r: float) -> float:
        return math.exp(-lt_pi * r * r)

    rs = d[5] * (1.0 - cdf(d[0]))
    for i in range(1, _MAX_NEAR_INTERFERERS):
        rs += d[5 - i] * (cdf(d[i - 1]) - cdf(d[i]))
    rs += d[0] * cdf(d[5])
    return rs


def active_density(density: float, tau: float, sense_range_m: float) -> float:
    """Matern type-II retained density at contender density density*tau and
    hard-core distance sense_range_m; stable for small arguments via expm1.
    """
    if sense_range_m <= 0.0:
        raise ValueError(f"sense_range_m must be positive, got {sense_range_m}")
    area = math.pi * sense_range_m * sense_range_m
    return -math.expm1(-density * tau * area) / area


def success_prob_closed(active_density_: float, link: LinkBudget, sense_range_m: float) -> float:
    """Closed-form transmission success probability (alpha = 4 only).

    Laplace transform of the interference from a Poisson field outside the
    sensing range, with Rayleigh fading on every path.
    """
    if link.path_loss_exp != 4.0:
        raise UnsupportedAlpha(
            f"closed-form success probability requires alpha = 4, got "
            f"{link.path_loss_exp}; use success_prob_general"
        )
    beta = link.target_sir
    rt2 = link.link_distance_m ** 2
    sqrt_beta = math.sqrt(beta)
    return math.exp(
        -math.pi
        * active_density_
        * sqrt_beta
        * rt2
        * math.atan(sqrt_beta * rt2 / (sense_range_m * sense_range_m))
    )


def success_prob_general(active_density_: float, link: LinkBudget, sense_range_m: float) -> float:
    """Success probability for any alpha > 2, exponent by quadrature."""
    beta = link.target_sir
    alpha = link.path_loss_exp
    rt_a = link.link_distance_m ** alpha

    def integrand(v: float) -> float:
        return beta / (beta + v ** alpha / rt_a) * v

    tail = integrate_semi_infinite(integrand, sense_range_m)
    return math.exp(-2.0 * math.pi * active_density_ * tail)


def evaluate_threshold(
    density: float,
    link: LinkBudget,
    backoff: BackoffParams,
    threshold_watts: float,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[ContentionState, SpatialState]:
    """Full chain at one threshold: contention fixed point plus geometry."""
    contention = solve_tau(density, link, backoff, threshold_watts, cfg)
    rs = sensing_range(
        density,
        contention.tau,
        link.tx_power_watts,
        threshold_watts,
        link.path_loss_exp,
    )
    lt = active_density(density, contention.tau, rs)
    if link.path_loss_exp == 4.0:
        ps = success_prob_closed(lt, link, rs)
    else:
        ps = success_prob_general(lt, link, rs)
    eta = lt * math.log2(1.0 + link.target_sir) * ps
    return contention, SpatialState(
        sense_threshold_watts=threshold_watts,
        sense_range_m=rs,
        active_density=lt,
        success_prob=ps,
        ase=eta,
    )


def ase(
    density: float,
    link: LinkBudget,
    backoff: BackoffParams,
    threshold_watts: float,
    cfg: Optional[SolverConfig] = None,
) -> SpatialState:
    """Area spectral efficiency of one threshold (bits/s/Hz/m^2)."""
    _, state = evaluate_threshold(density, link, backoff, threshold_watts, cfg)
    return state
