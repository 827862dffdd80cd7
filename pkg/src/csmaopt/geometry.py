"""Snapshot Monte Carlo: Poisson bipolar networks, Matern type-II
carrier-sense thinning, Rayleigh-fading SIR outcomes.

These estimators are the empirical oracles for the analytic chain: retained
density against the hard-core formula, interference exceedance against the
erf CDF, and end-to-end ASE against the closed form.

Replications draw from per-replication substreams (SeedSequence spawn
keys), so results are identical no matter how work is split across a pool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientRetained
from .model import BackoffParams, LinkBudget, sensing_range, solve_tau
from .numerics import SolverConfig

_BUSY_BLOCK = 4096  # replications per RNG substream in the busy estimator
_ASE_CHUNK = 32  # replications per pool task in the ASE estimator
_MIN_RETAINED = 100


@dataclass(frozen=True)
class SimRegion:
    """Square observation window.

    side_m      square side L in meters
    wraparound  torus metric (unbiased estimators at desk scale) or a plain
                bounded square as in larger-area setups
    """

    side_m: float
    wraparound: bool = True

    def __post_init__(self) -> None:
        if self.side_m <= 0.0:
            raise ValueError(f"side_m must be positive, got {self.side_m}")

    @property
    def area(self) -> float:
        return self.side_m * self.side_m

    def check_edge_guard(self, *scales: float) -> None:
        """Bounded squares need L >= 20x the largest interaction scale."""
        if not self.wraparound:
            needed = 20.0 * max(scales)
            if self.side_m < needed:
                raise ValueError(
                    f"bounded region side {self.side_m} m below the edge-effect "
                    f"guard {needed} m; enlarge it or use wraparound"
                )


def _distance_sq(points: np.ndarray, ref: np.ndarray, region: SimRegion) -> np.ndarray:
    d = np.abs(points - ref)
    if region.wraparound:
        d = np.minimum(d, region.side_m - d)
    return (d * d).sum(axis=-1)


@dataclass
class Snapshot:
    """One realization of the bipolar network.

    transmitters  (n, 2) positions
    receivers     (n, 2) positions, each at the link distance from its
                  transmitter in a uniform random direction
    marks         contention marks, i.i.d. uniform [0, 1); lowest wins
    thin_draws    uniforms for the independent Bernoulli access thinning
    fading_rng    generator for lazily drawn unit-mean exponential gains
    """

    transmitters: np.ndarray
    receivers: np.ndarray
    marks: np.ndarray
    thin_draws: np.ndarray
    region: SimRegion
    fading_rng: np.random.Generator

    def __len__(self) -> int:
        return len(self.transmitters)


def sample_ppp(
    density: float,
    region: SimRegion,
    seed,
    link_distance_m: float = 0.0,
) -> Snapshot:
    """Sample a Poisson bipolar snapshot at the given (effective) density.

    The point count is Poisson(density * area) and positions are i.i.d.
    uniform, which is the homogeneous process restricted to the window.
    """
    if density < 0.0:
        raise ValueError(f"density must be >= 0, got {density}")
    rng = np.random.default_rng(seed)
    n = rng.poisson(density * region.area)
    tx = rng.uniform(0.0, region.side_m, size=(n, 2))
    angles = rng.uniform(0.0, 2.0 * math.pi, size=n)
    rx = tx + link_distance_m * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if region.wraparound:
        rx %= region.side_m
    marks = rng.uniform(size=n)
    thin_draws = rng.uniform(size=n)
    return Snapshot(tx, rx, marks, thin_draws, region, rng)


def matern_thin(snapshot: Snapshot, contend_prob: float, sense_range: float) -> np.ndarray:
    """Indices retained after access thinning plus Matern type-II selection.

    First the independent Bernoulli(contend_prob) thinning picks the
    contenders; a contender survives iff no other contender with a smaller
    mark lies within sense_range.
    """
    if not 0.0 <= contend_prob <= 1.0:
        raise ValueError(f"contend_prob must be in [0, 1], got {contend_prob}")
    if sense_range <= 0.0:
        raise ValueError(f"sense_range must be positive, got {sense_range}")
    contenders = np.where(snapshot.thin_draws < contend_prob)[0]
    n = len(contenders)
    if n == 0:
        return contenders
    pts = snapshot.transmitters[contenders]
    marks = snapshot.marks[contenders]
    r2 = sense_range * sense_range
    keep = np.ones(n, dtype=bool)
    chunk = max(1, int(2**22 // max(n, 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = np.abs(pts[start:stop, None, :] - pts[None, :, :])
        if snapshot.region.wraparound:
            d = np.minimum(d, snapshot.region.side_m - d)
        d2 = (d * d).sum(axis=-1)
        within = d2 <= r2
        lower = marks[None, :] < marks[start:stop, None]
        keep[start:stop] = ~np.any(within & lower, axis=1)
    return contenders[keep]


@dataclass(frozen=True)
class SimOutcome:
    """Point estimate with a 95% normal-approximation half width."""

    estimate: float
    half_width_95: float
    replications: int
    seed: int


def _busy_block(args) -> Tuple[int, int]:
    (seed, block_idx, n_reps, contender_density, area, side, wrap, tx_power,
     threshold, alpha) = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block_idx,)))
    region = SimRegion(side, wrap)
    probe = np.array([side / 2.0, side / 2.0])
    counts = rng.poisson(contender_density * area, size=n_reps)
    total = int(counts.sum())
    if total == 0:
        return 0, n_reps
    pos = rng.uniform(0.0, side, size=(total, 2))
    gains = rng.exponential(size=total)
    d2 = _distance_sq(pos, probe, region)
    contrib = gains * tx_power * d2 ** (-alpha / 2.0)
    rep_idx = np.repeat(np.arange(n_reps), counts)
    interference = np.bincount(rep_idx, weights=contrib, minlength=n_reps)
    return int((interference >= threshold).sum()), n_reps


def estimate_busy_prob(
    density: float,
    tau: float,
    link: LinkBudget,
    threshold_watts: float,
    region: SimRegion,
    replications: int,
    seed: int,
    jobs: int = 1,
) -> SimOutcome:
    """Fraction of snapshots whose aggregate interference at an independent
    probe point reaches the threshold.

    Interferers are the access-thinned Poisson field at density*tau (thinning
    a Poisson process is again Poisson, so the contenders are sampled
    directly); gains are fresh unit-mean exponentials.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    region.check_edge_guard(link.link_distance_m)
    n_blocks = (replications + _BUSY_BLOCK - 1) // _BUSY_BLOCK
    tasks = []
    remaining = replications
    for b in range(n_blocks):
        n = min(_BUSY_BLOCK, remaining)
        remaining -= n
        tasks.append(
            (seed, b, n, density * tau, region.area, region.side_m,
             region.wraparound, link.tx_power_watts, threshold_watts,
             link.path_loss_exp)
        )
    if jobs > 1 and len(tasks) > 1:
        with Pool(processes=jobs) as pool:
            results = pool.map(_busy_block, tasks)
    else:
        results = [_busy_block(t) for t in tasks]
    hits = sum(r[0] for r in results)
    p_hat = hits / replications
    half = 1.96 * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / replications)
    return SimOutcome(p_hat, half, replications, seed)


def _ase_replication(
    rng: np.random.Generator,
    contender_density: float,
    region: SimRegion,
    link: LinkBudget,
    sense_range: float,
    beta: float,
) -> Tuple[int, int]:
    """One snapshot: (retained count, successful count)."""
    side = region.side_m
    n = rng.poisson(contender_density * region.area)
    if n == 0:
        return 0, 0
    pos = rng.uniform(0.0, side, size=(n, 2))
    marks = rng.uniform(size=n)
    snap = Snapshot(pos, pos, marks, np.zeros(n), region, rng)
    retained = matern_thin(snap, 1.0, sense_range)
    nr = len(retained)
    if nr == 0:
        return 0, 0
    angles = rng.uniform(0.0, 2.0 * math.pi, size=nr)
    rx = pos[retained] + link.link_distance_m * np.stack(
        [np.cos(angles), np.sin(angles)], axis=1
    )
    if region.wraparound:
        rx %= side
    signal = rng.exponential(size=nr) * link.received_signal_watts
    if nr == 1:
        return 1, 1  # interference-limited: a lone transmitter always succeeds
    d = np.abs(pos[retained][None, :, :] - rx[:, None, :])
    if region.wraparound:
        d = np.minimum(d, side - d)
    d2 = (d * d).sum(axis=-1)
    gains = rng.exponential(size=(nr, nr))
    contrib = gains * link.tx_power_watts * d2 ** (-link.path_loss_exp / 2.0)
    np.fill_diagonal(contrib, 0.0)
    interference = contrib.sum(axis=1)
    successes = int((signal >= beta * interference).sum())
    return nr, successes


def _ase_chunk(args) -> Tuple[np.ndarray, np.ndarray]:
    (seed, rep_indices, contender_density, side, wrap, link_tuple, sense_range,
     beta) = args
    region = SimRegion(side, wrap)
    link = LinkBudget(*link_tuple)
    retained = np.zeros(len(rep_indices), dtype=np.int64)
    successes = np.zeros(len(rep_indices), dtype=np.int64)
    for i, rep in enumerate(rep_indices):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))
        retained[i], successes[i] = _ase_replication(
            rng, contender_density, region, link, sense_range, beta
        )
    return retained, successes


def estimate_success_and_ase(
    density: float,
    link: LinkBudget,
    backoff: BackoffParams,
    threshold_watts: float,
    region: SimRegion,
    replications: int,
    seed: int,
    jobs: int = 1,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[SimOutcome, SimOutcome, SimOutcome]:
    """Empirical (success probability, active density, ASE) for one threshold.

    Per replication: access-thinned contender field at density*tau (tau from
    the analytic fixed point; this snapshot model has no slots), Matern
    type-II retention at the mean sensing range, then a Rayleigh SIR trial
    per retained link against all other retained transmitters.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    contention = solve_tau(density, link, backoff, threshold_watts, cfg)
    sense = sensing_range(
        density, contention.tau, link.tx_power_watts, threshold_watts, link.path_loss_exp
    )
    region.check_edge_guard(sense, link.link_distance_m)
    link_tuple = (
        link.tx_power_watts,
        link.link_distance_m,
        link.path_loss_exp,
        link.target_sir,
        link.control_target_sir,
    )
    chunks = [
        (seed, list(range(start, min(start + _ASE_CHUNK, replications))),
         density * contention.tau, region.side_m, region.wraparound,
         link_tuple, sense, link.target_sir)
        for start in range(0, replications, _ASE_CHUNK)
    ]
    if jobs > 1 and len(chunks) > 1:
        with Pool(processes=jobs) as pool:
            parts = pool.map(_ase_chunk, chunks)
    else:
        parts = [_ase_chunk(c) for c in chunks]
    retained = np.concatenate([p[0] for p in parts])
    successes = np.concatenate([p[1] for p in parts])

    total_retained = int(retained.sum())
    if total_retained < _MIN_RETAINED:
        raise InsufficientRetained(
            f"only {total_retained} retained transmitters aggregated; widen the "
            f"region or add replications"
        )
    r = replications
    area = region.area
    rate = math.log2(1.0 + link.target_sir)

    lt_hat = float(retained.mean()) / area
    lt_half = 1.96 * float(retained.std(ddof=1)) / math.sqrt(r) / area if r > 1 else 0.0

    ps_hat = float(successes.sum()) / total_retained
    residuals = successes - ps_hat * retained
    ps_var = float((residuals**2).sum()) * r / (r - 1) / total_retained**2 if r > 1 else 0.0
    ps_half = 1.96 * math.sqrt(max(ps_var, 0.0))

    eta_hat = rate * float(successes.mean()) / area
    eta_half = rate * 1.96 * float(successes.std(ddof=1)) / math.sqrt(r) / area if r > 1 else 0.0

    return (
        SimOutcome(ps_hat, ps_half, r, seed),
        SimOutcome(lt_hat, lt_half, r, seed),
        SimOutcome(eta_hat, eta_half, r, seed),
    )
