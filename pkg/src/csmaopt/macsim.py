"""Slotted binary-exponential-backoff contention simulator.

Per-node backoff counters with channel-dependent freezing, window doubling
on control-frame collisions, and SIR-based RTS outcomes produce empirical
access probabilities that validate the analytic fixed point.

The slot model abstracts DIFS/data timing away: one slot is one backoff
opportunity, which is the process the fixed point is defined over.  Sensing
uses the previous slot's transmitters with fresh Rayleigh gains.

Positions never move, so sensing neighborhoods are precomputed once: each
node keeps a list of every node within a cutoff radius (chosen so that a
mean-fading interferer at the cutoff contributes a small fraction of the
threshold) together with the path gain; interference from beyond the cutoff
enters as its positional mean.  A slot then only gathers the precomputed
rows of the transmitters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientNodes
from .geometry import SimRegion
from .model import BackoffParams, ContentionState, LinkBudget, solve_tau
from .numerics import SolverConfig

_WARMUP_FRACTION = 0.2
# an interferer at the sensing cutoff contributes at most this fraction of
# the threshold at mean fading; everything beyond enters as the mean field
_SENSE_CUTOFF_FRACTION = 0.05


@dataclass(frozen=True)
class MacSimStats:
    """Steady-state statistics of one contention run."""

    tau_hat: float
    p_c_hat: float
    slots_run: int
    warmup_slots: int
    n_nodes: int
    seed: int


def _neighbor_table(
    pos: np.ndarray, side: float, wrap: bool, cutoff: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR (starts, neighbor ids, squared distances) of pairs within cutoff."""
    n = len(pos)
    nx = int(side / cutoff) if cutoff < side else 1
    if nx < 3:
        # few cells: brute force, chunked over rows
        srcs, dsts, d2s = [], [], []
        chunk = max(1, int(2**22 // max(n, 1)))
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            d = np.abs(pos[start:stop, None, :] - pos[None, :, :])
            if wrap:
                d = np.minimum(d, side - d)
            d2 = (d * d).sum(axis=-1)
            src, dst = np.nonzero(d2 <= cutoff * cutoff)
            src = src + start
            keep = src != dst
            srcs.append(src[keep])
            dsts.append(dst[keep])
            d2s.append(d2[src[keep] - start, dst[keep]])
        src = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
        dst = np.concatenate(dsts) if dsts else np.zeros(0, dtype=np.int64)
        d2 = np.concatenate(d2s) if d2s else np.zeros(0)
    else:
        cell = side / nx
        cx = np.minimum((pos[:, 0] / cell).astype(np.int64), nx - 1)
        cy = np.minimum((pos[:, 1] / cell).astype(np.int64), nx - 1)
        cid = cx * nx + cy
        order = np.argsort(cid, kind="stable")
        cell_start = np.searchsorted(cid[order], np.arange(nx * nx + 1))
        srcs, dsts, d2s = [], [], []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if wrap:
                    ncid = ((cx + dx) % nx) * nx + ((cy + dy) % nx)
                    valid = np.ones(n, dtype=bool)
                else:
                    nxc, nyc = cx + dx, cy + dy
                    valid = (nxc >= 0) & (nxc < nx) & (nyc >= 0) & (nyc < nx)
                    ncid = np.where(valid, nxc * nx + nyc, 0)
                s0 = np.where(valid, cell_start[ncid], 0)
                e0 = np.where(valid, cell_start[ncid + 1], 0)
                ln = e0 - s0
                tot = int(ln.sum())
                if tot == 0:
                    continue
                csum = np.cumsum(ln) - ln
                flat = np.repeat(s0 - csum, ln) + np.arange(tot)
                cand = order[flat]
                src = np.repeat(np.arange(n), ln)
                d = np.abs(pos[cand] - pos[src])
                if wrap:
                    d = np.minimum(d, side - d)
                d2 = (d * d).sum(axis=-1)
                ok = (d2 <= cutoff * cutoff) & (cand != src)
                srcs.append(src[ok])
                dsts.append(cand[ok])
                d2s.append(d2[ok])
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        d2 = np.concatenate(d2s)
        o = np.argsort(src, kind="stable")
        src, dst, d2 = src[o], dst[o], d2[o]
    starts = np.searchsorted(src, np.arange(n + 1))
    return starts, dst.astype(np.int32), d2


def simulate_slots(
    positions: np.ndarray,
    rx_positions: np.ndarray,
    link: LinkBudget,
    backoff: BackoffParams,
    threshold_watts: float,
    region: SimRegion,
    slots: int,
    rng: np.random.Generator,
    seed_label: int = 0,
    debug_checks: bool = False,
) -> MacSimStats:
    """Run the slotted contention process on fixed node positions.

    Per slot: nodes whose counter expired send an RTS; every other node
    senses the aggregate Rayleigh-faded interference from those transmitters
    and freezes its counter when it reaches the threshold, decrementing
    otherwise.  An RTS succeeds when its SIR at the paired receiver over all
    concurrent RTS transmitters meets the control target; success resets the
    backoff stage, failure doubles the window up to the maximum stage.
    Statistics start after the warmup fifth of the run; access opportunities
    are transmission slots plus unfrozen counting slots.
    """
    n = len(positions)
    if slots < 5:
        raise ValueError(f"slots must be >= 5, got {slots}")
    side = region.side_m
    wrap = region.wraparound
    alpha = link.path_loss_exp
    p = link.tx_power_watts

    cutoff = (p / (_SENSE_CUTOFF_FRACTION * threshold_watts)) ** (1.0 / alpha)
    cutoff = min(cutoff, 0.49 * side)
    starts, nbr, nbr_d2 = _neighbor_table(positions, side, wrap, cutoff)
    path_gain = (p * nbr_d2 ** (-alpha / 2.0)).astype(np.float32)
    del nbr_d2
    # positional mean of the field from beyond the cutoff, per transmitter
    r_eq = side / math.sqrt(math.pi)
    if cutoff < r_eq:
        far_mean = (
            2.0 * math.pi * p / (side * side)
            * (cutoff ** (2.0 - alpha) - r_eq ** (2.0 - alpha)) / (alpha - 2.0)
        )
    else:
        far_mean = 0.0

    w0 = backoff.initial_window
    m = backoff.max_stage
    stage = np.zeros(n, dtype=np.int64)
    counter = rng.integers(0, w0, size=n)
    warmup = int(_WARMUP_FRACTION * slots)
    signal_mean = link.received_signal_watts
    beta_c = link.control_target_sir

    attempts = 0
    collided = 0
    opportunities = 0

    for slot in range(slots):
        tx_mask = counter == 0
        tx_idx = np.nonzero(tx_mask)[0]
        t = len(tx_idx)

        interference = np.full(n, far_mean * t)
        if t:
            s0 = starts[tx_idx]
            ln = starts[tx_idx + 1] - s0
            total = int(ln.sum())
            if total:
                csum = np.cumsum(ln) - ln
                flat = np.repeat(s0 - csum, ln) + np.arange(total)
                victims = nbr[flat]
                gains = rng.exponential(size=total)
                interference += np.bincount(
                    victims, weights=gains * path_gain[flat], minlength=n
                )

        success = np.zeros(t, dtype=bool)
        if t == 1:
            success[:] = True  # interference-limited: no concurrent RTS, no loss
        elif t > 1:
            d = np.abs(positions[tx_idx][None, :, :] - rx_positions[tx_idx][:, None, :])
            if wrap:
                d = np.minimum(d, side - d)
            d2 = (d * d).sum(axis=-1)
            rts_power = rng.exponential(size=(t, t)) * p * d2 ** (-alpha / 2.0)
            np.fill_diagonal(rts_power, 0.0)
            signal = rng.exponential(size=t) * signal_mean
            success = signal >= beta_c * rts_power.sum(axis=1)

        frozen = (interference >= threshold_watts) & ~tx_mask

        if slot >= warmup:
            attempts += t
            collided += t - int(success.sum())
            opportunities += t + int((~frozen & ~tx_mask).sum())

        stage[tx_idx[success]] = 0
        failures = tx_idx[~success]
        stage[failures] = np.minimum(stage[failures] + 1, m)
        if t:
            windows = w0 * (2 ** np.minimum(stage[tx_idx], m))
            counter[tx_idx] = rng.integers(0, windows)
        counter[~tx_mask & ~frozen] -= 1

        if debug_checks:
            assert (counter >= 0).all(), "backoff counter went negative"
            assert (counter < w0 * (2 ** np.minimum(stage, m))).all(), (
                "counter outside the stage window"
            )
            assert (stage <= m).all() and (stage >= 0).all()

    tau_hat = attempts / opportunities if opportunities else 0.0
    p_c_hat = collided / attempts if attempts else 0.0
    return MacSimStats(
        tau_hat=tau_hat,
        p_c_hat=p_c_hat,
        slots_run=slots,
        warmup_slots=warmup,
        n_nodes=n,
        seed=seed_label,
    )


def run_mac_sim(
    density: float,
    link: LinkBudget,
    backoff: BackoffParams,
    threshold_watts: float,
    region: SimRegion,
    slots: int = 12500,
    seed: int = 0,
) -> MacSimStats:
    """Sample a Poisson node layout and run the slotted contention process."""
    expected = density * region.area
    if expected < 10.0:
        raise InsufficientNodes(
            f"expected node count {expected:.2f} below 10; enlarge the region "
            f"or raise the density"
        )
    region.check_edge_guard(link.link_distance_m)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = rng.poisson(expected)
    if n < 1:
        raise InsufficientNodes("no nodes realized in the region")
    pos = rng.uniform(0.0, region.side_m, size=(n, 2))
    angles = rng.uniform(0.0, 2.0 * math.pi, size=n)
    rx = pos + link.link_distance_m * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if region.wraparound:
        rx %= region.side_m
    return simulate_slots(
        pos, rx, link, backoff, threshold_watts, region, slots, rng, seed_label=seed
    )


@dataclass(frozen=True)
class TauTableRow:
    """One access-probability validation cell."""

    density: float
    threshold_watts: float
    control_target_sir: float
    tau_analytic: float
    tau_sim: Optional[float]
    tau_sim_ci95: Optional[float]


def _mac_worker(args) -> float:
    (density, link_tuple, w0, m, threshold, side, wrap, slots, seed) = args
    link = LinkBudget(*link_tuple)
    stats = run_mac_sim(
        density, link, BackoffParams(w0, m), threshold,
        SimRegion(side, wrap), slots=slots, seed=seed,
    )
    return stats.tau_hat


def tau_table(
    cells: Sequence[Tuple[float, float, float]],
    link_template: LinkBudget,
    backoff: BackoffParams,
    region: SimRegion,
    slots: int = 12500,
    seeds: Sequence[int] = tuple(range(10)),
    jobs: int = 1,
    skip_sim: bool = False,
    cfg: Optional[SolverConfig] = None,
) -> List[TauTableRow]:
    """Analytic vs simulated access probability over (density, threshold,
    control SIR) cells.

    Each cell runs once per seed; the simulated column is the across-seed
    mean with a 95% half width.
    """
    rows: List[TauTableRow] = []
    analytic: List[ContentionState] = []
    links = []
    for density, threshold, beta_c in cells:
        link = LinkBudget(
            link_template.tx_power_watts,
            link_template.link_distance_m,
            link_template.path_loss_exp,
            link_template.target_sir,
            beta_c,
        )
        links.append(link)
        analytic.append(solve_tau(density, link, backoff, threshold, cfg))

    sims: List[Optional[List[float]]] = [None] * len(cells)
    if not skip_sim:
        tasks = []
        for idx, ((density, threshold, beta_c), link) in enumerate(zip(cells, links)):
            link_tuple = (
                link.tx_power_watts, link.link_distance_m, link.path_loss_exp,
                link.target_sir, link.control_target_sir,
            )
            for seed in seeds:
                tasks.append(
                    (idx, (density, link_tuple, backoff.initial_window,
                           backoff.max_stage, threshold, region.side_m,
                           region.wraparound, slots, seed))
                )
        if jobs > 1 and len(tasks) > 1:
            with Pool(processes=jobs) as pool:
                results = pool.map(_mac_worker, [t[1] for t in tasks])
        else:
            results = [_mac_worker(t[1]) for t in tasks]
        sims = [[] for _ in cells]
        for (idx, _), tau_hat in zip(tasks, results):
            sims[idx].append(tau_hat)

    for i, (density, threshold, beta_c) in enumerate(cells):
        if sims[i] is None:
            tau_sim = ci = None
        else:
            vals = np.asarray(sims[i])
            tau_sim = float(vals.mean())
            ci = float(1.96 * vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        rows.append(
            TauTableRow(
                density=density,
                threshold_watts=threshold,
                control_target_sir=beta_c,
                tau_analytic=analytic[i].tau,
                tau_sim=tau_sim,
                tau_sim_ci95=ci,
            )
        )
    return rows
