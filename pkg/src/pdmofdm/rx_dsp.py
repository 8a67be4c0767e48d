"""Receiver synchronization, channel estimation, equalization, phase recovery.

Timing sync runs the half-repetition autocorrelation metric of the timing
symbol.  That metric is flat across the cyclic prefix (every window fully
inside the CP-extended symbol correlates perfectly), so the exact frame
start inside the plateau is resolved by cross-correlating with the known
timing waveform.

Channel estimation reads the 2x2 per-subcarrier response directly off the
polarization-alternating training columns; equalization applies the exact
per-subcarrier inverse (the zero-forcing pseudo-inverse of a square
invertible matrix).  Phase recovery tracks the common phase error symbol by
symbol with decision-directed estimates on the composite constellation,
iterated to a fixed point so a constant rotation below the decision margin
is removed exactly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import nearest_composite
from .channel import DualPolStream
from .errors import EqualizationError, EstimationError, SyncError
from .ofdm import OfdmConfig, TrainingPlan

SYNC_THRESHOLD = 0.5
_CPE_MAX_ITER = 12
_CPE_TOL = 1e-12


@dataclass
class ChannelEstimate:
    """Receiver view of the channel: per-subcarrier 2x2 response and phase."""

    h_matrix: np.ndarray  # (n_data, 2, 2)
    cfo_hat: float = 0.0
    phase_track: np.ndarray | None = None  # (n_symbols,) common phase per symbol
    cond: np.ndarray | None = None  # (n_data,) condition numbers
    warnings: list = field(default_factory=list)


def _sliding_sums(x: np.ndarray, width: int) -> np.ndarray:
    """Sums of x over every contiguous window of ``width`` samples."""
    c = np.concatenate([[0], np.cumsum(x)])
    return c[width:] - c[:-width]


def sync_timing(dp: DualPolStream, plan: TrainingPlan) -> int:
    """Locate the frame start (first CP sample of the timing symbol)."""
    cfg = plan.cfg
    n = len(dp)
    if n < cfg.frame_len:
        raise SyncError(f"stream of {n} samples is shorter than one frame")
    half = cfg.n_fft // 2
    arr = dp.as_array()

    # Half-repetition metric, summed over polarizations.
    corr = np.zeros(n - 2 * half + 1, dtype=np.complex128)
    energy = np.zeros(n - 2 * half + 1)
    for pol in range(2):
        r = arr[pol]
        prod = np.conj(r[:-half]) * r[half:]
        corr += _sliding_sums(prod, half)[: corr.size]
        energy += _sliding_sums(np.abs(r[half:]) ** 2, half)[: energy.size]
    metric = np.zeros_like(energy)
    ok = energy > 1e-30
    metric[ok] = np.abs(corr[ok]) ** 2 / energy[ok] ** 2

    coarse = int(np.argmax(metric))
    if metric[coarse] < SYNC_THRESHOLD:
        raise SyncError(
            f"no timing structure found (peak metric {metric[coarse]:.3f} < "
            f"{SYNC_THRESHOLD})"
        )

    # The metric is maximal everywhere on [start, start + cp_len]; pin the
    # start with a matched filter against the known timing waveform.
    lo = max(coarse - cfg.cp_len, 0)
    hi = min(coarse + cfg.cp_len, n - cfg.symbol_len)
    best_d, best_v = lo, -1.0
    for d in range(lo, hi + 1):
        v = 0.0
        for pol in range(2):
            seg = arr[pol][d : d + cfg.symbol_len]
            e = np.vdot(seg, seg).real
            if e <= 0:
                continue
            v += np.abs(np.vdot(plan.ts_time[pol], seg)) ** 2 / e
        if v > best_v:
            best_v, best_d = v, d
    return best_d


def estimate_cfo(dp: DualPolStream, plan: TrainingPlan, offset: int) -> float:
    """Fractional CFO from the phase between the timing-symbol halves.

    Capture range is +/- sample_rate / n_fft; offsets beyond it alias.
    """
    cfg = plan.cfg
    half = cfg.n_fft // 2
    body = offset + cfg.cp_len
    arr = dp.as_array()
    acc = 0.0 + 0.0j
    for pol in range(2):
        a = arr[pol][body : body + half]
        b = arr[pol][body + half : body + 2 * half]
        acc += np.vdot(a, b)  # conj(a) . b
    return float(np.angle(acc) * dp.sample_rate / (2 * math.pi * half))


def compensate_cfo(dp: DualPolStream, cfo_hz: float) -> DualPolStream:
    """Remove a carrier frequency offset (time reference: stream start)."""
    if cfo_hz == 0.0:
        return dp
    t = np.arange(len(dp)) / dp.sample_rate
    rot = np.exp(-2j * math.pi * cfo_hz * t)
    return DualPolStream.from_array(dp.as_array() * rot, dp.sample_rate)


def estimate_channel(rx_ts: np.ndarray, plan: TrainingPlan) -> ChannelEstimate:
    """Per-subcarrier 2x2 response from the alternating training columns.

    ``rx_ts``: (2, n_data, n_ts - 1) received MIMO training columns, already
    synchronized and CFO-compensated.  Each received column divided by its
    known transmitted column fills one column of H; estimates average over
    the available repetitions.
    """
    cfg = plan.cfg
    n_mimo = plan.n_mimo
    if rx_ts.shape != (2, cfg.n_data, n_mimo):
        raise EstimationError(
            f"expected training block of shape (2, {cfg.n_data}, {n_mimo}), "
            f"got {rx_ts.shape}"
        )
    h = np.zeros((cfg.n_data, 2, 2), dtype=np.complex128)
    counts = [0, 0]
    for j in range(n_mimo):
        a = plan.mimo_active_pol(j)
        known = plan.ts_freq[a, :, 1 + j]
        low = np.abs(known) < 1e-12
        if np.any(low):
            k = int(np.argmax(low))
            raise EstimationError(
                f"training power below numerical floor on subcarrier {k}"
            )
        h[:, 0, a] += rx_ts[0, :, j] / known
        h[:, 1, a] += rx_ts[1, :, j] / known
        counts[a] += 1
    if min(counts) == 0:
        raise EstimationError("training block never activates one polarization")
    h[:, :, 0] /= counts[0]
    h[:, :, 1] /= counts[1]
    sv = np.linalg.svd(h, compute_uv=False)
    cond = sv[:, 0] / np.maximum(sv[:, 1], np.finfo(float).tiny)
    return ChannelEstimate(h_matrix=h, cond=cond)


def equalize(grid: np.ndarray, est: ChannelEstimate) -> np.ndarray:
    """Zero-forcing equalization: apply the per-subcarrier 2x2 inverse.

    ``grid``: (2, n_data, n_symbols) received dual-polarization columns.
    """
    h = est.h_matrix
    det = h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] * h[:, 1, 0]
    scale = np.abs(h).max(axis=(1, 2)) ** 2
    bad = np.abs(det) <= 1e-12 * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad):
        raise EqualizationError(
            f"channel estimate singular at subcarrier {int(np.argmax(bad))}"
        )
    inv = np.empty_like(h)
    inv[:, 0, 0] = h[:, 1, 1]
    inv[:, 0, 1] = -h[:, 0, 1]
    inv[:, 1, 0] = -h[:, 1, 0]
    inv[:, 1, 1] = h[:, 0, 0]
    inv /= det[:, None, None]
    return np.einsum("kij,jkt->ikt", inv, grid)


def recover_phase(
    grid: np.ndarray,
    plan,
    est: ChannelEstimate,
    cfg: OfdmConfig,
) -> np.ndarray:
    """Track and remove the common phase error across payload symbols.

    ``grid``: (2, n_data, n_symbols) equalized columns, still DFT-spread
    when spreading is enabled.  Decisions are made in the despread domain
    against the composite constellation of the power ``plan``; the phase
    estimate is iterated within each symbol until the decisions are
    self-consistent, then the correction is applied in the input domain
    (a common rotation commutes with the unitary despreading).

    Phase jumps above pi/2 between adjacent symbols are recorded on
    ``est.warnings`` as cycle-slip candidates.
    """
    n_sym = grid.shape[2]
    out = np.empty_like(grid)
    track = np.empty(n_sym)
    phi = 0.0
    for t in range(n_sym):
        col = grid[:, :, t]
        z = np.fft.ifft(col, axis=1, norm="ortho") if cfg.dft_spread else col
        prev = phi
        for _ in range(_CPE_MAX_ITER):
            zr = z * np.exp(-1j * phi)
            d = nearest_composite(zr, plan)
            delta = float(np.angle(np.sum(zr * np.conj(d))))
            phi += delta
            if abs(delta) < _CPE_TOL:
                break
        if abs(phi - prev) > math.pi / 2:
            est.warnings.append(
                f"cycle slip candidate at symbol {t}: "
                f"phase step {phi - prev:+.3f} rad"
            )
        track[t] = phi
        out[:, :, t] = col * np.exp(-1j * phi)
    est.phase_track = track
    return out
