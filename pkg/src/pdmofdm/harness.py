"""Run configuration, frame pipeline, Monte-Carlo sweeps and file outputs.

A run simulates whole OFDM frames.  Per frame, the transmitter maps PRBS
bits onto two QPSK branches per polarization, superposes the branch grids
at the configured power split, spreads, frames and modulates; the channel
gets a per-frame derived seed; the receiver synchronizes, compensates CFO,
estimates and inverts the 2x2 channel, tracks the common phase and
despreads before branch detection.

Seeds derive from the master seed and the frame index only, never from the
sweep axis value or detection method, so sweep points see matched noise
(common random numbers) and method comparisons are paired.

The demodulation window is advanced a few samples into the cyclic prefix
(and the transmitted stream padded with short zero guards) so the
anti-causal half of the dispersion response stays inside each symbol's
window; the resulting linear phase is absorbed by channel estimation.
"""

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bitsource import BitBlock, PrbsState, prbs_next, split_branches
from .channel import ChannelConfig, DualPolStream, cd_delay_spread_s, run_channel
from .constellation import map_qpsk
from .errors import ConfigError, PdmOfdmError
from .ofdm import (
    OfdmConfig,
    SampleStream,
    SymbolGrid,
    TrainingPlan,
    build_frame,
    demodulate,
    despread,
    dft_spread,
    make_training_plan,
    modulate,
)
from .pdm import PowerPlan, plan_from_pdr, superpose_grids
from .rx_dsp import (
    ChannelEstimate,
    compensate_cfo,
    equalize,
    estimate_channel,
    estimate_cfo,
    recover_phase,
    sync_timing,
)
from .sic import POL_NAMES, BranchCount, DetectionReport, count_errors, detect_hierarchical, detect_sic

log = logging.getLogger(__name__)

FEC_LIMIT = 3.8e-3
GUARD_SAMPLES = 16
TIMING_ADVANCE = 8
SWEEP_AXES = ("pdr", "snr_db", "osnr_db", "fiber_length_km")
TAP_NAMES = ("post_despread", "post_equalize", "branch_residual")

_WILSON_Z = 1.959963984540054  # two-sided 95%


@dataclass
class RunConfig:
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    pdr: float = 4.0
    method: str = "sic"
    frames: int = 2
    seed: int = 1
    bands: int = 3
    span_length_km: float = 40.0
    span_snr_db: float = 20.0

    def __post_init__(self):
        if self.method not in ("sic", "hierarchical"):
            raise ConfigError(f"unknown detection method {self.method!r}")
        if self.frames < 1:
            raise ConfigError("need at least one frame")
        plan = self.plan()  # validates pdr
        bits = self.bits_per_branch()
        if bits < 100 / FEC_LIMIT:
            log.warning(
                "bit budget %d per branch gives fewer than 100 errors at the "
                "%.1e FEC limit; intervals will be wide",
                bits,
                FEC_LIMIT,
            )

    def plan(self) -> PowerPlan:
        return plan_from_pdr(self.pdr)

    def bits_per_branch(self) -> int:
        """Payload bits per branch per run, both polarizations."""
        o = self.ofdm
        return 2 * o.n_data * 2 * o.n_payload * self.frames


# -- flat key=value config files ------------------------------------------

CONFIG_DEFAULTS = {
    "n_fft": 512,
    "n_data_subcarriers": 232,
    "cp_len": 64,
    "frame_symbols": 140,
    "training_symbols": 15,
    "sample_rate_hz": 12e9,
    "dft_spread": True,
    "pdr": 4.0,
    "fiber_length_km": 0.0,
    "dispersion_ps_nm_km": 17.0,
    "wavelength_nm": 1550.0,
    "pol_rotation_rad": 0.0,
    "pol_phase_rad": 0.0,
    "linewidth_hz": 100e3,
    "freq_offset_hz": 0.0,
    "snr_db": math.inf,
    "osnr_db": None,
    "method": "sic",
    "frames": 2,
    "seed": 1,
    "bands": 3,
    "span_length_km": 40.0,
    "span_snr_db": 20.0,
}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in ("method",):
        return raw
    if key in ("dft_spread",):
        if raw.lower() in ("true", "1", "on", "yes"):
            return True
        if raw.lower() in ("false", "0", "off", "no"):
            return False
        raise ConfigError(f"{key} must be a boolean, got {raw!r}")
    if raw.lower() in ("none", "unset"):
        return None
    try:
        if key in ("n_fft", "n_data_subcarriers", "cp_len", "frame_symbols",
                   "training_symbols", "frames", "seed", "bands"):
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from exc


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` config file ('#' starts a comment)."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def make_run_config(overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from the defaults plus override key/values."""
    kv = dict(CONFIG_DEFAULTS)
    for key, val in (overrides or {}).items():
        if key not in CONFIG_DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        kv[key] = val if not isinstance(val, str) else _parse_value(key, val)
    # An OSNR specification displaces the default SNR one.
    if kv.get("osnr_db") is not None and "snr_db" not in (overrides or {}):
        kv["snr_db"] = None
    ofdm = OfdmConfig(
        n_fft=kv["n_fft"],
        n_data=kv["n_data_subcarriers"],
        cp_len=kv["cp_len"],
        n_frame=kv["frame_symbols"],
        n_ts=kv["training_symbols"],
        sample_rate=kv["sample_rate_hz"],
        dft_spread=kv["dft_spread"],
    )
    chan = ChannelConfig(
        fiber_length_km=kv["fiber_length_km"],
        dispersion_ps_nm_km=kv["dispersion_ps_nm_km"],
        wavelength_nm=kv["wavelength_nm"],
        pol_rotation_rad=kv["pol_rotation_rad"],
        pol_phase_rad=kv["pol_phase_rad"],
        linewidth_hz=kv["linewidth_hz"],
        freq_offset_hz=kv["freq_offset_hz"],
        snr_db=kv["snr_db"],
        osnr_db=kv["osnr_db"],
        signal_bandwidth_hz=ofdm.occupied_bandwidth,
        seed=kv["seed"],
    )
    return RunConfig(
        ofdm=ofdm,
        channel=chan,
        pdr=kv["pdr"],
        method=kv["method"],
        frames=kv["frames"],
        seed=kv["seed"],
        bands=kv["bands"],
        span_length_km=kv["span_length_km"],
        span_snr_db=kv["span_snr_db"],
    )


def config_items(cfg: RunConfig) -> list[tuple[str, str]]:
    """Canonical flat key/value echo of a RunConfig (hash input)."""
    o, c = cfg.ofdm, cfg.channel
    items = [
        ("n_fft", o.n_fft),
        ("n_data_subcarriers", o.n_data),
        ("cp_len", o.cp_len),
        ("frame_symbols", o.n_frame),
        ("training_symbols", o.n_ts),
        ("sample_rate_hz", o.sample_rate),
        ("dft_spread", o.dft_spread),
        ("pdr", cfg.pdr),
        ("fiber_length_km", c.fiber_length_km),
        ("dispersion_ps_nm_km", c.dispersion_ps_nm_km),
        ("wavelength_nm", c.wavelength_nm),
        ("pol_rotation_rad", c.pol_rotation_rad),
        ("pol_phase_rad", c.pol_phase_rad),
        ("linewidth_hz", c.linewidth_hz),
        ("freq_offset_hz", c.freq_offset_hz),
        ("snr_db", c.snr_db),
        ("osnr_db", c.osnr_db),
        ("method", cfg.method),
        ("frames", cfg.frames),
        ("seed", cfg.seed),
        ("bands", cfg.bands),
        ("span_length_km", cfg.span_length_km),
        ("span_snr_db", cfg.span_snr_db),
    ]
    return [(k, repr(v)) for k, v in items]


def config_hash(cfg: RunConfig) -> str:
    text = "\n".join(f"{k}={v}" for k, v in config_items(cfg))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- metrics ----------------------------------------------------------------

def wilson_interval(errors: int, bits: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if bits == 0:
        return (0.0, 1.0)
    p = errors / bits
    denom = 1.0 + z * z / bits
    center = (p + z * z / (2 * bits)) / denom
    half = z * math.sqrt(p * (1 - p) / bits + z * z / (4 * bits * bits)) / denom
    return (max(center - half, 0.0), min(center + half, 1.0))


# -- frame pipeline ---------------------------------------------------------

@dataclass
class FrameRun:
    """Everything produced by one simulated frame."""

    composite: np.ndarray  # (2, n_data, n_payload) despread composite payload
    equalized: np.ndarray  # (2, n_data, n_payload) pre-despread
    truth: list[BitBlock]
    estimate: ChannelEstimate
    tx_grids: np.ndarray  # (n_branches, 2, n_data, n_payload) branch symbols


def transmit_frame(
    cfg: RunConfig, plan: PowerPlan, prbs: PrbsState, tplan: TrainingPlan
) -> tuple[DualPolStream, list[BitBlock], np.ndarray]:
    """One frame: PRBS -> branch grids -> superpose -> spread -> frame -> modulate."""
    o = cfg.ofdm
    lane_bits = 2 * o.n_data * o.n_payload
    block = prbs_next(prbs, lane_bits * plan.n_branches * 2)
    lanes = split_branches(block, plan.n_branches, 2)
    tx_grids = np.empty((plan.n_branches, 2, o.n_data, o.n_payload), np.complex128)
    streams = []
    for pol in range(2):
        branch_grids = []
        for blk in lanes:
            if blk.pol_id != pol:
                continue
            entries = map_qpsk(blk.bits).reshape((o.n_data, o.n_payload), order="F")
            tx_grids[blk.branch_id - 1, pol] = entries
            branch_grids.append(SymbolGrid(entries, pol))
        comp = superpose_grids(branch_grids, plan)
        if o.dft_spread:
            comp = dft_spread(comp)
        framed, _ = build_frame(comp, o, tplan.seed)
        streams.append(modulate(framed, o))
    guard = np.zeros(GUARD_SAMPLES, dtype=np.complex128)
    padded = [
        SampleStream(np.concatenate([guard, s.samples, guard]), o.sample_rate)
        for s in streams
    ]
    return DualPolStream(*padded), lanes, tx_grids


def receive_frame(
    cfg: RunConfig, rx: DualPolStream, tplan: TrainingPlan, plan: PowerPlan
) -> tuple[np.ndarray, np.ndarray, ChannelEstimate]:
    """Sync, CFO, demodulate, estimate, equalize, phase-recover, despread."""
    o = cfg.ofdm
    offset = sync_timing(rx, tplan)
    cfo = estimate_cfo(rx, tplan, offset)
    rx = compensate_cfo(rx, cfo)
    start = max(offset - TIMING_ADVANCE, 0)
    window = rx.as_array()[:, start : start + o.frame_len]
    if window.shape[1] < o.frame_len:
        pad = o.frame_len - window.shape[1]
        window = np.pad(window, ((0, 0), (0, pad)))
    grid = np.stack(
        [demodulate(SampleStream(window[p], o.sample_rate), o).entries for p in range(2)]
    )
    est = estimate_channel(grid[:, :, 1 : o.n_ts], tplan)
    est.cfo_hat = cfo
    payload = grid[:, :, o.n_ts :]
    eq = equalize(payload, est)
    eq = recover_phase(eq, plan, est, o)
    if o.dft_spread:
        comp = np.stack([despread(SymbolGrid(eq[p])).entries for p in range(2)])
    else:
        comp = eq
    return comp, eq, est


def detect(composite: np.ndarray, plan: PowerPlan, method: str) -> DetectionReport:
    if method == "sic":
        return detect_sic(composite, plan)
    if method == "hierarchical":
        return detect_hierarchical(composite, plan)
    raise ConfigError(f"unknown detection method {method!r}")


def frame_seed(master: int, index: int) -> int:
    """Channel seed for frame ``index``: independent of axis value and method."""
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def simulate_frame(cfg: RunConfig, prbs: PrbsState, index: int, tplan: TrainingPlan) -> FrameRun:
    plan = cfg.plan()
    tx, truth, tx_grids = transmit_frame(cfg, plan, prbs, tplan)
    chan_cfg = replace(
        cfg.channel,
        seed=frame_seed(cfg.seed, index),
        signal_bandwidth_hz=cfg.ofdm.occupied_bandwidth,
    )
    rx = run_channel(tx, chan_cfg)
    composite, equalized, est = receive_frame(cfg, rx, tplan, plan)
    return FrameRun(composite, equalized, truth, est, tx_grids)


# -- results ----------------------------------------------------------------

@dataclass
class LaneResult:
    branch: int
    pol: str
    errors: int
    bits: int
    evm: float

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")


@dataclass
class PointResult:
    axis_value: float
    lanes: list[LaneResult]
    warnings: list = field(default_factory=list)

    def lane(self, branch: int, pol: str) -> LaneResult:
        for lr in self.lanes:
            if lr.branch == branch and lr.pol == pol:
                return lr
        raise KeyError((branch, pol))

    def branch_totals(self) -> dict[int, BranchCount]:
        out: dict[int, BranchCount] = {}
        for lr in self.lanes:
            out.setdefault(lr.branch, BranchCount()).add(lr.errors, lr.bits)
        return out


@dataclass
class SweepResult:
    axis: str
    points: list[PointResult]
    config_hash: str
    seed: int
    method: str
    version: str = __version__
    failed: list = field(default_factory=list)  # (axis value, stage, message)

    def values(self) -> list[float]:
        return [p.axis_value for p in self.points]

    def branch_ber(self, branch: int) -> list[float]:
        out = []
        for p in self.points:
            totals = p.branch_totals()[branch]
            out.append(totals.ber)
        return out


def run_once(cfg: RunConfig) -> tuple[PointResult, DetectionReport]:
    """Simulate ``cfg.frames`` frames and aggregate lane error counts."""
    plan = cfg.plan()
    tplan = make_training_plan(cfg.ofdm, cfg.seed)
    prbs = PrbsState()
    counts: dict[tuple[int, int], BranchCount] = {}
    evm_sq: dict[tuple[int, int], list[float]] = {}
    warnings: list = []
    report = None
    for index in range(cfg.frames):
        run = simulate_frame(cfg, prbs, index, tplan)
        report = detect(run.composite, plan, cfg.method)
        for key, cnt in count_errors(report, run.truth).items():
            counts.setdefault(key, BranchCount()).add(cnt.errors, cnt.bits)
        weights = plan.weights()
        for i in range(plan.n_branches):
            resid = report.residuals[i]
            for pol in range(2):
                err = np.mean(np.abs(resid[pol]) ** 2) / weights[i] ** 2
                evm_sq.setdefault((i + 1, pol), []).append(err)
        warnings.extend(run.estimate.warnings)
    lanes = [
        LaneResult(
            branch=branch,
            pol=POL_NAMES[pol],
            errors=counts[(branch, pol)].errors,
            bits=counts[(branch, pol)].bits,
            evm=float(np.sqrt(np.mean(evm_sq[(branch, pol)]))),
        )
        for (branch, pol) in sorted(counts)
    ]
    value = cfg.channel.snr_db if cfg.channel.snr_db is not None else cfg.channel.osnr_db
    return PointResult(axis_value=value, lanes=lanes, warnings=warnings), report


def _config_for_point(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "pdr":
        return replace(cfg, pdr=value)
    if axis == "snr_db":
        return replace(cfg, channel=replace(cfg.channel, snr_db=value, osnr_db=None))
    if axis == "osnr_db":
        return replace(cfg, channel=replace(cfg.channel, snr_db=None, osnr_db=value))
    if axis == "fiber_length_km":
        # Per-span noise accumulation: each 40 km span adds the configured
        # noise increment, i.e. SNR drops by 10*log10(n_spans).
        n_spans = max(1, round(value / cfg.span_length_km))
        snr = cfg.span_snr_db - 10 * math.log10(n_spans)
        return replace(
            cfg,
            channel=replace(
                cfg.channel, fiber_length_km=value, snr_db=snr, osnr_db=None
            ),
        )
    raise ConfigError(f"unknown sweep axis {axis!r}; choose one of {SWEEP_AXES}")


def run_sweep(cfg: RunConfig, axis: str, values) -> SweepResult:
    """Run one point per axis value; failures are recorded, not fatal."""
    values = sorted(float(v) for v in values)
    if len(values) < 2:
        raise ConfigError("a sweep needs at least 2 axis values")
    result = SweepResult(
        axis=axis,
        points=[],
        config_hash=config_hash(cfg),
        seed=cfg.seed,
        method=cfg.method,
    )
    for value in values:
        point_cfg = _config_for_point(cfg, axis, value)
        try:
            point, _ = run_once(point_cfg)
        except PdmOfdmError as exc:
            log.error("sweep point %s=%s failed in %s: %s", axis, value, exc.stage, exc)
            result.failed.append((value, exc.stage, str(exc)))
            continue
        point.axis_value = value
        result.points.append(point)
    return result


def required_axis_value(result: SweepResult, branch: int, target: float = FEC_LIMIT):
    """Axis value where a branch BER crosses ``target``.

    Log-linear interpolation between the bracketing sweep points, assuming
    BER falls as the axis value rises.  Returns None when the sweep never
    crosses the target.
    """
    xs = result.values()
    bers = result.branch_ber(branch)
    for (x0, b0), (x1, b1) in zip(zip(xs, bers), zip(xs[1:], bers[1:])):
        if b0 >= target >= b1:
            if b1 <= 0.0:
                b1 = min(b0 / 1e3, target / 10)
            if b0 == b1:
                return x0
            frac = (math.log(b0) - math.log(target)) / (math.log(b0) - math.log(b1))
            return x0 + frac * (x1 - x0)
    return None


# -- file outputs -----------------------------------------------------------

def sweep_to_csv(result: SweepResult, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(
            f"# axis={result.axis} method={result.method} seed={result.seed} "
            f"config={result.config_hash} version={result.version}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(
            ["axis_value", "branch", "pol", "ber", "errors", "bits", "ci_lo", "ci_hi", "evm"]
        )
        for point in result.points:
            for lr in point.lanes:
                lo, hi = wilson_interval(lr.errors, lr.bits)
                writer.writerow(
                    [
                        repr(point.axis_value),
                        lr.branch,
                        lr.pol,
                        repr(lr.ber),
                        lr.errors,
                        lr.bits,
                        repr(lo),
                        repr(hi),
                        repr(lr.evm),
                    ]
                )


def sweep_from_csv(path) -> SweepResult:
    """Parse a sweep CSV back into a SweepResult (exact round-trip)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    meta = {}
    for token in lines[0].lstrip("# ").split():
        key, _, val = token.partition("=")
        meta[key] = val
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    header, rows = rows[0], rows[1:]
    assert header[0] == "axis_value"
    points: dict[float, PointResult] = {}
    for row in rows:
        value = float(row[0])
        point = points.setdefault(value, PointResult(axis_value=value, lanes=[]))
        point.lanes.append(
            LaneResult(
                branch=int(row[1]),
                pol=row[2],
                errors=int(row[4]),
                bits=int(row[5]),
                evm=float(row[8]),
            )
        )
    return SweepResult(
        axis=meta["axis"],
        points=[points[v] for v in sorted(points)],
        config_hash=meta["config"],
        seed=int(meta["seed"]),
        method=meta["method"],
        version=meta["version"],
    )


def write_run_json(cfg: RunConfig, path, extra: dict | None = None) -> None:
    payload = {
        "config": {k: v for k, v in config_items(cfg)},
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "net_rate_bps": compute_rate(cfg),
    }
    payload.update(extra or {})
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- constellation taps -----------------------------------------------------

def dump_constellation(cfg: RunConfig, tap: str) -> dict[tuple[int, str], np.ndarray]:
    """Complex samples at a receiver tap, keyed by (branch, pol).

    Branch 0 denotes the composite (not yet power-de-multiplexed) signal for
    taps ahead of branch detection.
    """
    if tap not in TAP_NAMES:
        raise ConfigError(f"unknown tap {tap!r}; choose one of {TAP_NAMES}")
    plan = cfg.plan()
    tplan = make_training_plan(cfg.ofdm, cfg.seed)
    prbs = PrbsState()
    run = simulate_frame(cfg, prbs, 0, tplan)
    out: dict[tuple[int, str], np.ndarray] = {}
    if tap == "post_despread":
        for pol in range(2):
            out[(0, POL_NAMES[pol])] = run.composite[pol].ravel()
    elif tap == "post_equalize":
        for pol in range(2):
            out[(0, POL_NAMES[pol])] = run.equalized[pol].ravel()
    else:  # branch_residual: detection-stage input, branch gain removed
        report = detect(run.composite, plan, cfg.method)
        weights = plan.weights()
        stage_in = [run.composite] + report.residuals[:-1]
        for i in range(plan.n_branches):
            for pol in range(2):
                out[(i + 1, POL_NAMES[pol])] = stage_in[i][pol].ravel() / weights[i]
    return out


def constellation_to_csv(points: dict[tuple[int, str], np.ndarray], path, cfg: RunConfig) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# config={config_hash(cfg)} seed={cfg.seed} version={__version__}\n")
        writer = csv.writer(fh)
        writer.writerow(["i", "q", "branch", "pol"])
        for (branch, pol), vals in sorted(points.items()):
            for v in vals:
                writer.writerow([repr(float(v.real)), repr(float(v.imag)), branch, pol])


# -- headline rate ----------------------------------------------------------

def compute_rate(cfg: RunConfig, bands: int | None = None) -> float:
    """Net bit rate: bands x pols x branches x bits/symbol x symbol rate
    x subcarrier fill x payload fraction."""
    o = cfg.ofdm
    n_bands = cfg.bands if bands is None else bands
    plan = cfg.plan()
    return (
        n_bands
        * 2  # polarizations
        * plan.n_branches
        * 2  # bits per QPSK symbol
        * o.sample_rate
        * o.n_data
        / o.symbol_len
        * o.n_payload
        / o.n_frame
    )
