"""Parametric dual-polarization fiber channel.

Stage order is fixed: chromatic dispersion -> polarization mixing ->
frequency offset -> laser phase noise -> AWGN.  Every stage is bypassed
exactly (input returned unchanged) when its parameter is zero / infinite,
and the random stages draw from seed-derived generators so a full channel
run is bit-reproducible and equals the composition of its stages.

Noise loading replaces optical amplifier chains: AWGN is scaled to hit a
target electrical SNR measured on the stream itself, or an OSNR in the
0.1 nm (12.5 GHz) reference bandwidth converted per the dual-polarization
convention snr = osnr * 2 * B_ref / R_s with R_s the occupied signal
bandwidth.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .ofdm import SampleStream

C_LIGHT = 299_792_458.0
OSNR_REF_BANDWIDTH = 12.5e9


@dataclass
class ChannelConfig:
    fiber_length_km: float = 0.0
    dispersion_ps_nm_km: float = 17.0
    wavelength_nm: float = 1550.0
    pol_rotation_rad: float = 0.0
    pol_phase_rad: float = 0.0
    linewidth_hz: float = 100e3
    freq_offset_hz: float = 0.0
    snr_db: float | None = math.inf
    osnr_db: float | None = None
    signal_bandwidth_hz: float = 232 / 512 * 12e9
    seed: int = 0

    def __post_init__(self):
        if (self.snr_db is None) == (self.osnr_db is None):
            raise ConfigError("exactly one of snr_db / osnr_db must be set")
        if self.linewidth_hz < 0:
            raise ConfigError("linewidth must be >= 0")

    def effective_snr_db(self) -> float:
        """Electrical SNR implied by the active noise specification."""
        if self.snr_db is not None:
            return self.snr_db
        return self.osnr_db + 10 * math.log10(
            2 * OSNR_REF_BANDWIDTH / self.signal_bandwidth_hz
        )


@dataclass
class DualPolStream:
    x_pol: SampleStream
    y_pol: SampleStream

    def __post_init__(self):
        if len(self.x_pol) != len(self.y_pol):
            raise ConfigError("polarization streams must have equal length")
        if self.x_pol.sample_rate != self.y_pol.sample_rate:
            raise ConfigError("polarization streams must share the sample rate")

    def __len__(self) -> int:
        return len(self.x_pol)

    @property
    def sample_rate(self) -> float:
        return self.x_pol.sample_rate

    def as_array(self) -> np.ndarray:
        """(2, n) stacked view-copy of both polarizations."""
        return np.stack([self.x_pol.samples, self.y_pol.samples])

    @classmethod
    def from_array(cls, arr: np.ndarray, sample_rate: float) -> "DualPolStream":
        return cls(SampleStream(arr[0], sample_rate), SampleStream(arr[1], sample_rate))


def _rngs(cfg: ChannelConfig) -> tuple[np.random.Generator, np.random.Generator]:
    """Per-stage generators; fixed derivation keeps stage composition exact."""
    phase_seq, noise_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    return np.random.default_rng(phase_seq), np.random.default_rng(noise_seq)


def cd_response(freqs: np.ndarray, cfg: ChannelConfig) -> np.ndarray:
    """All-pass chromatic dispersion transfer function H(f)."""
    lam = cfg.wavelength_nm * 1e-9
    d_si = cfg.dispersion_ps_nm_km * 1e-6  # s/m^2
    length = cfg.fiber_length_km * 1e3
    return np.exp(-1j * math.pi * lam**2 * d_si * length * freqs**2 / C_LIGHT)


def cd_delay_spread_s(cfg: ChannelConfig, bandwidth_hz: float) -> float:
    """Edge-to-edge group delay over a signal band: lambda^2 D L B / c."""
    lam = cfg.wavelength_nm * 1e-9
    d_si = cfg.dispersion_ps_nm_km * 1e-6
    return abs(lam**2 * d_si * cfg.fiber_length_km * 1e3 * bandwidth_hz / C_LIGHT)


def apply_cd(stream: SampleStream, cfg: ChannelConfig) -> SampleStream:
    """Chromatic dispersion as a circular frequency-domain all-pass."""
    if cfg.fiber_length_km == 0.0:
        return SampleStream(stream.samples.copy(), stream.sample_rate)
    freqs = np.fft.fftfreq(len(stream), d=1.0 / stream.sample_rate)
    out = np.fft.ifft(np.fft.fft(stream.samples) * cd_response(freqs, cfg))
    return SampleStream(out, stream.sample_rate)


def jones_matrix(cfg: ChannelConfig) -> np.ndarray:
    theta, delta = cfg.pol_rotation_rad, cfg.pol_phase_rad
    return np.array(
        [
            [np.cos(theta), np.sin(theta) * np.exp(1j * delta)],
            [-np.sin(theta) * np.exp(-1j * delta), np.cos(theta)],
        ]
    )


def apply_pol_mix(dp: DualPolStream, cfg: ChannelConfig) -> DualPolStream:
    """Static unitary polarization rotation (samplewise Jones matrix)."""
    if cfg.pol_rotation_rad == 0.0 and cfg.pol_phase_rad == 0.0:
        return DualPolStream.from_array(dp.as_array(), dp.sample_rate)
    out = jones_matrix(cfg) @ dp.as_array()
    return DualPolStream.from_array(out, dp.sample_rate)


def apply_freq_offset(dp: DualPolStream, cfg: ChannelConfig) -> DualPolStream:
    """Common carrier frequency offset on both polarizations."""
    if cfg.freq_offset_hz == 0.0:
        return DualPolStream.from_array(dp.as_array(), dp.sample_rate)
    t = np.arange(len(dp)) / dp.sample_rate
    rot = np.exp(2j * math.pi * cfg.freq_offset_hz * t)
    return DualPolStream.from_array(dp.as_array() * rot, dp.sample_rate)


def apply_phase_noise(
    dp: DualPolStream, cfg: ChannelConfig, rng: np.random.Generator | None = None
) -> DualPolStream:
    """Wiener laser phase noise, common to both polarizations.

    Increment variance per sample is 2*pi*linewidth*T_s (combined TX+LO
    linewidth, single laser pair).
    """
    if cfg.linewidth_hz == 0.0:
        return DualPolStream.from_array(dp.as_array(), dp.sample_rate)
    if rng is None:
        rng, _ = _rngs(cfg)
    step_var = 2 * math.pi * cfg.linewidth_hz / dp.sample_rate
    phi = np.cumsum(rng.normal(0.0, math.sqrt(step_var), len(dp)))
    return DualPolStream.from_array(dp.as_array() * np.exp(1j * phi), dp.sample_rate)


def apply_awgn(
    dp: DualPolStream, cfg: ChannelConfig, rng: np.random.Generator | None = None
) -> DualPolStream:
    """Circular complex Gaussian noise per polarization at the target SNR."""
    snr_db = cfg.effective_snr_db()
    if math.isinf(snr_db):
        return DualPolStream.from_array(dp.as_array(), dp.sample_rate)
    if rng is None:
        _, rng = _rngs(cfg)
    snr_lin = 10 ** (snr_db / 10)
    arr = dp.as_array()
    out = np.empty_like(arr)
    for pol in range(2):
        power = np.mean(np.abs(arr[pol]) ** 2)
        sigma = math.sqrt(power / snr_lin / 2.0)
        noise = rng.normal(0.0, sigma, len(dp)) + 1j * rng.normal(0.0, sigma, len(dp))
        out[pol] = arr[pol] + noise
    return DualPolStream.from_array(out, dp.sample_rate)


def run_channel(dp: DualPolStream, cfg: ChannelConfig) -> DualPolStream:
    """Full channel: CD, polarization mixing, CFO, phase noise, AWGN."""
    phase_rng, noise_rng = _rngs(cfg)
    dp = DualPolStream(
        apply_cd(dp.x_pol, cfg),
        apply_cd(dp.y_pol, cfg),
    )
    dp = apply_pol_mix(dp, cfg)
    dp = apply_freq_offset(dp, cfg)
    dp = apply_phase_noise(dp, cfg, phase_rng)
    dp = apply_awgn(dp, cfg, noise_rng)
    return dp
