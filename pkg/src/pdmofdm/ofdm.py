"""DFT-spread OFDM modulation, demodulation and frame assembly.

Conventions fixed here and relied on by the receiver:

* FFT/IFFT are unitary (``norm="ortho"``), so Parseval holds exactly.
* The ``n_data`` data subcarriers sit symmetrically around DC and exclude
  it: FFT bins -n_data/2 .. -1, +1 .. +n_data/2, listed negative
  frequencies first.
* ``modulate``/``demodulate`` are pure structure (zero-pad, IFFT, cyclic
  prefix and their inverses).  DFT spreading is a separate unitary step so
  the transmit chain composes ``dft_spread`` then ``modulate``, and the
  receive chain applies ``despread`` only after equalization.

A frame is ``n_ts`` training columns followed by payload columns.  Training
column 0 carries energy on even bins only, which makes its time-domain body
two identical halves -- that half-repetition drives timing sync and
fractional CFO estimation.  The remaining training columns alternate
between the polarizations (odd columns X-active, even columns Y-active) so
the 2x2 channel can be read off directly.
"""

from dataclasses import dataclass, field

import numpy as np

from .constellation import QPSK_POINTS
from .errors import FramingError


@dataclass(frozen=True)
class OfdmConfig:
    n_fft: int = 512
    n_data: int = 232
    cp_len: int = 64
    n_frame: int = 140
    n_ts: int = 15
    sample_rate: float = 12e9
    dft_spread: bool = True

    def __post_init__(self):
        if not 0 < self.n_data <= self.n_fft - 2:
            raise FramingError(
                f"n_data={self.n_data} must fit the DC-free bins of n_fft={self.n_fft}"
            )
        if self.n_data % 2 != 0:
            raise FramingError("n_data must be even (symmetric around DC)")
        if not 0 <= self.cp_len < self.n_fft:
            raise FramingError(f"cp_len={self.cp_len} must be < n_fft")
        if not 0 < self.n_ts < self.n_frame:
            raise FramingError("need 0 < n_ts < n_frame")

    @property
    def symbol_len(self) -> int:
        return self.n_fft + self.cp_len

    @property
    def n_payload(self) -> int:
        return self.n_frame - self.n_ts

    @property
    def frame_len(self) -> int:
        return self.n_frame * self.symbol_len

    @property
    def occupied_bandwidth(self) -> float:
        return self.n_data / self.n_fft * self.sample_rate

    def data_bins(self) -> np.ndarray:
        """FFT bin indices of the data subcarriers, negative side first."""
        h = self.n_data // 2
        return np.r_[self.n_fft - h : self.n_fft, 1 : h + 1]


@dataclass
class SymbolGrid:
    """Frequency-domain payload: (n_data, n_symbols) complex matrix."""

    entries: np.ndarray
    pol_id: int = 0

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        if self.entries.ndim != 2:
            raise FramingError(f"grid must be 2-D, got shape {self.entries.shape}")

    @property
    def n_symbols(self) -> int:
        return self.entries.shape[1]


@dataclass
class SampleStream:
    """Complex baseband samples at the simulation sample rate."""

    samples: np.ndarray
    sample_rate: float = 12e9

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class TrainingPlan:
    """Known training symbols shared by transmitter and receiver.

    ``ts_freq``: (2, n_data, n_ts) frequency-domain training columns per
    polarization; column 0 is the timing symbol, columns 1.. alternate
    X-active / Y-active with the inactive polarization zeroed.
    ``ts_time``: (2, symbol_len) time-domain timing symbol per polarization.
    """

    ts_freq: np.ndarray
    ts_time: np.ndarray
    cfg: OfdmConfig
    seed: int = 0

    @property
    def n_mimo(self) -> int:
        return self.cfg.n_ts - 1

    def mimo_active_pol(self, j: int) -> int:
        """Active polarization of MIMO training column j (0-based)."""
        return j % 2


def dft_spread(grid: SymbolGrid) -> SymbolGrid:
    """Multiply each column by the unitary DFT (energy preserving)."""
    return SymbolGrid(np.fft.fft(grid.entries, axis=0, norm="ortho"), grid.pol_id)


def despread(grid: SymbolGrid) -> SymbolGrid:
    """Inverse of :func:`dft_spread`."""
    return SymbolGrid(np.fft.ifft(grid.entries, axis=0, norm="ortho"), grid.pol_id)


def modulate(grid: SymbolGrid, cfg: OfdmConfig) -> SampleStream:
    """Map subcarrier symbols to time samples: zero-pad, IFFT, prepend CP."""
    n_sym = grid.n_symbols
    if grid.entries.shape[0] != cfg.n_data:
        raise FramingError(
            f"grid has {grid.entries.shape[0]} rows, config expects {cfg.n_data}"
        )
    spectrum = np.zeros((cfg.n_fft, n_sym), dtype=np.complex128)
    spectrum[cfg.data_bins(), :] = grid.entries
    body = np.fft.ifft(spectrum, axis=0, norm="ortho")
    with_cp = np.vstack([body[cfg.n_fft - cfg.cp_len :, :], body])
    return SampleStream(with_cp.T.reshape(-1), cfg.sample_rate)


def demodulate(stream: SampleStream, cfg: OfdmConfig) -> SymbolGrid:
    """Strip CPs, FFT, select the data subcarriers.

    Inverse spreading is deliberately not applied here; it follows
    equalization in the receive chain.
    """
    n = len(stream)
    if n == 0 or n % cfg.symbol_len != 0:
        raise FramingError(
            f"stream length {n} is not a whole number of {cfg.symbol_len}-sample symbols"
        )
    sym = stream.samples.reshape(-1, cfg.symbol_len)[:, cfg.cp_len :]
    spectrum = np.fft.fft(sym, axis=1, norm="ortho")
    return SymbolGrid(spectrum[:, cfg.data_bins()].T)


def make_training_plan(cfg: OfdmConfig, seed: int) -> TrainingPlan:
    """Generate the deterministic dual-polarization training block."""
    rng = np.random.default_rng(seed)
    bins = cfg.data_bins()
    even = bins % 2 == 0
    n_even = int(even.sum())
    ts_freq = np.zeros((2, cfg.n_data, cfg.n_ts), dtype=np.complex128)
    # Timing symbol: even bins only => half-repeated time body.  Scaled so
    # its column energy matches a fully loaded column.
    scale = np.sqrt(cfg.n_data / n_even)
    for pol in range(2):
        ts_freq[pol, even, 0] = scale * QPSK_POINTS[rng.integers(0, 4, n_even)]
    # MIMO training: one polarization active per column, alternating.
    for j in range(cfg.n_ts - 1):
        pol = j % 2
        ts_freq[pol, :, 1 + j] = QPSK_POINTS[rng.integers(0, 4, cfg.n_data)]
    ts_time = np.stack(
        [
            modulate(SymbolGrid(ts_freq[pol, :, :1], pol), cfg).samples
            for pol in range(2)
        ]
    )
    return TrainingPlan(ts_freq=ts_freq, ts_time=ts_time, cfg=cfg, seed=seed)


def build_frame(
    payload: SymbolGrid, cfg: OfdmConfig, seed: int
) -> tuple[SymbolGrid, TrainingPlan]:
    """Prepend the training block to a payload grid for one polarization."""
    if payload.n_symbols != cfg.n_payload:
        raise FramingError(
            f"payload has {payload.n_symbols} columns, frame needs {cfg.n_payload}"
        )
    plan = make_training_plan(cfg, seed)
    entries = np.hstack([plan.ts_freq[payload.pol_id], payload.entries])
    return SymbolGrid(entries, payload.pol_id), plan
