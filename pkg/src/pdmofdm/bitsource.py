"""PRBS-15 bit generation and per-branch bit bookkeeping.

The pseudo-random source is a maximal-length 15-bit LFSR (x^15 + x^14 + 1,
period 2^15 - 1).  Because the sequence is periodic, one canonical period is
tabulated once and every generator state is just an offset into it; this
keeps multi-megabit requests cheap while the state semantics stay exact.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import FramingError, InvalidStateError

PRBS_ORDER = 15
PRBS_PERIOD = 2**PRBS_ORDER - 1
PRBS_TAPS = (15, 14)

_REG_MASK = (1 << PRBS_ORDER) - 1

# Canonical tables (seeded all-ones): output bit and register value at each
# step of one full period.  Built lazily on first use.
_BITS = None
_STATES = None
_INDEX: dict[int, int] = {}


def _step(reg: int) -> tuple[int, int]:
    """One LFSR step: returns (output bit, next register)."""
    out = (reg >> (PRBS_ORDER - 1)) & 1
    fb = ((reg >> 14) ^ (reg >> 13)) & 1
    return out, ((reg << 1) | fb) & _REG_MASK


def _tables():
    global _BITS, _STATES
    if _BITS is None:
        bits = np.empty(PRBS_PERIOD, dtype=np.uint8)
        states = np.empty(PRBS_PERIOD, dtype=np.int32)
        reg = _REG_MASK
        for i in range(PRBS_PERIOD):
            states[i] = reg
            _INDEX[reg] = i
            bits[i], reg = _step(reg)
        _BITS, _STATES = bits, states
    return _BITS, _STATES


@dataclass
class PrbsState:
    """State of the PRBS-15 generator.

    ``register`` must never be all-zeros (the LFSR would stick there) and
    ``counter`` counts bits emitted since seeding.
    """

    register: int = _REG_MASK
    polynomial: tuple[int, ...] = PRBS_TAPS
    counter: int = 0

    def __post_init__(self):
        if not 0 < self.register <= _REG_MASK:
            raise InvalidStateError(
                f"PRBS register must be a nonzero {PRBS_ORDER}-bit value, "
                f"got {self.register:#x}"
            )
        if tuple(self.polynomial) != PRBS_TAPS:
            raise InvalidStateError(
                f"only the maximal-length taps {PRBS_TAPS} are supported"
            )


@dataclass
class BitBlock:
    """Labelled bit sequence; the unit of BER accounting.

    ``branch_id`` is 1-based (branch 1 = highest power); ``pol_id`` is
    0 for X and 1 for Y.
    """

    bits: np.ndarray
    branch_id: int = 0
    pol_id: int = 0

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)

    def __len__(self) -> int:
        return self.bits.size


def prbs_next(state: PrbsState, n: int) -> BitBlock:
    """Emit the next ``n`` bits and advance ``state`` in place."""
    if state.register == 0:
        raise InvalidStateError("all-zero LFSR register is degenerate")
    if n < 1:
        raise ValueError(f"bit count must be >= 1, got {n}")
    bits_tab, states_tab = _tables()
    idx = _INDEX[state.register]
    out = np.empty(n, dtype=np.uint8)
    pos = 0
    i = idx
    while pos < n:
        take = min(PRBS_PERIOD - i, n - pos)
        out[pos : pos + take] = bits_tab[i : i + take]
        pos += take
        i = 0
    state.register = int(states_tab[(idx + n) % PRBS_PERIOD])
    state.counter += n
    return BitBlock(out)


def split_branches(block: BitBlock, n_branches: int, n_pols: int) -> list[BitBlock]:
    """Partition a bit block round-robin into (branch, polarization) lanes.

    Bit ``i`` goes to lane ``i mod (n_branches * n_pols)``; lanes are ordered
    branch-major, so with one polarization the lanes are ``[b0, b2, ...]``,
    ``[b1, b3, ...]``.
    """
    n_lanes = n_branches * n_pols
    if len(block) % n_lanes != 0:
        raise FramingError(
            f"{len(block)} bits not divisible into {n_branches} branches "
            f"x {n_pols} polarizations"
        )
    lanes = block.bits.reshape(-1, n_lanes)
    out = []
    for j in range(n_lanes):
        out.append(
            BitBlock(lanes[:, j].copy(), branch_id=j // n_pols + 1, pol_id=j % n_pols)
        )
    return out
