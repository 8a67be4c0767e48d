"""Digital-domain power division multiplexing.

Branch signals are combined samplewise as sum(sqrt(p_i) * x_i) with the
normalized powers p_i strictly descending.  Because modulation is linear
the same weighted sum may equivalently be taken over frequency-domain
grids; both forms are provided.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FramingError, OrderingError
from .ofdm import SampleStream, SymbolGrid

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class PowerPlan:
    """Ordered branch powers p_1 > p_2 > ... with sum(p_i) = 1."""

    powers: tuple[float, ...]

    def __post_init__(self):
        powers = tuple(float(p) for p in self.powers)
        object.__setattr__(self, "powers", powers)
        if abs(sum(powers) - 1.0) > _SUM_TOL:
            raise ValueError(f"branch powers must sum to 1, got {sum(powers)!r}")
        if any(p2 >= p1 for p1, p2 in zip(powers, powers[1:])):
            raise OrderingError(f"branch powers must be strictly descending: {powers}")
        if any(p <= 0 for p in powers):
            raise ValueError(f"branch powers must be positive: {powers}")

    @property
    def n_branches(self) -> int:
        return len(self.powers)

    @property
    def pdr(self) -> float:
        """Power division ratio P1/P2 (2-branch plans)."""
        return self.powers[0] / self.powers[1]

    def weights(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.powers))


def plan_from_pdr(pdr: float) -> PowerPlan:
    """Two-branch plan from the strong-to-weak power ratio."""
    if not pdr > 1.0:
        raise OrderingError(f"PDR must exceed 1 for strictly descending powers, got {pdr}")
    return PowerPlan((pdr / (1.0 + pdr), 1.0 / (1.0 + pdr)))


def superpose(streams: Sequence[SampleStream], plan: PowerPlan) -> SampleStream:
    """Weighted samplewise sum of branch streams."""
    if len(streams) != plan.n_branches:
        raise FramingError(
            f"{len(streams)} streams for a {plan.n_branches}-branch plan"
        )
    n = len(streams[0])
    rate = streams[0].sample_rate
    for s in streams[1:]:
        if len(s) != n or s.sample_rate != rate:
            raise FramingError("branch streams must share length and sample rate")
    acc = np.zeros(n, dtype=np.complex128)
    for w, s in zip(plan.weights(), streams):
        acc += w * s.samples
    return SampleStream(acc, rate)


def superpose_grids(grids: Sequence[SymbolGrid], plan: PowerPlan) -> SymbolGrid:
    """Grid-domain equivalent of :func:`superpose` (modulation is linear)."""
    if len(grids) != plan.n_branches:
        raise FramingError(f"{len(grids)} grids for a {plan.n_branches}-branch plan")
    shape = grids[0].entries.shape
    pol = grids[0].pol_id
    for g in grids[1:]:
        if g.entries.shape != shape or g.pol_id != pol:
            raise FramingError("branch grids must share shape and polarization")
    acc = np.zeros(shape, dtype=np.complex128)
    for w, g in zip(plan.weights(), grids):
        acc += w * g.entries
    return SymbolGrid(acc, pol)
