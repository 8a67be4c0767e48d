"""Power de-multiplexing of the recovered composite grid.

Two detectors share the model y = sum(sqrt(p_i) X_i) + noise:

* ``detect_sic`` decodes branches in descending power order, re-modulating
  and subtracting each hard decision before decoding the next.  Stage 1 is
  exactly a plain QPSK slicer on the composite.
* ``detect_hierarchical`` de-maps every symbol in one shot against the
  fixed uniform 16QAM grid that a 4:1 power split produces, splitting each
  4-bit label into quadrant (strong) and offset (weak) bits.  Its reference
  grid does not follow the actual power split -- that is the point of the
  comparison: away from 4:1 its inner decision boundaries sit slightly off
  the true composite levels, which is where interference cancellation earns
  its margin.

Symbol-to-bit order matches the transmitter: grids flatten column-major
(symbol by symbol) and each symbol contributes its I bit then its Q bit.
"""

from dataclasses import dataclass, field

import numpy as np

from .bitsource import BitBlock
from .constellation import (
    UNIFORM_16QAM_POWERS,
    demap_hierarchical,
    demap_qpsk,
    map_qpsk,
    slice_qpsk,
)
from .errors import AccountingError, ArityError
from .pdm import PowerPlan

POL_NAMES = ("x", "y")


@dataclass
class BranchCount:
    """Exact error bookkeeping for one (branch, polarization) lane."""

    errors: int = 0
    bits: int = 0

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    def add(self, errors: int, bits: int):
        self.errors += errors
        self.bits += bits


@dataclass
class DetectionReport:
    """Per-branch decisions for one frame of composite payload."""

    method: str
    bits: list[BitBlock]  # one block per (branch, pol)
    symbols: np.ndarray  # (n_branches, 2, n_data, n_sym) QPSK decisions
    residuals: list[np.ndarray]  # residual after each cancellation stage

    def block(self, branch_id: int, pol_id: int) -> BitBlock:
        for blk in self.bits:
            if blk.branch_id == branch_id and blk.pol_id == pol_id:
                return blk
        raise AccountingError(f"no block for branch {branch_id} pol {pol_id}")


def _bits_from_decisions(symbols: np.ndarray, branch_id: int) -> list[BitBlock]:
    """Hard symbol decisions (2, n_data, n_sym) -> per-pol bit blocks."""
    out = []
    for pol in range(2):
        flat = symbols[pol].reshape(-1, order="F")
        out.append(BitBlock(demap_qpsk(flat), branch_id=branch_id, pol_id=pol))
    return out


def detect_sic(grid: np.ndarray, plan: PowerPlan) -> DetectionReport:
    """Successive interference cancellation over a composite grid.

    ``grid``: (2, n_data, n_sym) equalized, phase-recovered, despread
    composite payload.  Branch i is sliced on the running residual with the
    remaining branches treated as noise, then sqrt(p_i) times its decision
    is subtracted before the next branch is decoded.
    """
    weights = plan.weights()
    residual = np.array(grid, dtype=np.complex128, copy=True)
    symbols = np.empty((plan.n_branches,) + grid.shape, dtype=np.complex128)
    bits: list[BitBlock] = []
    residuals: list[np.ndarray] = []
    for i, w in enumerate(weights):
        decided = slice_qpsk(residual)
        symbols[i] = decided
        residual = residual - w * decided
        residuals.append(residual.copy())
        bits.extend(_bits_from_decisions(decided, branch_id=i + 1))
    return DetectionReport("sic", bits, symbols, residuals)


def detect_hierarchical(grid: np.ndarray, plan: PowerPlan) -> DetectionReport:
    """One-shot de-mapping against the uniform 16QAM reference grid."""
    if plan.n_branches != 2:
        raise ArityError(
            f"hierarchical de-mapping handles 2 branches, got {plan.n_branches}"
        )
    symbols = np.empty((2,) + grid.shape, dtype=np.complex128)
    bits: list[BitBlock] = []
    for pol in range(2):
        flat = grid[pol].reshape(-1, order="F")
        strong, weak = demap_hierarchical(flat, UNIFORM_16QAM_POWERS)
        bits.append(BitBlock(strong, branch_id=1, pol_id=pol))
        bits.append(BitBlock(weak, branch_id=2, pol_id=pol))
        n_sym = grid.shape[2]
        symbols[0, pol] = map_qpsk(strong).reshape((-1, n_sym), order="F")
        symbols[1, pol] = map_qpsk(weak).reshape((-1, n_sym), order="F")
    bits.sort(key=lambda blk: (blk.branch_id, blk.pol_id))
    w = plan.weights()
    residuals = [
        grid - w[0] * symbols[0],
        grid - w[0] * symbols[0] - w[1] * symbols[1],
    ]
    return DetectionReport("hierarchical", bits, symbols, residuals)


def count_errors(
    report: DetectionReport, truth: list[BitBlock]
) -> dict[tuple[int, int], BranchCount]:
    """Bit error counts per (branch, polarization), exact integers kept."""
    counts: dict[tuple[int, int], BranchCount] = {}
    for ref in truth:
        got = report.block(ref.branch_id, ref.pol_id)
        if len(got) != len(ref):
            raise AccountingError(
                f"branch {ref.branch_id} pol {POL_NAMES[ref.pol_id]}: "
                f"{len(got)} decided bits vs {len(ref)} transmitted"
            )
        key = (ref.branch_id, ref.pol_id)
        counts[key] = BranchCount(
            errors=int(np.count_nonzero(got.bits != ref.bits)), bits=len(ref)
        )
    return counts
