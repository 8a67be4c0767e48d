"""QPSK mapping and the two-layer composite constellation.

A composite symbol is sqrt(p1)*s1 + sqrt(p2)*s2 with unit-energy QPSK
branches, so its real and imaginary rails take the four levels
+/-(a +/- b) with a = sqrt(p1/2), b = sqrt(p2/2).  All hard decisions here
are therefore per-rail: the sign gives the strong-branch bit and the offset
around +/-a gives the weak-branch bit.  Rail ties resolve toward the 0 bit
(positive side) so error counts are reproducible bit-for-bit.

Bit convention (Gray): for one QPSK symbol the first bit sets the sign of
the in-phase rail (0 -> +) and the second bit the quadrature rail.  A
composite point's 4-bit label is strong-branch bits then weak-branch bits;
at a 4:1 power split the 16 points form the uniform Gray 16QAM grid with
rail levels {+/-1, +/-3}/sqrt(10).
"""

import numpy as np

from .errors import AmbiguityError, ArityError

SQRT2 = np.sqrt(2.0)

# Index by (first bit << 1) | second bit.
QPSK_POINTS = np.array(
    [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=np.complex128
) / SQRT2

# Power pair whose composite is the uniform 16QAM grid (4:1 split).
UNIFORM_16QAM_POWERS = (0.8, 0.2)


def _weights(plan) -> tuple[float, float]:
    """Accept a PowerPlan or a raw 2-tuple of powers."""
    powers = getattr(plan, "powers", plan)
    if len(powers) != 2:
        raise ArityError(
            f"composite constellation is defined for 2 branches, got {len(powers)}"
        )
    return float(powers[0]), float(powers[1])


def map_qpsk(bits) -> np.ndarray:
    """Gray-map pairs of bits onto unit-energy QPSK symbols."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size % 2 != 0:
        raise ValueError(f"QPSK needs bit pairs, got {bits.size} bits")
    pairs = bits.reshape(-1, 2)
    return QPSK_POINTS[(pairs[:, 0] << 1) | pairs[:, 1]]


def demap_qpsk(points) -> np.ndarray:
    """Hard-decide QPSK symbols back to bits (boundary resolves to bit 0)."""
    points = np.asarray(points, dtype=np.complex128).ravel()
    bits = np.empty((points.size, 2), dtype=np.uint8)
    bits[:, 0] = points.real < 0
    bits[:, 1] = points.imag < 0
    return bits.reshape(-1)


def slice_qpsk(points) -> np.ndarray:
    """Nearest QPSK symbol for each point (sign decision, ties toward +)."""
    points = np.asarray(points, dtype=np.complex128)
    re = np.where(points.real < 0, -1.0, 1.0)
    im = np.where(points.imag < 0, -1.0, 1.0)
    return (re + 1j * im) / SQRT2


def composite_points(plan) -> np.ndarray:
    """The 16 composite points, ordered by their 4-bit label.

    Label of point k is ``(strong bits << 2) | weak bits``, so
    ``composite_points(plan)[label]`` is the noiseless symbol for that
    bit pattern.  Mean energy over the 16 points is p1 + p2.
    """
    p1, p2 = _weights(plan)
    w1, w2 = np.sqrt(p1), np.sqrt(p2)
    strong = np.repeat(QPSK_POINTS, 4)
    weak = np.tile(QPSK_POINTS, 4)
    return w1 * strong + w2 * weak


def nearest_composite(points, plan) -> np.ndarray:
    """Closest composite constellation point for each input point.

    Exploits the product-grid structure: per rail the decision is a sign
    followed by an offset decision around the strong level.
    """
    p1, p2 = _weights(plan)
    a, b = np.sqrt(p1 / 2.0), np.sqrt(p2 / 2.0)
    points = np.asarray(points, dtype=np.complex128)
    s1r, s2r = _rail_decide(points.real, a)
    s1i, s2i = _rail_decide(points.imag, a)
    return (a * s1r + b * s2r) + 1j * (a * s1i + b * s2i)


def _rail_decide(r: np.ndarray, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-rail two-step decision: strong sign, then weak sign of residual."""
    s1 = np.where(r < 0, -1.0, 1.0)
    s2 = np.where(r - a * s1 < 0, -1.0, 1.0)
    return s1, s2


def demap_hierarchical(points, plan) -> tuple[np.ndarray, np.ndarray]:
    """One-shot de-mapping of composite points into (strong, weak) bits.

    Decides the nearest point of the composite grid for ``plan`` and splits
    its label: quadrant bits go to the strong branch, intra-quadrant offset
    bits to the weak branch.  Requires p1 > p2; at equal powers the middle
    rail levels collide and no labelling is possible.
    """
    p1, p2 = _weights(plan)
    if not p1 > p2:
        raise AmbiguityError(
            f"hierarchical de-mapping needs p1 > p2, got {p1:.6g} <= {p2:.6g}"
        )
    a = np.sqrt(p1 / 2.0)
    points = np.asarray(points, dtype=np.complex128).ravel()
    s1r, s2r = _rail_decide(points.real, a)
    s1i, s2i = _rail_decide(points.imag, a)
    strong = np.empty((points.size, 2), dtype=np.uint8)
    weak = np.empty((points.size, 2), dtype=np.uint8)
    strong[:, 0] = s1r < 0
    strong[:, 1] = s1i < 0
    weak[:, 0] = s2r < 0
    weak[:, 1] = s2i < 0
    return strong.reshape(-1), weak.reshape(-1)
