"""Power-division-multiplexed dual-polarization coherent optical OFDM simulator.

Two QPSK-OFDM branches are superposed at a configurable power ratio per
polarization, pushed through a parametric fiber channel, and recovered by a
successive-interference-cancellation receiver or a one-shot hierarchical
de-mapper.  The harness sweeps BER against power ratio, SNR/OSNR and fiber
length and writes CSV reports plus rendered figures.
"""

__version__ = "0.1.0"
