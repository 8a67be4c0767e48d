"""Exception hierarchy with pipeline-stage attribution.

Every error raised by the library derives from :class:`PdmOfdmError` and
carries a ``stage`` label so the CLI can report which part of the chain
failed.
"""


class PdmOfdmError(Exception):
    """Base class for all simulator errors."""

    stage = "general"


class InvalidStateError(PdmOfdmError):
    """Degenerate generator state (e.g. all-zero LFSR register)."""

    stage = "bitsource"


class FramingError(PdmOfdmError):
    """Lengths or shapes inconsistent with the frame layout."""

    stage = "framing"


class ArityError(PdmOfdmError):
    """Operation defined only for a specific branch count."""

    stage = "constellation"


class AmbiguityError(PdmOfdmError):
    """Constellation points collide; labels cannot be recovered."""

    stage = "constellation"


class OrderingError(PdmOfdmError):
    """Branch powers not strictly descending."""

    stage = "pdm"


class SyncError(PdmOfdmError):
    """Timing synchronization failed to find a frame."""

    stage = "rx_dsp"


class EstimationError(PdmOfdmError):
    """Channel estimation is singular or under-determined."""

    stage = "rx_dsp"


class EqualizationError(PdmOfdmError):
    """Channel matrix not invertible on some subcarrier."""

    stage = "rx_dsp"


class AccountingError(PdmOfdmError):
    """Bit bookkeeping mismatch between truth and decisions."""

    stage = "sic"


class ConfigError(PdmOfdmError):
    """Invalid or inconsistent run configuration."""

    stage = "config"
