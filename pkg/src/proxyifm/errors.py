"""Exception types shared across the simulator."""


class ProxyIfmError(Exception):
    """Base class for all errors raised by this package."""


# -- circuit construction / compilation --

class CyclicGraphError(ProxyIfmError):
    """The element graph contains a spatial cycle."""


class DanglingPortError(ProxyIfmError):
    """A wire is produced but never consumed, or consumed but never produced."""


class NonUnitaryBeamSplitterError(ProxyIfmError):
    """A beam-splitter matrix fails the unitarity tolerance."""


class BinOverflowError(ProxyIfmError):
    """A delay pushes amplitude past the circuit's last time bin."""


class PortCountMismatchError(ProxyIfmError):
    """Spatial input and output port counts differ."""


# -- engines --

class NoLossTerminalError(ProxyIfmError):
    """A conditional no-interaction figure was requested without loss terminals."""


class ZeroPulsesError(ProxyIfmError):
    """A pulse-train source needs at least one pulse."""


class EngineSourceMismatchError(ProxyIfmError):
    """The requested engine cannot consume the scenario's source type."""


# -- Fock oracle --

class CutoffTooSmallError(ProxyIfmError):
    """The truncation cutoff leaves too large a probability deficit."""


class StateTooLargeError(ProxyIfmError):
    """The truncated Fock space exceeds the supported desk-scale bound."""


class NonUnitaryError(ProxyIfmError):
    """A mode-transformation matrix fails the unitarity tolerance."""


# -- multiport --

class NonUnitaryInputError(ProxyIfmError):
    """reck_decompose was handed a matrix that is not unitary."""


class DimensionTooLargeError(ProxyIfmError):
    """Decomposition requested beyond the supported matrix size."""


class DimensionMismatchError(ProxyIfmError):
    """Two matrices that should share a dimension do not."""


# -- scenario files / CLI --

class ParseError(ProxyIfmError):
    """A scenario file could not be parsed; carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class UnknownSchemaVersionError(ProxyIfmError):
    """The scenario file declares a schema this build does not understand."""


class UnresolvedElementIdError(ProxyIfmError):
    """A scenario refers to an element id that does not exist."""


class IoError(ProxyIfmError):
    """Result emission failed at the filesystem level."""
