"""Exception hierarchy.

Every error raised deliberately by the package derives from ``RainflagError``.
Input-data problems derive from ``DataError`` so the CLI can map them to
exit code 2.
"""


class RainflagError(Exception):
    """Base class for all package errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


class DataError(RainflagError):
    """Malformed or unusable input data."""


# telemetry

class TelemetryError(DataError):
    pass


class BadFrame(TelemetryError):
    pass


class ChecksumMismatch(TelemetryError):
    pass


class InvalidField(TelemetryError):
    pass


class UnsupportedVersion(TelemetryError):
    pass


class OversizeMessage(TelemetryError):
    pass


class UnknownDevice(TelemetryError):
    def __init__(self, device_id: str):
        super().__init__(f"unknown device {device_id!r}")
        self.device_id = device_id


# dataio

class MalformedRow(DataError):
    def __init__(self, row: int, detail: str):
        super().__init__(f"row {row}: {detail}")
        self.row = row


class DuplicateStation(DataError):
    pass


class RangeViolation(DataError):
    pass


class DuplicateRecord(DataError):
    pass


class NegativePrecip(DataError):
    pass


class EmptyDataset(DataError):
    pass


class AllMissingStation(DataError):
    pass


class SpanTooShort(DataError):
    pass


class EmptySplit(DataError):
    pass


# graph

class DuplicateCoordinates(DataError):
    pass


class IsolatedNode(DataError):
    pass


# model / checkpoint

class ShapeMismatch(RainflagError):
    pass


class NodeOrderMismatch(DataError):
    pass


class FeatureDimMismatch(DataError):
    pass


class CheckpointError(DataError):
    pass


# metrics

class LengthMismatch(RainflagError):
    pass


class EmptyInput(RainflagError):
    pass


class ZeroVariance(RainflagError):
    pass
