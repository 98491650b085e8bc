"""Exception hierarchy shared by every module.

Each error carries the process exit code the CLI reports for it:
2 for bad or missing input, 3 for data that is valid but degenerate.
Anything else escaping to the CLI is an internal error (exit 1).
"""


class OdomError(Exception):
    exit_code = 1

    @property
    def name(self) -> str:
        return type(self).__name__


class InputError(OdomError):
    exit_code = 2


class DegenerateDataError(OdomError):
    exit_code = 3


# ingest
class MalformedRow(InputError):
    def __init__(self, path, line: int, reason: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class NonMonotonicTime(InputError):
    pass


class EmptyFile(InputError):
    pass


class OutOfRange(InputError):
    pass


class InsufficientData(DegenerateDataError):
    pass


class SpanMismatch(InputError):
    pass


# odometry
class NonPositiveDt(InputError):
    pass


class LengthMismatch(InputError):
    pass


# bias
class WindowTooShort(DegenerateDataError):
    pass


class NotInitialized(OdomError):
    pass


class NoStaticWindow(DegenerateDataError):
    pass


# calibration
class NoGroundTruth(InputError):
    pass


class AllSamplesStatic(DegenerateDataError):
    pass


class DegenerateGeometry(DegenerateDataError):
    pass


class NoConvergence(DegenerateDataError):
    pass


class NonPositiveRadius(DegenerateDataError):
    pass


# evaluation
class InsufficientOverlap(InputError):
    pass


class TrajectoryTooShort(DegenerateDataError):
    pass


# simulator
class InvalidScript(InputError):
    pass


class UnknownPreset(InputError):
    pass


# cli
class MissingInput(InputError):
    pass


class InvalidParameter(InputError):
    pass
