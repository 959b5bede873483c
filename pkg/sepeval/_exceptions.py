"""Custom exception types."""

from pathlib import Path


def _restore(cls: type, args: tuple) -> Exception:
    error = Exception.__new__(cls)
    error.args = args
    return error


class SepevalError(Exception):
    def __reduce__(self):
        # subclass constructors take parts of the message, not the message
        return _restore, (type(self), self.args)


class AudioError(SepevalError):
    pass


class MissingAudioFile(AudioError):
    def __init__(self, path: Path) -> None:
        super().__init__(f"Audio file {path} does not exist.")


class UnsupportedCodec(AudioError):
    def __init__(self, path: Path, reason: str) -> None:
        super().__init__(f"Cannot decode {path}: {reason}.")


class TruncatedPayload(AudioError):
    def __init__(self, path: Path, expected: int, actual: int) -> None:
        message = (
            f"Audio payload of {path} is truncated "
            f"({expected} bytes declared, {actual} present)."
        )
        super().__init__(message)


class NonFiniteSamples(AudioError):
    def __init__(self) -> None:
        super().__init__("Audio samples must be finite.")


class UnwritablePath(AudioError):
    def __init__(self, path: Path, reason: str) -> None:
        super().__init__(f"Cannot write {path}: {reason}.")


class StftError(SepevalError):
    pass


class EmptySignal(StftError):
    def __init__(self) -> None:
        super().__init__("Cannot transform an empty signal.")


class InvalidStftConfig(StftError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid STFT configuration: {reason}.")


class MaskError(SepevalError):
    pass


class MaskShapeMismatch(MaskError):
    def __init__(self, expected: tuple, actual: tuple) -> None:
        super().__init__(f"Shape mismatch (expected {expected}, actual {actual}).")


class InvalidAlpha(MaskError):
    def __init__(self, alpha: float) -> None:
        super().__init__(f"{alpha} is not a valid mask exponent, alpha must be positive.")


class UnknownMethod(MaskError):
    def __init__(self, method: str) -> None:
        super().__init__(f"Unknown oracle method {method}.")


class EvaluationError(SepevalError):
    pass


class NoReferences(EvaluationError):
    def __init__(self) -> None:
        super().__init__("At least one reference signal is required.")


class LengthMismatch(EvaluationError):
    def __init__(self, name: str, expected: tuple, actual: tuple) -> None:
        message = f"{name} has shape {actual}, expected {expected} to match the references."
        super().__init__(message)


class WindowTooLarge(EvaluationError):
    def __init__(self, window: int, num_samples: int) -> None:
        message = f"Window of {window} samples exceeds the signal length ({num_samples})."
        super().__init__(message)


class InvalidWindow(EvaluationError):
    def __init__(self, window: int, hop: int) -> None:
        super().__init__(f"Window {window} and hop {hop} must be positive.")


class FilterMismatch(EvaluationError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Projection filters do not match the signals: {reason}.")


class CorpusError(SepevalError):
    pass


class MissingCorpusRoot(CorpusError):
    def __init__(self, root: Path) -> None:
        super().__init__(f"Corpus root {root} does not exist.")


class EmptyCorpus(CorpusError):
    def __init__(self, root: Path) -> None:
        super().__init__(f"No valid tracks found under {root}.")


class StemMismatch(CorpusError):
    def __init__(self, track: str, stem: str, expected: tuple, actual: tuple) -> None:
        message = (
            f"Stem {stem} of track {track} has shape {actual} "
            f"(mixture has {expected})."
        )
        super().__init__(message)


class ReportError(SepevalError):
    pass


class MalformedReport(ReportError):
    def __init__(self, path: Path, reason: str) -> None:
        super().__init__(f"Malformed report {path}: {reason}.")


class SchemaVersionMismatch(ReportError):
    def __init__(self, path: Path, version: object, expected: int) -> None:
        message = f"Report {path} has schema_version {version}, expected {expected}."
        super().__init__(message)
