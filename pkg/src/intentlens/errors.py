"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class IntentLensError(Exception):
    """Base class; ``kind`` is the machine-readable error tag printed by the CLI."""

    kind = "error"


class MalformedSourceError(IntentLensError):
    kind = "malformed-source"

    def __init__(self, message: str, filename: str | None = None, offset: int | None = None):
        self.filename = filename
        self.offset = offset
        where = []
        if filename:
            where.append(filename)
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class EmptyFunctionError(IntentLensError):
    kind = "empty-function"


class EmptyContractError(IntentLensError):
    kind = "empty-contract"


class EmptySequenceError(IntentLensError):
    kind = "empty-sequence"


class NumericFaultError(IntentLensError):
    kind = "numeric-fault"


class DivergenceError(NumericFaultError):
    kind = "divergence"


class ShapeError(IntentLensError, ValueError):
    kind = "shape"


class ZeroVectorError(IntentLensError, ValueError):
    kind = "zero-vector"


class NoCommonFunctionsError(IntentLensError):
    kind = "no-common-functions"


class InsufficientDataError(IntentLensError):
    kind = "insufficient-data"


class EmptyEvaluationError(IntentLensError):
    kind = "empty-evaluation"


class DatasetError(IntentLensError):
    kind = "dataset"


class BundleError(IntentLensError):
    kind = "bundle"


class CorruptBundleError(BundleError):
    kind = "corrupt-bundle"


class UnsupportedVersionError(BundleError):
    kind = "unsupported-version"


class BundleConsistencyError(BundleError):
    kind = "bundle-consistency"
