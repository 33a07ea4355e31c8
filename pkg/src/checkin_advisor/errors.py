"""Exception hierarchy shared by all modules.

Two branches matter for callers: DataError (bad input data, CLI exit code 2)
and EngineError (model/engine level failure, CLI exit code 3).
"""


class AdvisorError(Exception):
    exit_code = 3


class DataError(AdvisorError):
    exit_code = 2


class EngineError(AdvisorError):
    exit_code = 3


# -- ingestion / data model ------------------------------------------------

class MalformedLine(DataError):
    """A check-in line does not have the expected tab-separated arity."""


class BadCoordinate(DataError):
    """Latitude/longitude out of range or not numeric."""


class BadTimestamp(DataError):
    """Time or timezone field could not be parsed."""


class MissingLabel(DataError):
    """A user in the corpus has no class assignment in the label map."""

    def __init__(self, pseudonym: str):
        super().__init__(f"no class assignment for user {pseudonym!r}")
        self.pseudonym = pseudonym


class UnknownCheckIn(DataError):
    """An edit referenced a check-in that is not part of the trace."""


class MissingVenueIndex(DataError):
    """Snapping requested but no venue coordinate index supplied."""


class EmptySalt(DataError):
    """Pseudonymization salt must be non-empty."""


# -- training / inference ---------------------------------------------------

class EmptyCorpus(EngineError):
    """Training requires at least one labeled record."""


class EmptyClass(EngineError):
    """A schema class has no training records."""

    def __init__(self, label: str):
        super().__init__(f"class {label!r} has no training records")
        self.label = label


class DegenerateFit(EngineError):
    """All training labels identical after per-user aggregation."""


class BadParams(EngineError):
    """Training or mechanism parameters outside their valid range."""


class VocabularyMismatch(EngineError):
    """Feature vector indexed against a different vocabulary."""


# -- ranking / explanation ---------------------------------------------------

class UnknownClass(EngineError):
    """Requested target class is not part of the model schema."""


class EmptyTrace(EngineError):
    """Operation requires a non-empty trace."""


class KindMismatch(EngineError):
    """Ranker applied to an incompatible model kind."""


class SingleClassStore(EngineError):
    """kNN margin ranking needs stored points from at least two classes."""


class MissingCorpus(EngineError):
    """info_gain ranking requires the training corpus."""


class BadThresholds(EngineError):
    """Risk thresholds must satisfy 0 < t_low < t_high < 1."""
