"""Exception hierarchy shared by every planforge module."""


class PlanforgeError(Exception):
    pass


# -- domain -----------------------------------------------------------------

class DomainError(PlanforgeError, ValueError):
    pass


class LevelOutOfRange(DomainError):
    pass


class ShapeError(DomainError):
    pass


class EmptyTopic(DomainError):
    pass


class IndexOutOfRange(DomainError, IndexError):
    pass


# -- backend ----------------------------------------------------------------

class BackendError(PlanforgeError):
    pass


class NetworkError(BackendError):
    pass


class AuthError(BackendError):
    pass


class HttpStatusError(BackendError):
    """Non-transient HTTP failure (4xx other than 429). Never retried."""

    def __init__(self, status: int, body: str = ""):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


class ScriptMiss(BackendError):
    pass


class EmptyResponse(BackendError):
    pass


# -- parsing ----------------------------------------------------------------

class ParseError(PlanforgeError, ValueError):
    pass


class DuplicateEntry(ParseError):
    pass


class VerdictParseError(ParseError):
    pass


class ScoreOutOfRange(VerdictParseError):
    pass


class PlanParseError(ParseError):
    pass


class ExplanationParseError(ParseError):
    pass


# -- pipeline ---------------------------------------------------------------

class InvariantViolation(PlanforgeError):
    pass


class InsufficientMistakes(PlanforgeError):
    pass


class EmptyQueue(PlanforgeError):
    pass


class EmptyQuestionSet(PlanforgeError, ValueError):
    pass


class EmptyCorpus(ParseError):
    pass


class SampleTooLarge(PlanforgeError, ValueError):
    pass


class RecordValidationError(PlanforgeError, ValueError):
    pass
