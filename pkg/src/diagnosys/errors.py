"""Exception types shared across the library.

Every error raised by diagnosys derives from DiagnosysError so callers can
catch the whole family with one clause.  Module-specific errors stay close
to the operation that raises them; nothing here carries state beyond a
message and, where useful, the offending identifier.
"""


class DiagnosysError(Exception):
    """Base class for all diagnosys errors."""


# -- knowledge base ---------------------------------------------------------

class KnowledgeBaseError(DiagnosysError):
    """Raised when a disease document or KB directory is malformed."""


class MissingSection(KnowledgeBaseError):
    def __init__(self, section: str, source: str = ""):
        self.section = section
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"required section {section!r} missing{where}")


class MalformedLine(KnowledgeBaseError):
    def __init__(self, line: str, reason: str, source: str = ""):
        self.line = line
        where = f" ({source})" if source else ""
        super().__init__(f"cannot parse line {line!r}: {reason}{where}")


class BadWeight(KnowledgeBaseError):
    """Weight outside its legal range or outside the declared tier band."""


class DuplicateSymptom(KnowledgeBaseError):
    pass


class DuplicateDisease(KnowledgeBaseError):
    pass


class EmptyKnowledgeBase(KnowledgeBaseError):
    pass


# -- embedding / retrieval --------------------------------------------------

class EmbeddingError(DiagnosysError):
    pass


class DimensionMismatch(EmbeddingError):
    pass


class BadChunkParams(EmbeddingError):
    pass


class EmptyIndex(EmbeddingError):
    pass


class DuplicateKey(EmbeddingError):
    pass


class RemoteUnavailable(EmbeddingError):
    """Remote embedding endpoint unreachable or returned garbage."""


# -- engine -----------------------------------------------------------------

class EngineError(DiagnosysError):
    pass


class NoHypotheses(EngineError):
    pass


class NonFiniteValue(EngineError):
    """NaN or infinite numeric input where a finite value is required."""


# -- llm --------------------------------------------------------------------

class LlmError(DiagnosysError):
    pass


class MissingSlot(LlmError):
    def __init__(self, slot: str, template_id: str = ""):
        self.slot = slot
        extra = f" for template {template_id!r}" if template_id else ""
        super().__init__(f"unbound prompt slot {slot!r}{extra}")


class ProviderUnavailable(LlmError):
    """Chat completion endpoint failed after all retries."""


# -- dialogue ---------------------------------------------------------------

class DialogueError(DiagnosysError):
    pass


class EmptyEvidence(DialogueError):
    """No reported symptoms, so there is nothing to attribute or report."""


class WrongPhase(DialogueError):
    def __init__(self, expected: str, actual: str):
        self.expected = expected
        self.actual = actual
        super().__init__(f"operation requires phase {expected!r}, session is in {actual!r}")


class StaleQuestion(DialogueError):
    """Answer or result posted for something other than the outstanding prompt."""


# -- service ----------------------------------------------------------------

class ServiceError(DiagnosysError):
    pass


class UnknownSession(ServiceError):
    pass


class CapacityExceeded(ServiceError):
    pass


# -- evaluation -------------------------------------------------------------

class EvaluationError(DiagnosysError):
    pass


class EmptyResults(EvaluationError):
    pass


class DegenerateTrainingSet(EvaluationError):
    """Training split covers fewer than two classes."""


class UnknownGrid(EvaluationError):
    pass
