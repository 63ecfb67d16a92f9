"""Exception hierarchy shared across the package."""


class NesycError(Exception):
    """Base class for all package errors."""


class GroundingOverflow(NesycError):
    """Exhaustive grounding would exceed the configured instance cap."""


class NonStratifiedProgram(NesycError):
    """A negation-as-failure cycle prevents stratified evaluation."""


# Name used by the interpretation engine's contract.
NonStratifiedBk = NonStratifiedProgram


class ParseError(NesycError):
    """Raised by the strict parse helpers; carries every diagnostic."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        msg = "; ".join(f"{d.line}:{d.column}: {d.message}" for d in self.diagnostics)
        super().__init__(msg or "parse error")


class NoExamples(NesycError):
    pass


class EmptyCandidates(NesycError):
    pass


class NoCandidates(NesycError):
    pass


class MalformedTransition(NesycError):
    pass


class VocabularyMiss(NesycError):
    pass


class InconsistentEffects(NesycError):
    pass


class EndpointError(NesycError):
    pass


class UnparseableAfterRetries(NesycError):
    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class VocabularyViolation(NesycError):
    pass


class UnsatisfiableTask(NesycError):
    pass


class EpisodeOver(NesycError):
    pass


class UnknownTemplate(NesycError):
    pass


class PlannerStuck(NesycError):
    pass
