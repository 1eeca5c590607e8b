"""Exception types shared across the package."""


class VocabTransplantError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(VocabTransplantError):
    """A file (vocab, vectors, corpus, report) violates its documented format."""


class TrainingError(VocabTransplantError):
    """Training cannot proceed (empty corpus, no word meets min_count, ...)."""


class ReconciliationError(VocabTransplantError):
    """Vocabulary sizes cannot be reconciled with the available unused slots."""

    def __init__(self, message: str, shortfall: int = 0):
        super().__init__(message)
        self.shortfall = shortfall


class FitError(VocabTransplantError):
    """Least-squares fit failed (empty fit set or singular system)."""


class ValidationError(VocabTransplantError):
    """A report or config violates one of its invariants."""
