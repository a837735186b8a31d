"""Exception types shared across the package.

The service layer maps these onto HTTP status codes, so keep the split:
configuration problems, malformed feedback, feedback that is well-formed but
illegal for the current stage, and missing ids.
"""


class RankOptError(Exception):
    """Base class for package-specific errors."""


class ConfigError(RankOptError):
    """Invalid optimizer or store configuration."""


class FeedbackError(RankOptError):
    """Malformed ranking feedback (bad indices, duplicates, wrong length)."""


class UnsupportedFeedbackError(FeedbackError):
    """Feedback is well-formed but carries too little information for the
    requested operation (e.g. a partial ranking where a total order is
    required)."""


class DegenerateFeedbackError(FeedbackError):
    """Feedback yields an empty comparison graph; no gradient can be
    estimated. Callers must supply k >= 2, or best-only with m >= 2."""


class ProtocolError(RankOptError):
    """Feedback kind is not legal for the session's current stage."""


class NotFoundError(RankOptError):
    """Unknown id (store entry, prior store, or session)."""


class ConflictError(RankOptError):
    """Request conflicts with current state (finished session, duplicate
    round submission, or an id that already exists)."""
