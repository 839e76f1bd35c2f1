"""Exception hierarchy. Every error carries a stable machine-readable code
that the HTTP layer and the CLI surface unchanged."""


class VexploreError(Exception):
    code = "internal_error"

    def __init__(self, message: str, **detail):
        super().__init__(message)
        self.message = message
        self.detail = detail


class DataFormatError(VexploreError):
    """Malformed or unusable input data (bad header, empty corpus, ...)."""

    code = "data_format"


class ParameterError(VexploreError):
    """A caller-supplied parameter is out of its valid range."""

    code = "invalid_params"


class GroupCapExceeded(VexploreError):
    code = "group_cap_exceeded"


class DatasetNotFound(VexploreError):
    code = "dataset_not_found"


class SessionNotFound(VexploreError):
    code = "session_not_found"


class GroupNotFound(VexploreError):
    code = "group_not_found"


class JobNotFound(VexploreError):
    code = "job_not_found"


class IneligibleGroup(VexploreError):
    """A selection targeted a group that is neither shown nor bookmarked."""

    code = "ineligible_group"


class UnknownDimension(VexploreError):
    code = "unknown_dimension"


class ProjectionError(VexploreError):
    """The 2D member projection cannot be computed (too few classes/members)."""

    code = "projection_unavailable"


class JobConflict(VexploreError):
    """A mining/indexing job is already running for the dataset."""

    code = "job_conflict"


class NotReady(VexploreError):
    """An operation needs mining/indexing output that does not exist yet."""

    code = "not_ready"
