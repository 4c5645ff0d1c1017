class RcmError(Exception):
    """Base class for every error raised by the rcm engines"""


class DescriptorError(RcmError):
    """A machine or scaffold-system descriptor failed validation"""


class DimacsError(RcmError):
    """DIMACS CNF text could not be parsed"""


class FormulaTooLarge(RcmError):
    """Formula exceeds the brute-force enumeration limit"""


class FrameParseError(RcmError):
    """A generator was handed a frame it cannot parse"""


class NonDeciderError(RcmError):
    """Evaluation exceeded its configuration budget (machine is not a decider within it)"""


class ScaffoldError(RcmError):
    """Scaffold system misuse (bad oracle index, unknown program)"""


class ReportError(RcmError):
    """Report requested over no rows"""


class BackendError(RcmError):
    """Remote completion endpoint failure"""


class BackendAuthError(BackendError):
    """Credentials missing or rejected"""


class BackendTimeout(BackendError):
    """Request exceeded the configured timeout"""


class MalformedResponse(BackendError):
    """Endpoint answered with a body that does not follow the chat-completions schema"""


class RetryExhausted(BackendError):
    """Transient failures persisted past the retry budget"""

    def __init__(self, message, attempts):
        super().__init__(message)
        self.attempts = attempts


class BudgetExhausted(ScaffoldError):
    """A scaffold loop ran past its round budget"""


class RunCancelled(RcmError):
    """A streamed run was abandoned because its client went away"""


class TransientFailure(BackendError):
    """A completion attempt failed in a way worth retrying (transport error, 429, 5xx)"""
