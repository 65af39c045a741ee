"""Exception hierarchy shared across the package."""


class SelfTalkError(Exception):
    """Base class for all package errors."""


class DataError(SelfTalkError):
    """Bad input data: unreadable files, malformed manifests, bad values."""


class AudioReadError(DataError):
    """Audio file missing or unreadable."""


class UnsupportedEncodingError(DataError):
    """Audio file readable but not 16-bit PCM or 32-bit float WAV."""


class BackendError(SelfTalkError):
    """Base class for model-backend failures."""


class BackendTimeoutError(BackendError):
    """Backend did not answer within the configured budget."""


class BackendProtocolError(BackendError):
    """Malformed or inconsistent backend response."""
