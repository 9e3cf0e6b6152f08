"""Exception hierarchy shared by every stage of the pipeline."""


class SpontserError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""


class BadConfig(SpontserError, ValueError):
    pass


class MalformedWav(SpontserError, ValueError):
    pass


class UnsupportedFormat(SpontserError, ValueError):
    pass


class ManifestError(SpontserError, ValueError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class InconsistentDialog(SpontserError, ValueError):
    pass


class DimensionMismatch(SpontserError, ValueError):
    pass


class SingleClass(SpontserError, ValueError):
    pass


class NonFinite(SpontserError, ValueError):
    pass


class MissingBranchData(SpontserError, ValueError):
    def __init__(self, branch, message=None):
        self.branch = branch
        super().__init__(message or branch)


class SerializationError(SpontserError):
    pass


class VersionMismatch(SerializationError):
    pass


class CorruptFile(SerializationError):
    pass


class DegenerateSplit(SpontserError, ValueError):
    pass


class LengthMismatch(SpontserError, ValueError):
    pass


class UnknownDescriptor(SpontserError, ValueError):
    pass


class EmptyFeature(SpontserError, ValueError):
    pass


class MissingAudio(SpontserError):
    def __init__(self, utterance_id, path):
        self.utterance_id = utterance_id
        super().__init__(f"utterance {utterance_id!r}: cannot read {path}")
