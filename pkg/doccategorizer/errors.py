class CategorizerError(Exception):
    """Base class of every error raised by doccategorizer."""


class ShapeError(CategorizerError, ValueError):
    pass


class SequenceTooShortError(ShapeError):
    pass


class EmbeddingFormatError(CategorizerError, ValueError):
    pass


class SettingsError(CategorizerError, ValueError):
    pass


class EmptyDatasetError(CategorizerError, ValueError):
    pass


class FormatVersionError(CategorizerError, ValueError):
    pass


class InvalidRequestError(CategorizerError, ValueError):
    pass


class NotFoundError(CategorizerError, LookupError):
    pass


class NoContentError(NotFoundError):
    pass


class DuplicateCodeError(CategorizerError):
    pass


class IntegrityError(CategorizerError):
    pass


class NotTrainedError(CategorizerError):
    pass


class TrainingInterrupted(CategorizerError):
    pass


def describe(error: BaseException) -> str:
    return f"{error.__class__.__name__}: {error}"
