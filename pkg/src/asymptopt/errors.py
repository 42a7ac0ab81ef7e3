"""Exception hierarchy shared by all modules."""


class AsymptoptError(Exception):
    """Base class for library errors."""


class DimensionMismatchError(AsymptoptError, ValueError):
    pass


class EmptySetError(AsymptoptError):
    """Raised when a polyhedron (or a sphere slice of a cone) is empty."""


class CapExceededError(AsymptoptError):
    """A configured size cap (dimension, rows, faces) was exceeded."""


class IterationLimitError(AsymptoptError):
    pass


class VerdictError(AsymptoptError):
    """An operation was called with a regularity verdict it does not accept."""


class SchemaError(AsymptoptError, ValueError):
    """A JSON document does not match the expected schema.

    ``path`` names the offending location, e.g. ``objective.terms[2].exponents``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
