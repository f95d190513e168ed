"""Exception hierarchy shared by every module of the package."""


class BrinkmannError(Exception):
    """Base class for all library errors."""


class ExprSyntaxError(BrinkmannError):
    def __init__(self, message, offset, text=""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(BrinkmannError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class EvaluationError(BrinkmannError):
    """Raised for division by zero, log/sqrt domain violations and similar."""

    def __init__(self, message, offset=None):
        self.offset = offset
        where = "" if offset is None else f" (expression offset {offset})"
        super().__init__(message + where)


class SpecError(BrinkmannError):
    """Invalid spacetime specification document. ``path`` locates the field."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DomainError(BrinkmannError):
    pass


class DegeneracyError(BrinkmannError):
    pass


class TransportError(BrinkmannError):
    def __init__(self, message, parameter):
        self.parameter = parameter
        super().__init__(f"{message} (curve parameter {parameter:.17g})")


class NormalizationError(BrinkmannError):
    pass


class CatalogError(BrinkmannError):
    pass
