from typing import Optional


class DequantError(ValueError):
    """
    Base class for every domain error raised by the library.

    Args:
        detail (str): Human readable description of the failure.
        subexpression (Optional[str]): The rendered operator, symbol or source
            text the failure is attached to, if any.
    """

    def __init__(self, detail: str = "", subexpression: Optional[str] = None):
        super().__init__(detail)
        self.detail = detail
        self.subexpression = subexpression

    @property
    def name(self) -> str:
        """Machine-readable error name printed by the command line surface."""
        return type(self).error_name or type(self).__name__

    error_name: Optional[str] = None

    def to_dict(self) -> dict:
        return {"error": self.name, "detail": self.detail, "subexpression": self.subexpression}


# symcore
class OutsideClosedFamily(DequantError):
    pass


# opalg
class TruncationTooSmall(DequantError):
    pass


class NotDiagonal(DequantError):
    pass


class NoMatch(DequantError):
    pass


# geom / dequant
class PolarizationViolated(DequantError):
    pass


class NotClosedForm(DequantError):
    pass


class NotFirstOrder(DequantError):
    pass


class InconsistentScalarPart(DequantError):
    pass


class NotReal(DequantError):
    pass


class Unsupported(DequantError):
    pass


class NoSolution(DequantError):
    pass


class NotSpectral(DequantError):
    pass


# pathint
class DivergentSum(DequantError):
    pass


class MissingRule(DequantError):
    pass


class QuadratureNotConverged(DequantError):
    pass


# expression language
class ExpressionSyntaxError(DequantError):
    error_name = "SyntaxError"


class UnknownAtom(DequantError):
    pass


class MissingSpinLabel(DequantError):
    pass


class MissingSystem(DequantError):
    pass
