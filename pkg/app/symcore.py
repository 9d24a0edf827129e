"""
Exact phase-space symbols.

A symbol is a rational function ``N(z, zb) / (1 + z*zb)**k`` whose numerator is a
polynomial with Gaussian-rational coefficients. The polynomial work is done by
sympy over the domain ``QQ_I``; floating point only appears in ``evaluate``.
"""
import logging
from typing import Dict, List, Tuple, Union

import numpy as np
import sympy
from sympy import QQ_I, Poly
from sympy.polys.polyerrors import ExactQuotientFailed

from app.errors import ExpressionSyntaxError, OutsideClosedFamily, UnknownAtom

logger = logging.getLogger(__name__)

Z, ZB = sympy.symbols("z zb")
GaussRational = QQ_I.dtype
Monomial = Tuple[int, int]
Scalar = Union[int, str, sympy.Expr, GaussRational]

ONE_PLUS = Poly(1 + Z * ZB, Z, ZB, domain=QQ_I)
_ZERO_POLY = Poly(0, Z, ZB, domain=QQ_I)


def gauss(value: Scalar) -> GaussRational:
    """
    Convert an exact scalar to a Gaussian rational.

    Args:
        value (Scalar): An int, a string such as ``"1/2"``, a sympy number (possibly with ``I``) or
            an element of ``QQ_I``.

    Returns:
        GaussRational: The exact domain element.

    Raises:
        TypeError: If the value is a float or a complex float.
    """
    if isinstance(value, GaussRational):
        return value
    if isinstance(value, (float, complex)):
        raise TypeError(f"exact scalar expected, got {value!r}")
    expr = sympy.expand(sympy.sympify(value))
    if expr.has(sympy.Float):
        raise TypeError(f"exact scalar expected, got {value!r}")
    return QQ_I.from_sympy(expr)


def gauss_complex(value: GaussRational) -> complex:
    return complex(float(value.x), float(value.y))


def gauss_sympy(value: GaussRational) -> sympy.Expr:
    return QQ_I.to_sympy(value)


def gauss_conj(value: GaussRational) -> GaussRational:
    return GaussRational(value.x, -value.y)


def gauss_parts(value: GaussRational) -> Tuple[sympy.Rational, sympy.Rational]:
    """Real and imaginary parts as sympy rationals."""
    return (sympy.Rational(int(value.x.numerator), int(value.x.denominator)),
            sympy.Rational(int(value.y.numerator), int(value.y.denominator)))


def _poly(terms: Dict[Monomial, GaussRational]) -> Poly:
    if not terms:
        return _ZERO_POLY
    return Poly.from_dict(terms, Z, ZB, domain=QQ_I)


class PhaseSymbol:
    """
    Canonical rational symbol ``numerator / (1 + z*zb)**denom_power``.

    The constructor canonicalizes: common factors of ``1 + z*zb`` are cancelled,
    a negative power is folded into the numerator and the zero symbol has
    ``denom_power == 0``. Instances are immutable.
    """

    __slots__ = ("numerator", "denom_power")

    def __init__(self, numerator: Poly, denom_power: int = 0):
        if numerator.is_zero:
            denom_power = 0
        if denom_power < 0:
            numerator = numerator * ONE_PLUS ** (-denom_power)
            denom_power = 0
        while denom_power > 0:
            try:
                numerator = numerator.exquo(ONE_PLUS)
            except ExactQuotientFailed:
                break
            denom_power -= 1
        object.__setattr__(self, "numerator", numerator)
        object.__setattr__(self, "denom_power", denom_power)

    def __setattr__(self, key, value):
        raise AttributeError("PhaseSymbol is immutable")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_terms(cls, terms: Dict[Monomial, Scalar], denom_power: int = 0) -> "PhaseSymbol":
        converted = {monomial: gauss(c) for monomial, c in terms.items() if gauss(c)}
        return cls(_poly(converted), denom_power)

    @classmethod
    def constant(cls, value: Scalar) -> "PhaseSymbol":
        return cls.from_terms({(0, 0): value})

    @classmethod
    def from_expr(cls, expr: sympy.Expr) -> "PhaseSymbol":
        """
        Build a symbol from a sympy expression in ``z`` and ``zb``.

        Raises:
            OutsideClosedFamily: If the reduced denominator is not a constant
                times a power of ``1 + z*zb``.
        """
        numerator, denominator = sympy.fraction(sympy.cancel(sympy.together(expr)))
        den = Poly(denominator, Z, ZB, domain=QQ_I)
        power = 0
        while not den.is_ground:
            try:
                den = den.exquo(ONE_PLUS)
            except ExactQuotientFailed:
                raise OutsideClosedFamily(
                    "denominator is not a power of (1 + z*zb)", subexpression=str(expr)
                )
            power += 1
        scale = QQ_I.one / gauss(den.as_expr())
        num = Poly(numerator, Z, ZB, domain=QQ_I).mul_ground(scale)
        return cls(num, power)

    # -- inspection ---------------------------------------------------------

    def terms(self) -> List[Tuple[Monomial, GaussRational]]:
        """Numerator terms sorted by monomial, zero coefficients dropped."""
        items = self.numerator.as_dict(native=True).items()
        return sorted((m, c) for m, c in items if c)

    @property
    def is_zero(self) -> bool:
        return self.numerator.is_zero

    def is_constant(self) -> bool:
        return self.denom_power == 0 and self.numerator.is_ground

    def constant_value(self) -> GaussRational:
        if not self.is_constant():
            raise ValueError(f"{self.render()} is not constant")
        return dict(self.terms()).get((0, 0), QQ_I.zero)

    def is_holomorphic(self) -> bool:
        """True iff the symbol depends on ``z`` only."""
        return self.denom_power == 0 and all(b == 0 for (_, b), _ in self.terms())

    def holomorphic_coefficients(self) -> Dict[int, GaussRational]:
        """Coefficients of ``z**a`` for a holomorphic symbol."""
        if not self.is_holomorphic():
            raise ValueError(f"{self.render()} depends on zb")
        return {a: c for (a, _), c in self.terms()}

    # -- algebra ------------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "PhaseSymbol":
        if isinstance(other, PhaseSymbol):
            return other
        return PhaseSymbol.constant(other)

    def __add__(self, other) -> "PhaseSymbol":
        other = PhaseSymbol._coerce(other)
        k = max(self.denom_power, other.denom_power)
        left = self.numerator * ONE_PLUS ** (k - self.denom_power)
        right = other.numerator * ONE_PLUS ** (k - other.denom_power)
        return PhaseSymbol(left + right, k)

    __radd__ = __add__

    def __neg__(self) -> "PhaseSymbol":
        return PhaseSymbol(-self.numerator, self.denom_power)

    def __sub__(self, other) -> "PhaseSymbol":
        return self + (-PhaseSymbol._coerce(other))

    def __rsub__(self, other) -> "PhaseSymbol":
        return PhaseSymbol._coerce(other) - self

    def __mul__(self, other) -> "PhaseSymbol":
        if not isinstance(other, PhaseSymbol):
            return PhaseSymbol(self.numerator.mul_ground(gauss(other)), self.denom_power)
        return PhaseSymbol(self.numerator * other.numerator, self.denom_power + other.denom_power)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "PhaseSymbol":
        if n < 0:
            raise ValueError("negative powers leave the symbol algebra")
        return PhaseSymbol(self.numerator ** n, self.denom_power * n)

    def __truediv__(self, other) -> "PhaseSymbol":
        if not isinstance(other, PhaseSymbol):
            return self * (QQ_I.one / gauss(other))
        return self.divide(other)

    def divide(self, other: "PhaseSymbol") -> "PhaseSymbol":
        """
        Divide by a symbol of the form ``c / (1 + z*zb)**k``.

        Raises:
            OutsideClosedFamily: If the divisor has a non-constant numerator.
        """
        if other.is_zero or not other.numerator.is_ground:
            raise OutsideClosedFamily("division leaves the symbol algebra", subexpression=other.render())
        scale = QQ_I.one / other.numerator.as_dict(native=True)[(0, 0)]
        return PhaseSymbol(self.numerator.mul_ground(scale), self.denom_power - other.denom_power)

    def conj(self) -> "PhaseSymbol":
        """Swap ``z`` and ``zb`` and conjugate every coefficient."""
        return PhaseSymbol(_poly({(b, a): gauss_conj(c) for (a, b), c in self.terms()}), self.denom_power)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhaseSymbol):
            try:
                other = PhaseSymbol.constant(other)
            except (TypeError, sympy.SympifyError):
                return NotImplemented
        return self.denom_power == other.denom_power and self.numerator == other.numerator

    def __hash__(self) -> int:
        return hash((tuple(self.terms()), self.denom_power))

    # -- numerics and text --------------------------------------------------

    def evaluate(self, z) -> np.ndarray:
        """Numeric value at one point or an array of points."""
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        total = np.zeros_like(z)
        for (a, b), c in self.terms():
            total = total + gauss_complex(c) * z ** a * zb ** b
        if self.denom_power:
            total = total / (1.0 + (z * zb).real) ** self.denom_power
        return total

    def as_expr(self) -> sympy.Expr:
        expr = self.numerator.as_expr()
        if self.denom_power:
            expr = expr / (1 + Z * ZB) ** self.denom_power
        return expr

    def render(self) -> str:
        """Canonical text, e.g. ``z*zb - 1/2``."""
        return str(self.as_expr())

    def __repr__(self) -> str:
        return f"PhaseSymbol({self.render()!r})"


ZERO = PhaseSymbol(_ZERO_POLY)
ONE = PhaseSymbol.constant(1)
ZS = PhaseSymbol.from_terms({(1, 0): 1})
ZBS = PhaseSymbol.from_terms({(0, 1): 1})
MODULUS_SQUARED = PhaseSymbol.from_terms({(1, 1): 1})


def algebra(a: PhaseSymbol, b: PhaseSymbol, op: str) -> PhaseSymbol:
    """
    Combine symbols with ``add`` or ``mul``; ``conj`` ignores ``b``.
    """
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "conj":
        return a.conj()
    raise ValueError(f"unknown symbol operation {op!r}")


def derivative(f: PhaseSymbol, var: str) -> PhaseSymbol:
    """
    Exact partial derivative with respect to ``z`` or ``zb``.

    Args:
        f (PhaseSymbol): Canonical symbol.
        var (str): ``"z"`` or ``"zb"``.

    Returns:
        PhaseSymbol: The quotient-rule derivative, canonical.
    """
    gen = {"z": Z, "zb": ZB}[var]
    k = f.denom_power
    numerator = f.numerator.diff(gen)
    if k == 0:
        return PhaseSymbol(numerator)
    # d(N/u^k) = (N' u - k N u') / u^(k+1), with u' = zb for z and z for zb
    other = Poly(ZB if gen is Z else Z, Z, ZB, domain=QQ_I)
    return PhaseSymbol(numerator * ONE_PLUS - f.numerator.mul_ground(gauss(k)) * other, k + 1)


def _holomorphic_remainder(numerator: Poly) -> Dict[int, GaussRational]:
    # value of N(z, -1/z): the part of N that survives modulo (1 + z*zb)
    collected: Dict[int, GaussRational] = {}
    for (a, b), c in numerator.as_dict(native=True).items():
        exponent = a - b
        collected[exponent] = collected.get(exponent, QQ_I.zero) + (c if b % 2 == 0 else -c)
    return {e: c for e, c in collected.items() if c}


def _integrate_power(a: int, k: int) -> PhaseSymbol:
    # z**a / u**k integrated over zb, k >= 2
    scale = QQ_I.one / gauss(k - 1)
    if a >= 1:
        return PhaseSymbol(_poly({(a - 1, 0): -scale}), k - 1)
    # (u**(k-1) - 1) / z stays polynomial and vanishes at zb = 0
    shifted = (ONE_PLUS ** (k - 1) - Poly(1, Z, ZB, domain=QQ_I)).exquo(Poly(Z, Z, ZB, domain=QQ_I))
    return PhaseSymbol(shifted.mul_ground(scale), k - 1)


def antiderivative_dzbar(g: PhaseSymbol) -> PhaseSymbol:
    """
    Antiderivative in ``zb`` inside the symbol algebra.

    The holomorphic integration constant is left to the caller.

    Args:
        g (PhaseSymbol): Polynomial terms plus terms ``z**a / (1 + z*zb)**k``
            with ``k >= 2``.

    Returns:
        PhaseSymbol: ``F`` with ``derivative(F, "zb") == g``.

    Raises:
        OutsideClosedFamily: If some term integrates to a logarithm or to a
            negative power of ``z``.
    """
    k = g.denom_power
    if k == 0:
        return PhaseSymbol(_poly({(a, b + 1): c / gauss(b + 1) for (a, b), c in g.terms()}))
    remainder = _holomorphic_remainder(g.numerator)
    if any(e < 0 for e in remainder) or (k == 1 and remainder):
        raise OutsideClosedFamily("no antiderivative in the symbol algebra", subexpression=g.render())
    result = ZERO
    for exponent, c in sorted(remainder.items()):
        result = result + _integrate_power(exponent, k) * c
    rest = g.numerator - _poly({(e, 0): c for e, c in remainder.items()})
    if not rest.is_zero:
        result = result + antiderivative_dzbar(PhaseSymbol(rest.exquo(ONE_PLUS), k - 1))
    return result


def evaluate(f: PhaseSymbol, z) -> np.ndarray:
    return f.evaluate(z)


def is_real(f: PhaseSymbol) -> bool:
    return f.conj() == f


def parse_symbol(text: str) -> PhaseSymbol:
    """
    Parse the canonical text form produced by ``PhaseSymbol.render``.

    Raises:
        ExpressionSyntaxError: If the text is not a valid expression or holds
            floating literals.
        UnknownAtom: If a name other than ``z``, ``zb`` or ``I`` appears.
        OutsideClosedFamily: If the denominator leaves the symbol algebra.
    """
    try:
        expr = sympy.sympify(text, locals={"z": Z, "zb": ZB, "I": sympy.I})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ExpressionSyntaxError(str(exc), subexpression=text)
    if expr.has(sympy.Float):
        raise ExpressionSyntaxError("floating literals are not exact", subexpression=text)
    unknown = expr.free_symbols - {Z, ZB}
    if unknown:
        raise UnknownAtom(", ".join(sorted(map(str, unknown))), subexpression=text)
    return PhaseSymbol.from_expr(expr)
