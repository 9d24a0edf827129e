"""
Exact operator algebra.

Bosonic words are kept normal ordered (``ad^p a^q``), spin operators as
polynomials in ``Sz`` and tensor operators as a canonical map from one
monomial per subsystem to a Gaussian-rational coefficient.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from sympy import QQ_I, Poly
from sympy.polys.matrices import DomainMatrix

from app.errors import NoMatch, NotDiagonal, TruncationTooSmall, Unsupported
from app.geom import spin_label
from app.symcore import (
    ONE, ZERO, ZS, GaussRational, PhaseSymbol, Scalar, derivative, gauss, gauss_complex, gauss_conj,
)

logger = logging.getLogger(__name__)

BosonMonomial = Tuple[int, int]
Monomial = Union[BosonMonomial, int]

_NUMBER = sympy.Symbol("N")
_SZ = sympy.Symbol("Sz")


@dataclass(frozen=True)
class Subsystem:
    kind: str  # 'boson' or 'spin'
    spin: Optional[sympy.Rational] = None

    @classmethod
    def boson(cls) -> "Subsystem":
        return cls("boson")

    @classmethod
    def spin_system(cls, s) -> "Subsystem":
        return cls("spin", spin_label(s))

    def label(self) -> str:
        return "boson" if self.kind == "boson" else f"spin:{self.spin}"


def _boson_product(left: BosonMonomial, right: BosonMonomial) -> Dict[BosonMonomial, int]:
    # ad^p1 a^q1 ad^p2 a^q2 via a^q ad^r = sum_k k! C(q,k) C(r,k) ad^(r-k) a^(q-k)
    (p1, q1), (p2, q2) = left, right
    out = {}
    for k in range(min(q1, p2) + 1):
        out[(p1 + p2 - k, q1 + q2 - k)] = math.factorial(k) * math.comb(q1, k) * math.comb(p2, k)
    return out


def _clean(terms: Mapping) -> Dict:
    return {m: c for m, c in terms.items() if c}


class BosonOperator:
    """
    Normal-ordered polynomial ``sum c_pq ad^p a^q`` in one bosonic mode.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Mapping[BosonMonomial, Scalar]] = None):
        self._terms = _clean({m: gauss(c) for m, c in (terms or {}).items()})

    @classmethod
    def identity(cls, coeff: Scalar = 1) -> "BosonOperator":
        return cls({(0, 0): coeff})

    @classmethod
    def creation(cls) -> "BosonOperator":
        return cls({(1, 0): 1})

    @classmethod
    def annihilation(cls) -> "BosonOperator":
        return cls({(0, 1): 1})

    @classmethod
    def number(cls) -> "BosonOperator":
        return cls({(1, 1): 1})

    @property
    def terms(self) -> Dict[BosonMonomial, GaussRational]:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items())

    def coeff(self, p: int, q: int) -> GaussRational:
        return self._terms.get((p, q), QQ_I.zero)

    def degree(self) -> int:
        return max((p + q for p, q in self._terms), default=0)

    def is_diagonal(self) -> bool:
        return all(p == q for p, q in self._terms)

    def is_scalar(self) -> bool:
        return all(m == (0, 0) for m in self._terms)

    def adjoint(self) -> "BosonOperator":
        return BosonOperator({(q, p): gauss_conj(c) for (p, q), c in self._terms.items()})

    def is_hermitian(self) -> bool:
        return self.adjoint() == self

    def __add__(self, other) -> "BosonOperator":
        other = other if isinstance(other, BosonOperator) else BosonOperator.identity(other)
        merged = dict(self._terms)
        for m, c in other._terms.items():
            merged[m] = merged.get(m, QQ_I.zero) + c
        return BosonOperator(merged)

    __radd__ = __add__

    def __neg__(self) -> "BosonOperator":
        return self * -1

    def __sub__(self, other) -> "BosonOperator":
        other = other if isinstance(other, BosonOperator) else BosonOperator.identity(other)
        return self + (-other)

    def __rsub__(self, other) -> "BosonOperator":
        return BosonOperator.identity(other) - self

    def __mul__(self, other) -> "BosonOperator":
        if not isinstance(other, BosonOperator):
            factor = gauss(other)
            return BosonOperator({m: c * factor for m, c in self._terms.items()})
        out: Dict[BosonMonomial, GaussRational] = {}
        for (m1, c1), (m2, c2) in itertools.product(self._terms.items(), other._terms.items()):
            for m, weight in _boson_product(m1, m2).items():
                out[m] = out.get(m, QQ_I.zero) + c1 * c2 * weight
        return BosonOperator(out)

    def __rmul__(self, other) -> "BosonOperator":
        return self * other

    def __pow__(self, n: int) -> "BosonOperator":
        result = BosonOperator.identity()
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, BosonOperator):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(tuple(self.items()))

    def __repr__(self) -> str:
        return f"BosonOperator({self.items()!r})"


def normal_order(*factors: BosonOperator) -> BosonOperator:
    """
    Normal-ordered product of bosonic operators, leftmost factor first.

    Args:
        *factors (BosonOperator): Operators to multiply.

    Returns:
        BosonOperator: The canonical normal-ordered product.
    """
    result = BosonOperator.identity()
    for factor in factors:
        result = result * factor
    return result


def _coeff_poly(coeffs: Sequence[GaussRational]) -> Poly:
    return Poly.from_dict({(j,): c for j, c in enumerate(coeffs) if c} or {(0,): QQ_I.zero}, _SZ, domain=QQ_I)


def _poly_coeffs(poly: Poly) -> Tuple[GaussRational, ...]:
    table = poly.as_dict(native=True)
    if not table:
        return ()
    top = max(j for (j,) in table)
    return tuple(table.get((j,), QQ_I.zero) for j in range(top + 1))


class SpinOperator:
    """
    Polynomial ``sum c_j Sz**j`` in the spin-``s`` representation.

    Trailing zero coefficients are dropped; the degree is not reduced modulo
    the minimal polynomial of ``Sz``.
    """

    __slots__ = ("spin", "coeffs")

    def __init__(self, spin, coeffs: Sequence[Scalar] = ()):
        values = [gauss(c) for c in coeffs]
        while values and not values[-1]:
            values.pop()
        self.spin = spin_label(spin)
        self.coeffs: Tuple[GaussRational, ...] = tuple(values)

    @classmethod
    def identity(cls, spin, coeff: Scalar = 1) -> "SpinOperator":
        return cls(spin, [coeff])

    @classmethod
    def sz(cls, spin) -> "SpinOperator":
        return cls(spin, [0, 1])

    @property
    def dimension(self) -> int:
        return int(2 * self.spin) + 1

    def degree(self) -> int:
        return max(len(self.coeffs) - 1, 0)

    def is_scalar(self) -> bool:
        return self.degree() == 0

    def items(self):
        return [(j, c) for j, c in enumerate(self.coeffs) if c]

    def adjoint(self) -> "SpinOperator":
        return SpinOperator(self.spin, [gauss_conj(c) for c in self.coeffs])

    def is_hermitian(self) -> bool:
        return all(not c.y for c in self.coeffs)

    def _check(self, other: "SpinOperator"):
        if other.spin != self.spin:
            raise Unsupported(f"spin {self.spin} and spin {other.spin} in one subsystem")

    def __add__(self, other) -> "SpinOperator":
        other = other if isinstance(other, SpinOperator) else SpinOperator.identity(self.spin, other)
        self._check(other)
        return SpinOperator(self.spin, _poly_coeffs(_coeff_poly(self.coeffs) + _coeff_poly(other.coeffs)))

    __radd__ = __add__

    def __neg__(self) -> "SpinOperator":
        return self * -1

    def __sub__(self, other) -> "SpinOperator":
        other = other if isinstance(other, SpinOperator) else SpinOperator.identity(self.spin, other)
        return self + (-other)

    def __mul__(self, other) -> "SpinOperator":
        if not isinstance(other, SpinOperator):
            factor = gauss(other)
            return SpinOperator(self.spin, [c * factor for c in self.coeffs])
        self._check(other)
        return SpinOperator(self.spin, _poly_coeffs(_coeff_poly(self.coeffs) * _coeff_poly(other.coeffs)))

    def __rmul__(self, other) -> "SpinOperator":
        return self * other

    def __pow__(self, n: int) -> "SpinOperator":
        result = SpinOperator.identity(self.spin)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpinOperator):
            return NotImplemented
        return self.spin == other.spin and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.spin, self.coeffs))

    def __repr__(self) -> str:
        return f"SpinOperator(s={self.spin}, coeffs={self.coeffs!r})"


SlotOperator = Union[BosonOperator, SpinOperator]


def _slot_terms(op: SlotOperator) -> Dict[Monomial, GaussRational]:
    if isinstance(op, BosonOperator):
        return op.terms
    return dict(op.items())


def _slot_operator(system: Subsystem, monomial: Monomial, coeff: Scalar = 1) -> SlotOperator:
    if system.kind == "boson":
        return BosonOperator({monomial: coeff})
    coeffs = [0] * monomial + [coeff]
    return SpinOperator(system.spin, coeffs)


def _slot_product(system: Subsystem, left: Monomial, right: Monomial) -> Dict[Monomial, int]:
    if system.kind == "boson":
        return _boson_product(left, right)
    return {left + right: 1}


def _slot_identity(system: Subsystem) -> Monomial:
    return (0, 0) if system.kind == "boson" else 0


class TensorOperator:
    """
    Operator on a product of bosonic and spin subsystems.

    Stored canonically as ``{(m_1, ..., m_n): coeff}`` where ``m_j`` is a boson
    monomial ``(p, q)`` or a spin power ``j``. ``summands`` gives the
    ``(coeff, factors)`` view with explicit identity factors.
    """

    __slots__ = ("systems", "_terms")

    def __init__(self, systems: Sequence[Subsystem], terms: Optional[Mapping[Tuple, Scalar]] = None):
        self.systems: Tuple[Subsystem, ...] = tuple(systems)
        converted = {}
        for key, c in (terms or {}).items():
            if len(key) != len(self.systems):
                raise ValueError("every summand needs one factor per subsystem")
            converted[tuple(key)] = gauss(c)
        self._terms = _clean(converted)

    # -- construction -------------------------------------------------------

    @classmethod
    def identity(cls, systems: Sequence[Subsystem], coeff: Scalar = 1) -> "TensorOperator":
        return cls(systems, {tuple(_slot_identity(s) for s in systems): coeff})

    @classmethod
    def from_factors(cls, systems: Sequence[Subsystem], factors: Sequence[Optional[SlotOperator]],
                     coeff: Scalar = 1) -> "TensorOperator":
        """
        Tensor product of one operator per subsystem; ``None`` stands for the identity.
        """
        systems = tuple(systems)
        per_slot = []
        for system, factor in zip(systems, factors):
            if factor is None:
                per_slot.append({_slot_identity(system): QQ_I.one})
                continue
            if isinstance(factor, SpinOperator) and (system.kind != "spin" or system.spin != factor.spin):
                raise Unsupported(f"spin factor placed on a {system.label()} subsystem")
            if isinstance(factor, BosonOperator) and system.kind != "boson":
                raise Unsupported(f"boson factor placed on a {system.label()} subsystem")
            per_slot.append(_slot_terms(factor))
        base = gauss(coeff)
        terms: Dict[Tuple, GaussRational] = {}
        for combo in itertools.product(*(sorted(s.items()) for s in per_slot)):
            key = tuple(m for m, _ in combo)
            value = base
            for _, c in combo:
                value = value * c
            terms[key] = terms.get(key, QQ_I.zero) + value
        return cls(systems, terms)

    @classmethod
    def single(cls, op: SlotOperator) -> "TensorOperator":
        system = Subsystem.boson() if isinstance(op, BosonOperator) else Subsystem("spin", op.spin)
        return cls.from_factors((system,), (op,))

    # -- inspection ---------------------------------------------------------

    @property
    def arity(self) -> int:
        return len(self.systems)

    @property
    def terms(self) -> Dict[Tuple, GaussRational]:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items())

    @property
    def summands(self) -> Iterator[Tuple[GaussRational, Tuple[SlotOperator, ...]]]:
        for key, c in self.items():
            yield c, tuple(_slot_operator(s, m) for s, m in zip(self.systems, key))

    def factor(self, slot: int) -> SlotOperator:
        """The single-subsystem operator of an arity-one tensor operator."""
        if self.arity != 1:
            raise Unsupported("operator acts on more than one subsystem")
        system = self.systems[slot]
        total = _slot_operator(system, _slot_identity(system), 0)
        for key, c in self._terms.items():
            total = total + _slot_operator(system, key[slot], c)
        return total

    def slot_degree(self, slot: int) -> int:
        system = self.systems[slot]
        if system.kind == "boson":
            return max((sum(key[slot]) for key in self._terms), default=0)
        return max((key[slot] for key in self._terms), default=0)

    def is_hermitian(self) -> bool:
        return self.adjoint() == self

    def adjoint(self) -> "TensorOperator":
        flipped = {}
        for key, c in self._terms.items():
            new_key = tuple((m[1], m[0]) if s.kind == "boson" else m for s, m in zip(self.systems, key))
            flipped[new_key] = gauss_conj(c)
        return TensorOperator(self.systems, flipped)

    def is_scalar(self) -> bool:
        identity = tuple(_slot_identity(s) for s in self.systems)
        return all(key == identity for key in self._terms)

    # -- algebra ------------------------------------------------------------

    def _check(self, other: "TensorOperator"):
        if other.systems != self.systems:
            raise Unsupported("operators act on different subsystem layouts")

    def __add__(self, other) -> "TensorOperator":
        if not isinstance(other, TensorOperator):
            other = TensorOperator.identity(self.systems, other)
        self._check(other)
        merged = dict(self._terms)
        for key, c in other._terms.items():
            merged[key] = merged.get(key, QQ_I.zero) + c
        return TensorOperator(self.systems, merged)

    __radd__ = __add__

    def __neg__(self) -> "TensorOperator":
        return self * -1

    def __sub__(self, other) -> "TensorOperator":
        if not isinstance(other, TensorOperator):
            other = TensorOperator.identity(self.systems, other)
        return self + (-other)

    def __mul__(self, other) -> "TensorOperator":
        if not isinstance(other, TensorOperator):
            factor = gauss(other)
            return TensorOperator(self.systems, {k: c * factor for k, c in self._terms.items()})
        self._check(other)
        out: Dict[Tuple, GaussRational] = {}
        for (k1, c1), (k2, c2) in itertools.product(self._terms.items(), other._terms.items()):
            slots = [sorted(_slot_product(s, m1, m2).items()) for s, m1, m2 in zip(self.systems, k1, k2)]
            for combo in itertools.product(*slots):
                key = tuple(m for m, _ in combo)
                weight = math.prod(w for _, w in combo)
                out[key] = out.get(key, QQ_I.zero) + c1 * c2 * weight
        return TensorOperator(self.systems, out)

    def __rmul__(self, other) -> "TensorOperator":
        return self * other

    def __pow__(self, n: int) -> "TensorOperator":
        result = TensorOperator.identity(self.systems)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorOperator):
            return NotImplemented
        return self.systems == other.systems and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.systems, tuple(self.items())))

    def __repr__(self) -> str:
        return f"TensorOperator({[s.label() for s in self.systems]}, {self.items()!r})"


def kron(*ops: TensorOperator) -> TensorOperator:
    """Tensor product of operators, subsystems concatenated left to right."""
    systems = tuple(itertools.chain.from_iterable(op.systems for op in ops))
    terms: Dict[Tuple, GaussRational] = {}
    for combo in itertools.product(*(op.items() for op in ops)):
        key = tuple(itertools.chain.from_iterable(k for k, _ in combo))
        value = QQ_I.one
        for _, c in combo:
            value = value * c
        terms[key] = terms.get(key, QQ_I.zero) + value
    return TensorOperator(systems, terms)


# -- matrix realizations ------------------------------------------------------

@lru_cache(maxsize=None)
def _boson_monomial_matrix(truncation: int, p: int, q: int) -> np.ndarray:
    # truncated powers of a and ad are exact projections for normal-ordered words
    lower = np.diag(np.sqrt(np.arange(1, truncation, dtype=float)), k=1)
    matrix = np.linalg.matrix_power(lower.T, p) @ np.linalg.matrix_power(lower, q)
    matrix.setflags(write=False)
    return matrix


def spin_projections(spin: sympy.Rational) -> np.ndarray:
    """Eigenvalues of ``Sz`` in the basis order ``j = s, s-1, ..., -s``."""
    return float(spin) - np.arange(int(2 * spin) + 1, dtype=float)


def _slot_matrix(system: Subsystem, monomial: Monomial, truncation: int) -> np.ndarray:
    if system.kind == "boson":
        return _boson_monomial_matrix(truncation, *monomial)
    return np.diag(spin_projections(system.spin) ** monomial)


def dimension(systems: Sequence[Subsystem], truncation: int) -> int:
    return math.prod(truncation if s.kind == "boson" else int(2 * s.spin) + 1 for s in systems)


def to_matrix(op: Union[TensorOperator, SlotOperator], truncation: int) -> np.ndarray:
    """
    Matrix of an operator in the Fock and ``|s, j>`` product basis.

    Args:
        op (TensorOperator): The operator; bare boson or spin operators are
            promoted to a single subsystem.
        truncation (int): Fock cutoff ``D`` of every bosonic subsystem.

    Returns:
        np.ndarray: Complex matrix, Kronecker ordered as the subsystems.

    Raises:
        TruncationTooSmall: If ``D`` is below a bosonic slot degree plus two.
    """
    if not isinstance(op, TensorOperator):
        op = TensorOperator.single(op)
    for slot, system in enumerate(op.systems):
        if system.kind == "boson" and truncation < op.slot_degree(slot) + 2:
            raise TruncationTooSmall(
                f"D={truncation} below degree {op.slot_degree(slot)} + 2 on subsystem {slot}"
            )
    size = dimension(op.systems, truncation)
    matrix = np.zeros((size, size), dtype=complex)
    for key, c in op.items():
        block = np.ones((1, 1))
        for system, monomial in zip(op.systems, key):
            block = np.kron(block, _slot_matrix(system, monomial, truncation))
        matrix += gauss_complex(c) * block
    return matrix


# -- coordinate-induced differential forms ------------------------------------

class DifferentialForm:
    """
    Holomorphic differential operator ``sum_k coeffs[k] d^k/dz^k``.

    For a first-order form ``c`` is the ``d/dz`` coefficient and ``v`` the
    multiplication part. Forms compose like operators on functions of ``z``:
    ``a.compose(b)`` applies ``b`` first.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[PhaseSymbol]):
        values = [c if isinstance(c, PhaseSymbol) else PhaseSymbol.constant(c) for c in coeffs]
        while len(values) > 1 and values[-1].is_zero:
            values.pop()
        self.coeffs: Tuple[PhaseSymbol, ...] = tuple(values) or (ZERO,)

    @classmethod
    def multiplication(cls, v: PhaseSymbol) -> "DifferentialForm":
        return cls([v])

    @classmethod
    def first_order(cls, c: PhaseSymbol, v: PhaseSymbol) -> "DifferentialForm":
        return cls([v, c])

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def v(self) -> PhaseSymbol:
        return self.coeffs[0]

    @property
    def c(self) -> PhaseSymbol:
        return self.coeffs[1] if len(self.coeffs) > 1 else ZERO

    @property
    def higher(self) -> Dict[int, PhaseSymbol]:
        return {k: c for k, c in enumerate(self.coeffs) if k >= 2}

    def is_holomorphic(self) -> bool:
        return all(c.is_holomorphic() for c in self.coeffs)

    def compose(self, other: "DifferentialForm") -> "DifferentialForm":
        """``self`` after ``other``, expanded with the Leibniz rule."""
        out = [ZERO] * (self.order + other.order + 1)
        for j, a in enumerate(self.coeffs):
            if a.is_zero:
                continue
            for k, b in enumerate(other.coeffs):
                derived = b
                for i in range(j, -1, -1):
                    # C(j, i) a_j (d^(j-i) b_k) d^(k+i)
                    out[k + i] = out[k + i] + a * derived * math.comb(j, i)
                    derived = derivative(derived, "z")
        return DifferentialForm(out)

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        size = max(len(self.coeffs), len(other.coeffs))
        left = list(self.coeffs) + [ZERO] * (size - len(self.coeffs))
        right = list(other.coeffs) + [ZERO] * (size - len(other.coeffs))
        return DifferentialForm([a + b for a, b in zip(left, right)])

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self + other * -1

    def __mul__(self, scalar) -> "DifferentialForm":
        return DifferentialForm([c * scalar for c in self.coeffs])

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, DifferentialForm):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return "DifferentialForm(" + ", ".join(c.render() for c in self.coeffs) + ")"

    def apply_to_series(self, z: complex, system: Subsystem, truncation: int) -> np.ndarray:
        """
        Apply the form to the holomorphic coherent state, component by component.
        """
        size = truncation if system.kind == "boson" else int(2 * system.spin) + 1
        out = np.zeros(size, dtype=complex)
        for n in range(size):
            norm = _series_norm(system, n)
            for k, coeff in enumerate(self.coeffs):
                if k > n or coeff.is_zero:
                    continue
                falling = math.perm(n, k)
                out[n] += complex(coeff.evaluate(z)) * falling * z ** (n - k) * norm
        return out


def _series_norm(system: Subsystem, n: int) -> float:
    if system.kind == "boson":
        return 1.0 / math.sqrt(math.factorial(n))
    return math.sqrt(math.comb(int(2 * system.spin), n))


def coherent_series(z: complex, system: Subsystem, truncation: int) -> np.ndarray:
    """Components of the holomorphic coherent state ``|z>`` in the matrix basis."""
    size = truncation if system.kind == "boson" else int(2 * system.spin) + 1
    return np.array([z ** n * _series_norm(system, n) for n in range(size)], dtype=complex)


def operator_commutator(first: DifferentialForm, second: DifferentialForm) -> DifferentialForm:
    """Form of ``[A, B]`` given the forms of ``A`` and ``B``."""
    return second.compose(first) - first.compose(second)


def coordinate_form(op: Union[SlotOperator, TensorOperator]) -> DifferentialForm:
    """
    Differential form ``D`` with ``op |z> = D |z>`` on holomorphic coherent states.

    ``ad^p a^q`` becomes ``z^q d^p/dz^p`` and ``Sz`` becomes ``-z d/dz + s``;
    products compose in reversed order.

    Raises:
        Unsupported: If the operator acts on more than one subsystem.
    """
    if isinstance(op, TensorOperator):
        op = op.factor(0)
    if isinstance(op, BosonOperator):
        total = DifferentialForm([ZERO])
        for (p, q), c in op.items():
            coeffs = [ZERO] * p + [ZS ** q * c]
            total = total + DifferentialForm(coeffs)
        return total
    generator = DifferentialForm.first_order(-ZS, PhaseSymbol.constant(op.spin))
    total = DifferentialForm([ZERO])
    power = DifferentialForm([ONE])
    for j, c in enumerate(op.coeffs):
        if j:
            power = generator.compose(power)
        if c:
            total = total + power * c
    return total


# -- number-operator polynomials -----------------------------------------------

def falling_factorial_decompose(op: BosonOperator) -> Tuple[GaussRational, ...]:
    """
    Rewrite a diagonal operator as a polynomial in ``N = ad*a``.

    Uses ``ad^k a^k = N (N - 1) ... (N - k + 1)``.

    Returns:
        Tuple[GaussRational, ...]: ``c_0, ..., c_n`` with ``op = sum c_n N**n``.

    Raises:
        NotDiagonal: If some term has ``p != q``.
    """
    if not op.is_diagonal():
        raise NotDiagonal("operator has off-diagonal ladder words", subexpression=repr(op))
    total = Poly(0, _NUMBER, domain=QQ_I)
    for (k, _), c in op.items():
        falling = Poly(math.prod((_NUMBER - i for i in range(k)), start=sympy.Integer(1)), _NUMBER, domain=QQ_I)
        total = total + falling.mul_ground(c)
    return _poly_coeffs(total)


def stirling_rebuild(coeffs: Sequence[Scalar]) -> BosonOperator:
    """Normal-ordered form of ``sum c_n N**n``."""
    number = BosonOperator.number()
    total = BosonOperator()
    for n, c in enumerate(coeffs):
        total = total + number ** n * c
    return total


@dataclass(frozen=True)
class GeneratorTemplate:
    """Hermitian first-order generator ``k N + c a + conj(c) ad + d``."""

    k: GaussRational
    c: GaussRational
    d: GaussRational

    def operator(self) -> BosonOperator:
        return BosonOperator({(1, 1): self.k, (0, 1): self.c, (1, 0): gauss_conj(self.c), (0, 0): self.d})


NUMBER_TEMPLATE = GeneratorTemplate(QQ_I.one, QQ_I.zero, QQ_I.zero)


def infer_generator(op: BosonOperator) -> GeneratorTemplate:
    """
    Guess the generator of which ``op`` could be a polynomial, from its top terms.

    The template is normalized to ``k = 1, d = 0`` when the top term is diagonal
    and to ``k = 0, d = 0`` with a fixed phase convention for ``c`` otherwise.

    Raises:
        NoMatch: If the top terms fit no generator power.
    """
    degree = op.degree()
    if degree == 0 or op.is_diagonal():
        return NUMBER_TEMPLATE
    top_terms = [m for m in op.terms if sum(m) == degree]
    if top_terms == [(degree // 2, degree // 2)] and degree % 2 == 0:
        top = degree // 2
        c = op.coeff(top - 1, top) / (op.coeff(top, top) * gauss(top))
        return GeneratorTemplate(QQ_I.one, c, QQ_I.zero)
    lead = op.coeff(0, degree)
    if not lead:
        raise NoMatch("top terms fit no generator power", subexpression=repr(op))
    ratio = op.coeff(1, degree - 1) / (lead * gauss(degree))
    if ratio.x * ratio.x + ratio.y * ratio.y != 1:
        raise NoMatch("top terms are not those of a Hermitian generator", subexpression=repr(op))
    c = gauss("I") if ratio == gauss(-1) else QQ_I.one + gauss_conj(ratio)
    return GeneratorTemplate(QQ_I.zero, c, QQ_I.zero)


def match_generator_polynomial(op: BosonOperator, template: GeneratorTemplate) -> Tuple[GaussRational, ...]:
    """
    Find ``l_n`` with ``op = sum l_n G**n`` for the generator of ``template``.

    The linear system is solved exactly over ``QQ_I`` on normal-ordered
    coefficient vectors and the result is re-verified by normal ordering.

    Args:
        op (BosonOperator): Operator to decompose.
        template (GeneratorTemplate): The generator ``G``.

    Returns:
        Tuple[GaussRational, ...]: ``l_0, ..., l_K``, trailing zeros dropped.

    Raises:
        NoMatch: If no polynomial in ``G`` equals ``op``.
    """
    generator = template.operator()
    degree = op.degree()
    top = degree if not template.k else degree // 2
    powers = [generator ** n for n in range(top + 1)]
    rows = sorted(set(op.terms).union(*(p.terms for p in powers)))
    matrix = [[p.coeff(*m) for p in powers] + [op.coeff(*m)] for m in rows]
    augmented = DomainMatrix(matrix, (len(rows), top + 2), QQ_I)
    reduced, pivots = augmented.rref()
    if top + 1 in pivots:
        raise NoMatch("residual is nonzero", subexpression=repr(op))
    solution = [QQ_I.zero] * (top + 1)
    entries = reduced.to_Matrix()
    for row, column in enumerate(pivots):
        solution[column] = gauss(entries[row, top + 1])
    rebuilt = BosonOperator()
    for n, l in enumerate(solution):
        rebuilt = rebuilt + powers[n] * l
    if rebuilt != op:
        raise NoMatch("symbolic verification failed", subexpression=repr(op))
    while len(solution) > 1 and not solution[-1]:
        solution.pop()
    logger.debug("matched %r as polynomial of degree %d in the generator", op, len(solution) - 1)
    return tuple(solution)
