"""
Half-form quantization of phase-space symbols and its inverse.

``quantize`` turns a symbol into the holomorphic differential form of its
operator, ``dequantize_first_order`` runs the same relation backwards, and
``dequantize_extended`` lifts the inverse to polynomials in commuting
generators and to tensor products of subsystems.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from sympy import QQ_I, Poly

from app.errors import (
    InconsistentScalarPart, NoMatch, NoSolution, NotClosedForm, NotFirstOrder,
    NotReal, NotSpectral, PolarizationViolated, Unsupported,
)
from app.geom import (
    Manifold, SpectralRule, VectorField, hamiltonian_vector_field, poisson_bracket,
    preserves_polarization,
)
from app.opalg import (
    NUMBER_TEMPLATE, BosonOperator, DifferentialForm, GeneratorTemplate, SlotOperator,
    SpinOperator, Subsystem, TensorOperator, coordinate_form, falling_factorial_decompose,
    infer_generator, match_generator_polynomial, operator_commutator, to_matrix,
)
from app.symcore import (
    MODULUS_SQUARED, ONE, ZB, ZBS, ZS, Z, GaussRational, PhaseSymbol, antiderivative_dzbar,
    derivative, gauss, gauss_complex, gauss_conj, gauss_sympy, is_real,
)

logger = logging.getLogger(__name__)

HALF = gauss(sympy.Rational(1, 2))
HALF_I = PhaseSymbol.constant("I/2")


def manifold_for(system: Subsystem) -> Manifold:
    """Phase space carrying the coherent states of a subsystem."""
    if system.kind == "boson":
        return Manifold.plane()
    return Manifold.sphere(system.spin)


def _as_tensor(op: Union[SlotOperator, TensorOperator]) -> TensorOperator:
    return op if isinstance(op, TensorOperator) else TensorOperator.single(op)


@dataclass(frozen=True)
class DequantResult:
    symbol: PhaseSymbol
    field: VectorField
    polarization_ok: bool
    holomorphic_part: PhaseSymbol
    manifold: Manifold
    metaplectic: bool = True


def _scalar_term(xi_z: PhaseSymbol, manifold: Manifold, metaplectic: bool) -> PhaseSymbol:
    # multiplication part of Q(f) - f: 2 A_z xi^z, minus (i/2) d_z xi^z with the half-form
    prequantum = manifold.a_z * xi_z * 2
    if not metaplectic:
        return prequantum
    return prequantum - HALF_I * derivative(xi_z, "z")


def quantize(f: PhaseSymbol, manifold: Manifold, metaplectic: bool = True) -> DifferentialForm:
    """
    Half-form quantization of a symbol as a holomorphic differential form.

    Args:
        f (PhaseSymbol): Observable in the closed symbol family.
        manifold (Manifold): Phase space of the symbol.
        metaplectic (bool): Keep the half-form term; ``False`` is the
            prequantum negative control.

    Returns:
        DifferentialForm: ``c d/dz + v`` with ``c = -i xi^z``.

    Raises:
        PolarizationViolated: If the flow of ``f`` does not preserve the
            holomorphic polarization.
        NotClosedForm: If ``c`` or ``v`` keeps a ``zb`` dependence.
    """
    field_ = hamiltonian_vector_field(f, manifold)
    if not preserves_polarization(field_):
        raise PolarizationViolated("d/dz of xi^zb does not vanish", subexpression=f.render())
    c = field_.xi_z * PhaseSymbol.constant("-I")
    v = f + _scalar_term(field_.xi_z, manifold, metaplectic)
    if not (c.is_holomorphic() and v.is_holomorphic()):
        raise NotClosedForm("operator form keeps a zb dependence", subexpression=f.render())
    return DifferentialForm.first_order(c, v)


def dequantize_first_order(form: DifferentialForm, manifold: Manifold, metaplectic: bool = True,
                           hermitian: Optional[bool] = None) -> DequantResult:
    """
    Solve ``quantize(f) == form`` for the symbol ``f``.

    The ``d/dz`` coefficient fixes ``xi^z``; integrating ``d_zb f = -xi^z omega``
    gives ``f`` up to a holomorphic part, which the multiplication part then
    fixes uniquely.

    Args:
        form (DifferentialForm): First-order form with holomorphic coefficients.
        manifold (Manifold): Phase space of the subsystem.
        metaplectic (bool): Invert the half-form map (default) or the bare
            prequantum map.
        hermitian (Optional[bool]): When true the symbol must come out real.

    Returns:
        DequantResult: The symbol together with its vector field and the
        holomorphic integration constant.

    Raises:
        NotFirstOrder: If the form has order two or more.
        NotClosedForm: If a coefficient depends on ``zb``.
        InconsistentScalarPart: If no holomorphic constant matches ``v``.
        PolarizationViolated: If the recovered flow breaks the polarization.
        NotReal: If a Hermitian source yields a complex symbol.
    """
    if form.order >= 2:
        raise NotFirstOrder(f"form of order {form.order}", subexpression=repr(form))
    if not form.is_holomorphic():
        raise NotClosedForm("form coefficients depend on zb", subexpression=repr(form))
    xi_z = form.c * PhaseSymbol.constant("I")
    integrated = antiderivative_dzbar(-(xi_z * manifold.omega_zzbar))
    holomorphic = form.v - integrated - _scalar_term(xi_z, manifold, metaplectic)
    if not holomorphic.is_holomorphic():
        raise InconsistentScalarPart("integration constant depends on zb", subexpression=holomorphic.render())
    symbol = integrated + holomorphic
    field_ = hamiltonian_vector_field(symbol, manifold)
    if not preserves_polarization(field_):
        raise PolarizationViolated("d/dz of xi^zb does not vanish", subexpression=symbol.render())
    if quantize(symbol, manifold, metaplectic) != form:
        raise InconsistentScalarPart("round trip through quantize failed", subexpression=symbol.render())
    if hermitian and not is_real(symbol):
        raise NotReal("Hermitian operator produced a complex symbol", subexpression=symbol.render())
    if not metaplectic:
        logger.warning("metaplectic correction disabled: %s is a negative control", symbol.render())
    return DequantResult(symbol, field_, True, holomorphic, manifold, metaplectic)


def dequantize_operator(op: Union[SlotOperator, TensorOperator], metaplectic: bool = True,
                        manifold: Optional[Manifold] = None) -> DequantResult:
    """First-order inverse applied to a single-subsystem operator."""
    op = _as_tensor(op)
    manifold = manifold or manifold_for(op.systems[0])
    return dequantize_first_order(coordinate_form(op), manifold, metaplectic, hermitian=op.is_hermitian())


# -- multi-variable symbols -----------------------------------------------------

@dataclass(frozen=True)
class SymbolVariable:
    """
    Variable of a classical symbol: a function on one subsystem's phase space.

    Spectral variables carry the rule that replaces them in reduced sums;
    raw coordinates of a first-order subsystem carry none.
    """

    name: str
    subsystem: int
    phase: PhaseSymbol
    rule: Optional[SpectralRule] = None

    @property
    def symbol(self) -> sympy.Symbol:
        return sympy.Symbol(self.name)


@dataclass(frozen=True)
class ClassicalSymbol:
    """
    Polynomial in per-subsystem variables, stored as exponent tuples.
    """

    terms: Tuple[Tuple[Tuple[int, ...], GaussRational], ...]
    variables: Tuple[SymbolVariable, ...]
    systems: Tuple[Subsystem, ...]

    @classmethod
    def from_expr(cls, expr: sympy.Expr, variables: Sequence[SymbolVariable],
                  systems: Sequence[Subsystem]) -> "ClassicalSymbol":
        variables = tuple(variables)
        if variables:
            table = Poly(sympy.expand(expr), *[v.symbol for v in variables], domain=QQ_I).as_dict(native=True)
        else:
            table = {(): gauss(expr)}
        used = [i for i in range(len(variables)) if any(m[i] for m in table)]
        kept = tuple(variables[i] for i in used)
        terms = {}
        for monomial, c in table.items():
            if c:
                key = tuple(monomial[i] for i in used)
                terms[key] = terms.get(key, QQ_I.zero) + c
        return cls(tuple(sorted(terms.items())), kept, tuple(systems))

    def as_expr(self) -> sympy.Expr:
        total = sympy.Integer(0)
        for monomial, c in self.terms:
            product = gauss_sympy(c)
            for variable, e in zip(self.variables, monomial):
                product = product * variable.symbol ** e
            total = total + product
        return total

    def to_phase_symbol(self) -> PhaseSymbol:
        """The symbol as a function on a single subsystem's phase space."""
        if len(self.systems) != 1:
            raise Unsupported("symbol lives on more than one subsystem")
        total = PhaseSymbol.constant(0)
        for monomial, c in self.terms:
            product = PhaseSymbol.constant(c)
            for variable, e in zip(self.variables, monomial):
                product = product * variable.phase ** e
            total = total + product
        return total

    def render(self) -> str:
        if len(self.systems) == 1:
            return self.to_phase_symbol().render()
        substitution = {}
        for variable in self.variables:
            index = variable.subsystem + 1
            local = {Z: sympy.Symbol(f"z{index}"), ZB: sympy.Symbol(f"zb{index}")}
            substitution[variable.symbol] = variable.phase.as_expr().subs(local, simultaneous=True)
        return str(self.as_expr().subs(substitution, simultaneous=True))

    def render_spectral(self) -> str:
        return str(self.as_expr())

    def evaluate(self, points: Sequence[complex]) -> complex:
        """Numeric value at one phase-space point per subsystem."""
        values = [complex(v.phase.evaluate(points[v.subsystem])) for v in self.variables]
        total = 0j
        for monomial, c in self.terms:
            total += gauss_complex(c) * math.prod(x ** e for x, e in zip(values, monomial))
        return total

    def is_real(self) -> bool:
        return all(not c.y for _, c in self.terms) and all(
            v.phase == v.phase.conj() for v in self.variables
        )

    def variable_for(self, subsystem: int) -> Optional[SymbolVariable]:
        found = [v for v in self.variables if v.subsystem == subsystem]
        if len(found) > 1:
            return None
        return found[0] if found else None


@dataclass
class _Expansion:
    systems: Tuple[Subsystem, ...]
    variables: List[SymbolVariable] = field(default_factory=list)
    first_order_slot: Optional[int] = None

    def add(self, variable: SymbolVariable) -> sympy.Symbol:
        if variable not in self.variables:
            self.variables.append(variable)
        return variable.symbol


def _generator_variable(state: _Expansion, slot: int, template: Optional[GeneratorTemplate]):
    # returns the sympy expression of the generator symbol in terms of a new variable
    system = state.systems[slot]
    index = slot + 1
    if system.kind == "spin":
        corrected = dequantize_operator(SpinOperator.sz(system.spin)).symbol
        variable = SymbolVariable(f"zeta{index}", slot, corrected, SpectralRule("spin-integer", system.spin))
        return state.add(variable)
    generator = dequantize_operator(template.operator()).symbol
    if template.k:
        shift = (template.c * gauss_conj(template.c)) / (template.k * template.k)
        # |z + conj(c)/k|^2 maps to m + 1/2
        phase = generator * (QQ_I.one / template.k) + PhaseSymbol.constant(HALF + shift) \
            - PhaseSymbol.constant(template.d / template.k)
        variable = SymbolVariable(f"zeta{index}", slot, phase, SpectralRule("boson-half-integer"))
        zeta = state.add(variable)
        offset = gauss_sympy(template.d - template.k * HALF - shift * template.k)
        return gauss_sympy(template.k) * zeta + offset
    variable = SymbolVariable(f"g{index}", slot, generator - PhaseSymbol.constant(template.d), None)
    return state.add(variable) + gauss_sympy(template.d)


def _slot_coefficients(system: Subsystem, slices: Dict[Tuple, SlotOperator]):
    if system.kind == "spin":
        return None, {rest: op.coeffs for rest, op in slices.items()}
    ranked = sorted(slices.values(), key=lambda op: (op.degree(), repr(op)))
    template = infer_generator(ranked[-1])
    coefficients = {}
    for rest, op in slices.items():
        try:
            coefficients[rest] = match_generator_polynomial(op, template)
        except NoMatch:
            if template != NUMBER_TEMPLATE or not op.is_diagonal():
                raise
            coefficients[rest] = falling_factorial_decompose(op)
    return template, coefficients


def _slices(state: _Expansion, slot: int, terms: Dict[Tuple, GaussRational]) -> Dict[Tuple, SlotOperator]:
    system = state.systems[slot]
    grouped: Dict[Tuple, Dict] = {}
    for key, c in terms.items():
        grouped.setdefault(key[1:], {})[key[0]] = c
    out = {}
    for rest, table in grouped.items():
        if system.kind == "boson":
            out[rest] = BosonOperator(table)
        else:
            top = max(table)
            out[rest] = SpinOperator(system.spin, [table.get(j, 0) for j in range(top + 1)])
    return out


_FIRST_ORDER = ((0, 0), (0, 1), (1, 0), (1, 1))


def _first_order_route(state: _Expansion, slot: int, slices: Dict[Tuple, BosonOperator]):
    if any(m not in _FIRST_ORDER for op in slices.values() for m in op.terms):
        raise Unsupported("subsystem factors are neither commuting nor first order",
                          subexpression=f"subsystem {slot + 1}")
    if state.first_order_slot is not None:
        raise Unsupported("more than one subsystem enters through non-commuting first-order factors",
                          subexpression=f"subsystems {state.first_order_slot + 1} and {slot + 1}")
    state.first_order_slot = slot
    index = slot + 1
    z = state.add(SymbolVariable(f"z{index}", slot, ZS))
    zb = state.add(SymbolVariable(f"zb{index}", slot, ZBS))
    return {(0, 0): sympy.Integer(1), (0, 1): z, (1, 0): zb, (1, 1): z * zb - sympy.Rational(1, 2)}


def _expand(state: _Expansion, slot: int, terms: Dict[Tuple, GaussRational]) -> sympy.Expr:
    if slot == len(state.systems):
        return gauss_sympy(terms.get((), QQ_I.zero))
    system = state.systems[slot]
    slices = _slices(state, slot, terms)
    try:
        template, coefficients = _slot_coefficients(system, slices)
    except NoMatch:
        images = _first_order_route(state, slot, slices)
        total = sympy.Integer(0)
        for monomial, image in images.items():
            reduced = {rest: op.coeff(*monomial) for rest, op in slices.items() if op.coeff(*monomial)}
            if reduced:
                total = total + image * _expand(state, slot + 1, reduced)
        return total
    if all(len(c) <= 1 for c in coefficients.values()):
        reduced = {rest: c[0] for rest, c in coefficients.items() if c}
        return _expand(state, slot + 1, reduced)
    generator = _generator_variable(state, slot, template)
    total = sympy.Integer(0)
    for n in range(max(len(c) for c in coefficients.values())):
        reduced = {rest: c[n] for rest, c in coefficients.items() if n < len(c) and c[n]}
        if reduced:
            total = total + generator ** n * _expand(state, slot + 1, reduced)
    return total


def dequantize_extended(op: Union[SlotOperator, TensorOperator]) -> ClassicalSymbol:
    """
    Classical symbol of a polynomial in commuting de-quantizable generators.

    Each subsystem factor is matched as a polynomial in one Hermitian generator
    (``k N + c a + conj(c) ad + d`` for bosons, ``Sz`` for spins); powers map to
    powers of the generator symbol and tensor factors multiply. One bosonic
    subsystem may instead enter through first-order operators only, which are
    mapped term by term.

    Args:
        op (TensorOperator): Operator on one or more subsystems.

    Returns:
        ClassicalSymbol: Polynomial in the per-subsystem variables.

    Raises:
        Unsupported: For non-commuting generators beyond the first-order route.
        NotReal: If a Hermitian operator yields a complex symbol.
    """
    op = _as_tensor(op)
    state = _Expansion(op.systems)
    expr = _expand(state, 0, op.terms)
    symbol = ClassicalSymbol.from_expr(expr, state.variables, op.systems)
    if op.is_hermitian() and len(op.systems) == 1 and not is_real(symbol.to_phase_symbol()):
        raise NotReal("Hermitian operator produced a complex symbol", subexpression=symbol.render())
    logger.debug("extended symbol %s", symbol.render())
    return symbol


# -- spectral forms of single-subsystem symbols ----------------------------------

_W = sympy.Symbol("w")
_T = sympy.Symbol("t")


def _radial_expr(f: PhaseSymbol) -> sympy.Expr:
    if any(a != b for (a, b), _ in f.terms()):
        raise NotSpectral("symbol depends on the phase of z", subexpression=f.render())
    numerator = sum((gauss_sympy(c) * _W ** a for (a, _), c in f.terms()), sympy.Integer(0))
    return numerator / (1 + _W) ** f.denom_power


def _spectral_polynomial(f: PhaseSymbol, manifold: Manifold, zeta: sympy.Symbol) -> sympy.Expr:
    radial = _radial_expr(f)
    if manifold.kind == "plane":
        if f.denom_power:
            raise NotSpectral("plane symbol with a denominator", subexpression=f.render())
        return radial.subs(_W, zeta)
    # corrected Sz symbol is s t + 1/2 with t = (1 - w) / (1 + w)
    in_t = sympy.cancel(radial.subs(_W, (1 - _T) / (1 + _T)))
    numerator, denominator = sympy.fraction(in_t)
    if sympy.Poly(denominator, _T).degree() > 0:
        raise NotSpectral("symbol is not a polynomial in the Sz symbol", subexpression=f.render())
    return sympy.expand((numerator / denominator).subs(_T, (zeta - sympy.Rational(1, 2)) / manifold.spin))


def spectral_symbol(f: PhaseSymbol, manifold: Manifold) -> ClassicalSymbol:
    """
    Rewrite a single-subsystem symbol as a polynomial in the spectral variable.

    On the plane the variable is ``|z|^2`` (rule ``m + 1/2``); on the sphere it
    is the de-quantized ``Sz`` symbol (rule ``m``).

    Raises:
        NotSpectral: If no such polynomial exists.
    """
    if manifold.kind == "plane":
        system = Subsystem.boson()
        variable = SymbolVariable("zeta1", 0, MODULUS_SQUARED, SpectralRule("boson-half-integer"))
    else:
        system = Subsystem("spin", manifold.spin)
        corrected = dequantize_operator(SpinOperator.sz(manifold.spin)).symbol
        variable = SymbolVariable("zeta1", 0, corrected, SpectralRule("spin-integer", manifold.spin))
    expr = _spectral_polynomial(f, manifold, variable.symbol)
    return ClassicalSymbol.from_expr(expr, [variable], [system])


def _spin_power_normal_symbol(spin, n: int) -> PhaseSymbol:
    two_s = int(2 * spin)
    numerator = {}
    for a in range(two_s + 1):
        projection = spin - a
        numerator[(a, a)] = math.comb(two_s, a) * projection ** n
    return PhaseSymbol.from_terms(numerator, two_s)


def normal_symbol(op: Union[SlotOperator, TensorOperator], manifold: Optional[Manifold] = None) -> PhaseSymbol:
    """
    Normalized coherent-state expectation value ``<z|op|z> / <z|z>``.

    ``ad^p a^q`` gives ``zb^p z^q``; ``Sz**n`` gives the binomial average of
    ``j**n`` over the spin coherent state.
    """
    op = _as_tensor(op).factor(0)
    if isinstance(op, BosonOperator):
        return PhaseSymbol.from_terms({(q, p): c for (p, q), c in op.items()})
    total = PhaseSymbol.constant(0)
    for n, c in op.items():
        total = total + _spin_power_normal_symbol(op.spin, n) * c
    return total


def _antinormal(p: int, q: int) -> BosonOperator:
    # zb^p z^q -> a^q ad^p
    return BosonOperator({(0, q): 1}) * BosonOperator({(p, 0): 1})


def symmetric_slicing_symbol(op: Union[SlotOperator, TensorOperator], manifold: Optional[Manifold] = None,
                             max_degree: int = 16) -> PhaseSymbol:
    """
    Symbol ``H`` whose anti-normal quantization ``int |z> H <z| dmu`` equals ``op``.

    The anti-normal image of ``zb^p z^q`` is ``ad^p a^q`` plus lower terms, so
    the moment system is triangular and is solved from the top degree down.

    Raises:
        NoSolution: If ``op`` is not a bosonic operator on the plane or its
            degree exceeds ``max_degree``.
    """
    if manifold is not None and manifold.kind != "plane":
        raise NoSolution("anti-normal symbols are only solved on the plane")
    tensor = _as_tensor(op)
    if tensor.arity != 1 or tensor.systems[0].kind != "boson":
        raise NoSolution("anti-normal symbols are only solved for one bosonic mode")
    residual = tensor.factor(0)
    if residual.degree() > max_degree:
        raise NoSolution(f"degree {residual.degree()} above the ansatz cap {max_degree}")
    terms = {}
    while residual.terms:
        (p, q), c = max(residual.items(), key=lambda item: (sum(item[0]), item[0]))
        terms[(q, p)] = c
        residual = residual - _antinormal(p, q) * c
    return PhaseSymbol.from_terms(terms)


def antinormal_quantize(f: PhaseSymbol) -> BosonOperator:
    """Anti-normal ordered operator of a polynomial plane symbol."""
    if f.denom_power:
        raise NoSolution("anti-normal image needs a polynomial symbol", subexpression=f.render())
    total = BosonOperator()
    for (q, p), c in f.terms():
        total = total + _antinormal(p, q) * c
    return total


def _slot_spectral(system: Subsystem, monomial, zeta: sympy.Symbol, kind: str) -> sympy.Expr:
    if system.kind == "boson":
        p, q = monomial
        if p != q:
            raise NotSpectral("off-diagonal ladder word has no spectral form", subexpression=f"ad^{p} a^{q}")
        if kind == "naive":
            return zeta ** p
        symbol = symmetric_slicing_symbol(BosonOperator({(p, p): 1}))
        return _spectral_polynomial(symbol, Manifold.plane(), zeta)
    if kind != "naive":
        raise NotSpectral("anti-normal symbols are only solved for bosonic modes")
    sphere = Manifold.sphere(system.spin)
    return _spectral_polynomial(_spin_power_normal_symbol(system.spin, monomial), sphere, zeta)


def _ordered_symbol(op: Union[SlotOperator, TensorOperator], kind: str) -> ClassicalSymbol:
    op = _as_tensor(op)
    variables = []
    for slot, system in enumerate(op.systems):
        index = slot + 1
        if system.kind == "boson":
            variables.append(SymbolVariable(f"zeta{index}", slot, MODULUS_SQUARED, SpectralRule("boson-half-integer")))
        else:
            corrected = dequantize_operator(SpinOperator.sz(system.spin)).symbol
            variables.append(SymbolVariable(f"zeta{index}", slot, corrected, SpectralRule("spin-integer", system.spin)))
    total = sympy.Integer(0)
    for key, c in op.items():
        product = gauss_sympy(c)
        for system, monomial, variable in zip(op.systems, key, variables):
            product = product * _slot_spectral(system, monomial, variable.symbol, kind)
        total = total + product
    return ClassicalSymbol.from_expr(total, variables, op.systems)


def naive_symbol_extended(op: Union[SlotOperator, TensorOperator]) -> ClassicalSymbol:
    """Normal symbol of a diagonal operator written over the spectral variables."""
    return _ordered_symbol(op, "naive")


def symmetric_symbol_extended(op: Union[SlotOperator, TensorOperator]) -> ClassicalSymbol:
    """Anti-normal symbol of a diagonal bosonic operator over the spectral variables."""
    return _ordered_symbol(op, "symmetric")


# -- consistency checks -----------------------------------------------------------

def check_dirac_bracket(f: PhaseSymbol, g: PhaseSymbol, manifold: Manifold) -> bool:
    """
    Check ``[Q(f), Q(g)] == i Q({f, g})`` on the differential forms.
    """
    left = operator_commutator(quantize(f, manifold), quantize(g, manifold))
    right = quantize(poisson_bracket(f, g, manifold), manifold) * gauss("I")
    return left == right


@dataclass(frozen=True)
class GvhReport:
    quadratic_homomorphism_ok: bool
    complex_quadratic_ok: bool
    cubic_difference: BosonOperator
    residual_is_scalar: bool
    residual_value: GaussRational
    matrix_max_deviation: Optional[float] = None


_X, _P = sympy.symbols("x p")


def _position() -> BosonOperator:
    return BosonOperator.annihilation() + BosonOperator.creation()


def _momentum() -> BosonOperator:
    return (BosonOperator.creation() - BosonOperator.annihilation()) * gauss("I")


def _weyl_quadratic(poly: sympy.Expr) -> BosonOperator:
    # symmetric quantization on {1, x, p, x^2, p^2, xp} with [X, P] = 2i
    x, p = _position(), _momentum()
    images = {(0, 0): BosonOperator.identity(), (1, 0): x, (0, 1): p, (2, 0): x * x, (0, 2): p * p,
              (1, 1): (x * p + p * x) * sympy.Rational(1, 2)}
    total = BosonOperator()
    for monomial, c in Poly(poly, _X, _P, domain=QQ_I).as_dict(native=True).items():
        if monomial not in images:
            raise NoSolution("not a quadratic observable")
        total = total + images[monomial] * c
    return total


def _real_bracket(f: sympy.Expr, g: sympy.Expr) -> sympy.Expr:
    return sympy.expand(sympy.diff(f, _X) * sympy.diff(g, _P) - sympy.diff(f, _P) * sympy.diff(g, _X))


def _complex_quadratic_images() -> Dict[PhaseSymbol, BosonOperator]:
    half = BosonOperator.identity(sympy.Rational(1, 2))
    return {
        ONE: BosonOperator.identity(),
        ZS: BosonOperator.annihilation(),
        ZBS: BosonOperator.creation(),
        ZS ** 2: BosonOperator({(0, 2): 1}),
        ZBS ** 2: BosonOperator({(2, 0): 1}),
        MODULUS_SQUARED: BosonOperator.number() + half,
    }


def _complex_image(f: PhaseSymbol, images: Dict[PhaseSymbol, BosonOperator]) -> BosonOperator:
    total = BosonOperator()
    for monomial, c in f.terms():
        total = total + images[PhaseSymbol.from_terms({monomial: 1})] * c
    return total


def gvh_obstruction(truncation: Optional[int] = None, guard: int = 6) -> GvhReport:
    """
    Exhibit the cubic obstruction to a bracket-preserving quantization.

    Position and momentum are built as ``X = a + ad`` and ``P = i (ad - a)``,
    so ``[X, P] = 2i``; the residual is reported for ``[x, p] = i``.

    Args:
        truncation (Optional[int]): When given, repeat the cubic computation
            with truncated matrices and compare on the leading block.
        guard (int): Rows and columns dropped from the matrix comparison.

    Returns:
        GvhReport: The quadratic checks and the scalar cubic residual.
    """
    basis = [sympy.Integer(1), _X, _P, _X ** 2, _P ** 2, _X * _P]
    two_i = gauss("2*I")
    quadratic_ok = True
    for f in basis:
        for g in basis:
            left = _weyl_quadratic(f) * _weyl_quadratic(g) - _weyl_quadratic(g) * _weyl_quadratic(f)
            if left != _weyl_quadratic(_real_bracket(f, g)) * two_i:
                quadratic_ok = False

    plane = Manifold.plane()
    images = _complex_quadratic_images()
    complex_ok = True
    for f in images:
        for g in images:
            left = _complex_image(f, images) * _complex_image(g, images) - \
                _complex_image(g, images) * _complex_image(f, images)
            if left != _complex_image(poisson_bracket(f, g, plane), images) * gauss("I"):
                complex_ok = False

    x, p = _position(), _momentum()
    cube = (x ** 3 * p ** 3 - p ** 3 * x ** 3) * sympy.Rational(1, 3)
    left_mixed = x * x * p + p * x * x
    right_mixed = x * p * p + p * p * x
    mixed = (left_mixed * right_mixed - right_mixed * left_mixed) * sympy.Rational(1, 4)
    # X = sqrt(2) x and P = sqrt(2) p: sixth order in both, hence 1/8
    residual = (cube - mixed) * sympy.Rational(1, 8)
    is_scalar = residual.is_scalar()
    value = residual.coeff(0, 0) if is_scalar else QQ_I.zero
    deviation = None
    if truncation is not None:
        xm, pm = to_matrix(x, truncation), to_matrix(p, truncation)
        x3 = np.linalg.matrix_power(xm, 3)
        p3 = np.linalg.matrix_power(pm, 3)
        a_m = xm @ xm @ pm + pm @ xm @ xm
        b_m = xm @ pm @ pm + pm @ pm @ xm
        full = ((x3 @ p3 - p3 @ x3) / 3 - (a_m @ b_m - b_m @ a_m) / 4) / 8
        keep = truncation - guard
        block = full[:keep, :keep] - gauss_complex(value) * np.eye(keep)
        deviation = float(np.max(np.abs(block)))
        logger.debug("truncated residual deviates by %.3e on %d retained states", deviation, keep)
    return GvhReport(quadratic_ok, complex_ok, residual, is_scalar, value, deviation)
