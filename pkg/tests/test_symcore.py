import numpy as np
import pytest
import sympy

from app.errors import ExpressionSyntaxError, OutsideClosedFamily, UnknownAtom
from app.symcore import (
    MODULUS_SQUARED, ONE, ONE_PLUS, ZB, ZBS, ZS, Z, PhaseSymbol, algebra, antiderivative_dzbar,
    derivative, gauss, gauss_conj, is_real, parse_symbol,
)


def test_render_parse_round_trip():
    symbols = [
        MODULUS_SQUARED - PhaseSymbol.constant("1/2"),
        PhaseSymbol.from_expr(sympy.Rational(3, 2) * (1 - Z * ZB) / (1 + Z * ZB) + sympy.Rational(1, 2)),
        ZS * PhaseSymbol.constant("2 + I") + ZBS * PhaseSymbol.constant("2 - I"),
    ]
    for f in symbols:
        assert parse_symbol(f.render()) == f


def test_modulus_renders_canonically():
    assert (MODULUS_SQUARED - PhaseSymbol.constant("1/2")).render() == "z*zb - 1/2"


def test_common_factor_is_cancelled():
    # (1 + z zb) / (1 + z zb) collapses to one
    assert PhaseSymbol(ONE_PLUS, 1) == ONE
    assert PhaseSymbol(ONE_PLUS, 1).denom_power == 0


def test_foreign_denominator_is_rejected():
    with pytest.raises(OutsideClosedFamily):
        PhaseSymbol.from_expr(1 / (1 + Z))


def test_parse_rejects_floats_and_unknown_names():
    with pytest.raises(ExpressionSyntaxError):
        parse_symbol("0.5*z")
    with pytest.raises(UnknownAtom):
        parse_symbol("x*z")


def test_exact_scalars_only():
    with pytest.raises(TypeError):
        gauss(0.5)
    assert gauss("1/2") * 2 == gauss(1)


def test_derivatives():
    assert derivative(MODULUS_SQUARED, "z") == ZBS
    assert derivative(MODULUS_SQUARED, "zb") == ZS
    inverse = PhaseSymbol(ONE.numerator, 1)
    assert derivative(inverse, "z") == PhaseSymbol.from_expr(-ZB / (1 + Z * ZB) ** 2)


@pytest.mark.parametrize("expr", [
    Z * ZB ** 2,
    Z / (1 + Z * ZB) ** 2,
    1 / (1 + Z * ZB) ** 2,
    Z ** 2 / (1 + Z * ZB) ** 3,
])
def test_antiderivative_inverts_derivative(expr):
    g = PhaseSymbol.from_expr(expr)
    assert derivative(antiderivative_dzbar(g), "zb") == g


def test_antiderivative_refuses_logarithms():
    # 1 / (1 + z zb) integrates to a logarithm
    with pytest.raises(OutsideClosedFamily):
        antiderivative_dzbar(PhaseSymbol(ONE.numerator, 1))


def test_division_outside_family():
    with pytest.raises(OutsideClosedFamily):
        ZS.divide(ZS)


def test_conjugation_and_reality():
    assert ZS.conj() == ZBS
    assert is_real(MODULUS_SQUARED)
    assert not is_real(ZS)
    assert algebra(ZS, ZBS, "add") == ZS + ZBS
    assert algebra(ZS, ONE, "conj") == ZBS


def test_numeric_evaluation():
    f = MODULUS_SQUARED - PhaseSymbol.constant("1/2")
    assert complex(f.evaluate(1 + 1j)) == pytest.approx(1.5)
    points = np.array([0.0, 1.0, 2.0j])
    np.testing.assert_allclose(f.evaluate(points), [-0.5, 0.5, 3.5])


def test_symbols_are_immutable():
    with pytest.raises(AttributeError):
        ZS.denom_power = 2


def test_evaluation_is_multiplicative(random_symbol, rng):
    f = random_symbol(2, 1)
    g = random_symbol(2, 2)
    points = rng.normal(size=100) + 1j * rng.normal(size=100)
    np.testing.assert_allclose((f * g).evaluate(points), f.evaluate(points) * g.evaluate(points), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose((f + g).evaluate(points), f.evaluate(points) + g.evaluate(points), rtol=1e-9, atol=1e-9)


def test_canonical_form_is_idempotent(random_symbol):
    for power in range(3):
        f = random_symbol(2, power)
        # multiplying top and bottom by (1 + z zb) must give back the same representative
        padded = PhaseSymbol(f.numerator * ONE_PLUS, f.denom_power + 1)
        assert padded == f
        assert padded.denom_power == f.denom_power
        assert PhaseSymbol(padded.numerator, padded.denom_power) == padded


def test_conjugation_is_an_involutive_anti_automorphism(random_symbol):
    f = random_symbol(2, 1)
    g = random_symbol(1, 2)
    assert f.conj().conj() == f
    assert (f * g).conj() == f.conj() * g.conj()
    assert (f + g).conj() == f.conj() + g.conj()
    assert (f * PhaseSymbol.constant("2 + I")).conj() == f.conj() * PhaseSymbol.constant("2 - I")
    assert is_real(f + f.conj())


def test_gaussian_conjugate():
    assert gauss_conj(gauss("3/2 - 2*I")) == gauss("3/2 + 2*I")
    assert gauss_conj(gauss(5)) == gauss(5)
