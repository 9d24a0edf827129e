import numpy as np
import pytest
import sympy

from app.dequant import (
    antinormal_quantize, check_dirac_bracket, dequantize_extended, dequantize_first_order,
    dequantize_operator, gvh_obstruction, naive_symbol_extended, normal_symbol, quantize,
    spectral_symbol, symmetric_slicing_symbol, symmetric_symbol_extended,
)
from app.errors import NotFirstOrder, NotSpectral, NoSolution, PolarizationViolated, Unsupported
from app.geom import Manifold
from app.opalg import BosonOperator, DifferentialForm, SpinOperator, Subsystem, TensorOperator, coordinate_form
from app.symcore import MODULUS_SQUARED, ONE, ZB, ZBS, ZS, Z, PhaseSymbol, gauss, gauss_conj, is_real

a = BosonOperator.annihilation()
ad = BosonOperator.creation()
N = BosonOperator.number()
HALF = PhaseSymbol.constant("1/2")


def sz_symbol(s):
    s = sympy.Rational(str(s))
    return PhaseSymbol.from_expr(s * (1 - Z * ZB) / (1 + Z * ZB) + sympy.Rational(1, 2))


def test_ladder_operators():
    assert dequantize_operator(a).symbol == ZS
    assert dequantize_operator(ad).symbol == ZBS
    result = dequantize_operator(N)
    assert result.symbol == MODULUS_SQUARED - HALF
    assert result.symbol.render() == "z*zb - 1/2"
    assert result.polarization_ok


def test_general_first_order_boson():
    op = N * 2 + a * 3 + ad * 5 + 7
    expected = (MODULUS_SQUARED - HALF) * 2 + ZS * 3 + ZBS * 5 + 7
    assert dequantize_operator(op).symbol == expected


@pytest.mark.parametrize("s", ["1/2", "1", "3/2", "5"])
def test_spin_sz(s):
    assert dequantize_operator(SpinOperator.sz(s)).symbol == sz_symbol(s)


def test_quantize_inverts_dequantize(plane):
    assert quantize(MODULUS_SQUARED - HALF, plane) == coordinate_form(N)
    assert dequantize_first_order(quantize(ZS + ZBS, plane), plane).symbol == ZS + ZBS


def test_prequantum_control_drops_the_half(plane):
    # without the half-form term N maps to |z|^2
    result = dequantize_operator(N, metaplectic=False)
    assert result.symbol == MODULUS_SQUARED
    assert not result.metaplectic


def test_nonstandard_connection_shifts_sz():
    s = sympy.Rational(1)
    sphere = Manifold.sphere_nonstandard(1)
    symbol = dequantize_operator(SpinOperator.sz(1), manifold=sphere).symbol
    assert symbol == PhaseSymbol.from_expr((s + sympy.Rational(1, 2)) * (1 - Z * ZB) / (1 + Z * ZB))


def test_higher_order_operators_are_refused():
    with pytest.raises(NotFirstOrder):
        dequantize_operator(N ** 2)


def test_nonlinear_symbol_breaks_polarization(plane):
    with pytest.raises(PolarizationViolated):
        quantize(MODULUS_SQUARED ** 2, plane)


def test_dirac_bracket_on_plane(plane):
    generators = [ONE, ZS, ZBS, MODULUS_SQUARED]
    for f in generators:
        for g in generators:
            assert check_dirac_bracket(f, g, plane)


def test_dirac_bracket_on_sphere(sphere):
    inverse = PhaseSymbol(ONE.numerator, 1)
    generators = [ONE, sz_symbol(sphere.spin), ZS * inverse, ZBS * inverse]
    for f in generators:
        for g in generators:
            assert check_dirac_bracket(f, g, sphere)


def test_polynomial_in_number_operator():
    op = N ** 2 + N * 3 + 1
    symbol = dequantize_extended(op)
    shifted = MODULUS_SQUARED - HALF
    assert symbol.to_phase_symbol() == shifted * shifted + shifted * 3 + 1
    (variable,) = symbol.variables
    assert variable.rule.kind == "boson-half-integer"
    shift = sympy.Symbol("zeta1") - sympy.Rational(1, 2)
    assert sympy.expand(symbol.as_expr() - (shift ** 2 + 3 * shift + 1)) == 0


def test_spin_interaction():
    systems = (Subsystem.spin_system(1), Subsystem.spin_system(1))
    sz = SpinOperator.sz(1)
    op = TensorOperator.from_factors(systems, (sz, sz)) + TensorOperator.from_factors(systems, (sz * sz, None)) * gauss("1/2")
    symbol = dequantize_extended(op)
    z1, z2 = sympy.symbols("zeta1 zeta2")
    assert sympy.expand(symbol.as_expr() - (z1 * z2 + z1 ** 2 / 2)) == 0
    assert all(v.rule.kind == "spin-integer" for v in symbol.variables)
    assert symbol.is_real()


def test_first_order_subsystem_route():
    systems = (Subsystem.boson(), Subsystem.spin_system("1/2"))
    op = TensorOperator.from_factors(systems, (N, SpinOperator.sz("1/2"))) + \
        TensorOperator.from_factors(systems, (a + ad, None))
    symbol = dequantize_extended(op)
    z1, zb1, zeta2 = sympy.symbols("z1 zb1 zeta2")
    assert sympy.expand(symbol.as_expr() - ((z1 * zb1 - sympy.Rational(1, 2)) * zeta2 + z1 + zb1)) == 0
    assert symbol.variable_for(0) is None
    assert symbol.evaluate([1.0, 0.0]) == pytest.approx(2.5)


def test_two_first_order_subsystems_are_unsupported():
    systems = (Subsystem.boson(), Subsystem.boson())
    op = TensorOperator.from_factors(systems, (a, ad))
    with pytest.raises(Unsupported):
        dequantize_extended(op)


def test_spectral_forms(plane):
    assert spectral_symbol(MODULUS_SQUARED - HALF, plane).render_spectral() == "zeta1 - 1/2"
    sphere = Manifold.sphere(1)
    assert spectral_symbol(sz_symbol(1), sphere).render_spectral() == "zeta1"
    with pytest.raises(NotSpectral):
        spectral_symbol(ZS, plane)


def test_normal_symbols():
    assert normal_symbol(N) == MODULUS_SQUARED
    # <z|Sz|z> / <z|z> for s = 1/2 is (1 - |z|^2) / (2 (1 + |z|^2))
    expected = PhaseSymbol.from_expr((1 - Z * ZB) / (2 * (1 + Z * ZB)))
    assert normal_symbol(SpinOperator.sz("1/2")) == expected


def test_ordered_symbols_of_oscillator():
    op = N + BosonOperator.identity("1/2")
    zeta = sympy.Symbol("zeta1")
    assert sympy.expand(naive_symbol_extended(op).as_expr() - (zeta + sympy.Rational(1, 2))) == 0
    assert sympy.expand(symmetric_symbol_extended(op).as_expr() - (zeta - sympy.Rational(1, 2))) == 0
    with pytest.raises(NotSpectral):
        naive_symbol_extended(a + ad)


def test_anti_normal_symbol():
    assert symmetric_slicing_symbol(N) == MODULUS_SQUARED - ONE
    square = symmetric_slicing_symbol(N ** 2)
    assert square == MODULUS_SQUARED ** 2 - MODULUS_SQUARED * 3 + 1
    for op in (N ** 2, a * ad * ad, N + a * 2):
        assert antinormal_quantize(symmetric_slicing_symbol(op)) == op
    with pytest.raises(NoSolution):
        symmetric_slicing_symbol(SpinOperator.sz(1))
    with pytest.raises(NoSolution):
        symmetric_slicing_symbol(N ** 3, max_degree=4)


def test_gvh_obstruction():
    report = gvh_obstruction(truncation=30)
    assert report.quadratic_homomorphism_ok
    assert report.complex_quadratic_ok
    assert report.residual_is_scalar
    assert report.residual_value == gauss("-I")
    assert report.matrix_max_deviation < 1e-6


def test_form_application_matches_quantized_symbol(plane, rng):
    z = complex(*rng.normal(size=2)) * 0.5
    form = quantize(MODULUS_SQUARED - HALF, plane)
    boson = Subsystem.boson()
    np.testing.assert_allclose(form.apply_to_series(z, boson, 12), coordinate_form(N).apply_to_series(z, boson, 12))
    assert isinstance(form, DifferentialForm)


def random_generator(rng, k):
    re = int(rng.integers(1, 4)) if not k else int(rng.integers(-3, 4))
    im, d = (int(v) for v in rng.integers(-3, 4, size=2))
    c = gauss(f"{re} + {im}*I")
    return N * k + a * c + ad * gauss_conj(c) + d


@pytest.mark.parametrize("k", [0, 1, 2, -1])
def test_generator_powers_map_to_symbol_powers(rng, k):
    generator = random_generator(rng, k)
    symbol = dequantize_operator(generator).symbol
    assert is_real(symbol)
    for n in (1, 2, 3):
        assert dequantize_extended(generator ** n).to_phase_symbol() == symbol ** n


def test_sz_powers_map_to_symbol_powers(sphere):
    generator = SpinOperator(sphere.spin, [-1, 2])
    symbol = sz_symbol(sphere.spin) * 2 - 1
    for n in (1, 2, 3):
        assert dequantize_extended(generator ** n).to_phase_symbol() == symbol ** n


def test_plane_family_round_trips(plane, rng):
    for _ in range(5):
        k, d, re, im = (int(v) for v in rng.integers(-3, 4, size=4))
        l = PhaseSymbol.constant(f"{re} + {im}*I")
        f = MODULUS_SQUARED * k + ZS * l + ZBS * l.conj() + d
        for metaplectic in (True, False):
            assert dequantize_first_order(quantize(f, plane, metaplectic), plane, metaplectic).symbol == f


def test_sphere_family_round_trips(sphere, rng):
    u_inv = PhaseSymbol(ONE.numerator, 1)
    for _ in range(3):
        alpha, beta, re, im = (int(v) for v in rng.integers(-3, 4, size=4))
        gamma = PhaseSymbol.constant(f"{re} + {im}*I")
        f = sz_symbol(sphere.spin) * alpha + beta + ZS * u_inv * gamma + ZBS * u_inv * gamma.conj()
        assert dequantize_first_order(quantize(f, sphere), sphere).symbol == f


def test_prequantum_map_gives_normal_symbols(sphere):
    for op in (a, ad, N, N * 2 + a + ad):
        assert dequantize_operator(op, metaplectic=False).symbol == normal_symbol(op)
    sz = SpinOperator.sz(sphere.spin)
    assert dequantize_operator(sz, metaplectic=False, manifold=sphere).symbol == normal_symbol(sz)


def test_identity_factors_do_not_change_the_symbol():
    op = N ** 2 + N * 3 + 1
    alone = dequantize_extended(op)
    for partner in (Subsystem.spin_system("1/2"), Subsystem.boson()):
        padded = dequantize_extended(TensorOperator.from_factors((Subsystem.boson(), partner), (op, None)))
        assert padded.variables == alone.variables
        assert sympy.expand(padded.as_expr() - alone.as_expr()) == 0


def test_hermitian_complex_coefficients_give_real_symbols():
    op = N * 2 + a * "1 + 2*I" + ad * "1 - 2*I"
    result = dequantize_operator(op)
    assert is_real(result.symbol)
    assert result.symbol == (MODULUS_SQUARED - HALF) * 2 + ZS * gauss("1 + 2*I") + ZBS * gauss("1 - 2*I")
