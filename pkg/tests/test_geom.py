import numpy as np
import pytest
import sympy

from app.dequant import dequantize_operator
from app.geom import (
    Manifold, SpectralRule, check_symplectic, hamiltonian_vector_field, interior_product_check,
    kaehler_check, poisson_bracket, preserves_polarization, spin_label,
)
from app.opalg import SpinOperator
from app.symcore import MODULUS_SQUARED, ZBS, ZS, PhaseSymbol


def test_plane_geometry(plane):
    assert check_symplectic(plane)
    assert kaehler_check(plane)
    assert plane.label() == "plane"


def test_sphere_geometry(sphere):
    assert check_symplectic(sphere)
    assert kaehler_check(sphere)


def test_nonstandard_sphere_fails_kaehler_check():
    sphere = Manifold.sphere_nonstandard(1)
    # the (s + 1/2) connection is still closed, but not compatible with the spin-s potential
    assert check_symplectic(sphere)
    assert not kaehler_check(sphere)
    assert sphere.label() == "sphere'(s=1)"


def test_interior_product_round_trips(plane, sphere):
    for f in (MODULUS_SQUARED, ZS, ZBS, ZS * ZS + ZBS):
        assert interior_product_check(f, plane)
    sz = dequantize_operator(SpinOperator.sz(sphere.spin), manifold=sphere).symbol
    assert interior_product_check(sz, sphere)


def test_poisson_sign(plane):
    # {z, zb} = 1 / omega_zzbar = -i on the plane
    assert poisson_bracket(ZS, ZBS, plane) == PhaseSymbol.constant("-I")
    assert poisson_bracket(ZBS, ZS, plane) == PhaseSymbol.constant("I")


def test_vector_field_of_modulus(plane):
    field = hamiltonian_vector_field(MODULUS_SQUARED, plane)
    assert field.xi_z == ZS * PhaseSymbol.constant("I")
    assert field.xi_zbar == ZBS * PhaseSymbol.constant("-I")
    assert preserves_polarization(field)


def test_nonlinear_flow_breaks_polarization(plane):
    field = hamiltonian_vector_field(MODULUS_SQUARED * MODULUS_SQUARED, plane)
    assert not preserves_polarization(field)


def test_spectral_rules():
    boson = SpectralRule("boson-half-integer")
    np.testing.assert_allclose(boson.values(3), [0.5, 1.5, 2.5, 3.5])
    assert not boson.bounded
    spin = SpectralRule("spin-integer", sympy.Integer(1))
    np.testing.assert_allclose(spin.values(), [-1.0, 0.0, 1.0])
    assert spin.size() == 3
    with pytest.raises(ValueError):
        boson.size()


def test_spin_labels():
    assert spin_label("3/2") == sympy.Rational(3, 2)
    for bad in (0, "1/3", -1):
        with pytest.raises(ValueError):
            spin_label(bad)


def test_bracket_is_an_antisymmetric_derivation(random_symbol, plane, sphere):
    for manifold in (plane, sphere):
        f = random_symbol(2, 1)
        g = random_symbol(1, 0)
        h = random_symbol(2, 2)
        c = PhaseSymbol.constant("3 - 2*I")
        assert poisson_bracket(f, g, manifold) == -poisson_bracket(g, f, manifold)
        assert poisson_bracket(f, f, manifold).is_zero
        assert poisson_bracket(f * c + g, h, manifold) == \
            poisson_bracket(f, h, manifold) * c + poisson_bracket(g, h, manifold)
        assert poisson_bracket(f, g * h, manifold) == \
            poisson_bracket(f, g, manifold) * h + g * poisson_bracket(f, h, manifold)


def test_bracket_of_real_symbols_is_real(random_symbol, plane):
    f = random_symbol(2, 0)
    g = random_symbol(2, 1)
    bracket = poisson_bracket(f + f.conj(), g + g.conj(), plane)
    assert bracket == bracket.conj()
