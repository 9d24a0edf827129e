import numpy as np
import pytest

from app.errors import NotDiagonal, TruncationTooSmall, Unsupported
from app.opalg import (
    NUMBER_TEMPLATE, BosonOperator, DifferentialForm, SpinOperator, Subsystem, TensorOperator,
    coherent_series, coordinate_form, falling_factorial_decompose, infer_generator, kron,
    match_generator_polynomial, normal_order, operator_commutator, spin_projections, stirling_rebuild,
    to_matrix,
)
from app.symcore import ONE, ZERO, ZS, gauss

a = BosonOperator.annihilation()
ad = BosonOperator.creation()
N = BosonOperator.number()


def test_canonical_commutator():
    assert a * ad == N + 1
    assert a * ad - ad * a == BosonOperator.identity()


def test_number_square_normal_orders():
    # 2 N^2 + N = 2 ad^2 a^2 + 3 ad a
    assert N ** 2 * 2 + N == BosonOperator({(2, 2): 2, (1, 1): 3})
    assert normal_order(ad, a, ad, a) == N ** 2


def test_adjoint_and_hermiticity():
    x = a + ad
    p = (ad - a) * gauss("I")
    assert x.is_hermitian()
    assert p.is_hermitian()
    assert not a.is_hermitian()
    assert (a * 2).adjoint() == ad * 2


def test_falling_factorial_round_trip():
    op = N ** 2 + N * 3 + 1
    coeffs = falling_factorial_decompose(op)
    assert coeffs == (gauss(1), gauss(3), gauss(1))
    assert stirling_rebuild(coeffs) == op
    with pytest.raises(NotDiagonal):
        falling_factorial_decompose(a)


def test_generator_matching():
    assert infer_generator(N ** 2) == NUMBER_TEMPLATE
    assert match_generator_polynomial(N ** 2 + N * 3 + 1, NUMBER_TEMPLATE) == (gauss(1), gauss(3), gauss(1))
    x = a + ad
    template = infer_generator(x * x)
    assert not template.k
    coeffs = match_generator_polynomial(x * x, template)
    rebuilt = BosonOperator()
    for n, c in enumerate(coeffs):
        rebuilt = rebuilt + template.operator() ** n * c
    assert rebuilt == x * x


def test_truncated_matrices():
    np.testing.assert_allclose(np.diag(to_matrix(N, 5)).real, [0, 1, 2, 3, 4])
    ladder = to_matrix(a, 4)
    assert ladder[0, 1] == pytest.approx(1.0)
    assert ladder[2, 3] == pytest.approx(np.sqrt(3))
    with pytest.raises(TruncationTooSmall):
        to_matrix(N ** 2, 3)


def test_spin_matrices():
    np.testing.assert_allclose(spin_projections(SpinOperator.sz(1).spin), [1, 0, -1])
    sz = to_matrix(SpinOperator.sz("3/2"), 1)
    np.testing.assert_allclose(np.diag(sz).real, [1.5, 0.5, -0.5, -1.5])
    with pytest.raises(Unsupported):
        SpinOperator.sz(1) + SpinOperator.sz("1/2")


def test_kron_matches_numpy():
    left = TensorOperator.single(SpinOperator.sz(1))
    right = TensorOperator.single(N)
    product = kron(left, right)
    assert product.arity == 2
    expected = np.kron(to_matrix(left, 6), to_matrix(right, 6))
    np.testing.assert_allclose(to_matrix(product, 6), expected)


def test_tensor_algebra():
    systems = (Subsystem.spin_system(1), Subsystem.spin_system(1))
    sz = SpinOperator.sz(1)
    op = TensorOperator.from_factors(systems, (sz, sz)) + TensorOperator.from_factors(systems, (sz * sz, None)) * gauss("1/2")
    assert op.is_hermitian()
    assert op.slot_degree(0) == 2
    assert op.slot_degree(1) == 1
    assert len(list(op.summands)) == 2
    with pytest.raises(Unsupported):
        TensorOperator.from_factors(systems, (N, None))


def test_coordinate_forms():
    assert coordinate_form(N) == DifferentialForm([ZERO, ZS])
    assert coordinate_form(a) == DifferentialForm.multiplication(ZS)
    # [a, ad] = 1
    assert operator_commutator(coordinate_form(a), coordinate_form(ad)) == DifferentialForm([ONE])


def test_form_acts_like_operator_on_coherent_series():
    z = 0.3 - 0.2j
    boson = Subsystem.boson()
    for op in (N, a, ad * ad * a):
        direct = to_matrix(op, 20) @ coherent_series(z, boson, 20)
        via_form = coordinate_form(op).apply_to_series(z, boson, 20)
        # the top rows see the truncation edge
        np.testing.assert_allclose(via_form[:15], direct[:15], atol=1e-12)


def random_word(rng, longest=4):
    letters = (a, ad)
    return [letters[i] for i in rng.integers(0, 2, size=int(rng.integers(1, longest + 1)))]


def test_normal_ordering_preserves_matrices(rng):
    for _ in range(20):
        word = random_word(rng)
        product = np.eye(20, dtype=complex)
        for letter in word:
            product = product @ to_matrix(letter, 20)
        # the truncation edge is at most four levels deep for a word of length four
        np.testing.assert_allclose(to_matrix(normal_order(*word), 20)[:16, :16], product[:16, :16], atol=1e-9)


def test_forms_compose_in_reversed_order(rng):
    for _ in range(10):
        left = normal_order(*random_word(rng, 3))
        right = normal_order(*random_word(rng, 3))
        assert coordinate_form(left * right) == coordinate_form(right).compose(coordinate_form(left))
    s1 = SpinOperator(1, [1, gauss("2 + I")])
    s2 = SpinOperator(1, [0, 3, -1])
    assert coordinate_form(s1 * s2) == coordinate_form(s2).compose(coordinate_form(s1))


def test_squeezing_term_has_a_second_order_form():
    form = coordinate_form(a * a + ad * ad)
    assert form == DifferentialForm([ZS * ZS, ZERO, ONE])
    assert form.order == 2


def test_adjoint_conjugates_complex_coefficients():
    x = a * "1 + 2*I" + N * 3
    assert x.adjoint() == ad * "1 - 2*I" + N * 3
    assert (x + x.adjoint()).is_hermitian()
    assert not x.is_hermitian()
    spin = SpinOperator("1/2", ["I", 1])
    assert spin.adjoint() == SpinOperator("1/2", ["-I", 1])
    sz = TensorOperator.single(SpinOperator.sz("1/2"))
    tensor = kron(TensorOperator.single(a * "I"), sz)
    assert tensor.adjoint() == kron(TensorOperator.single(ad * "-I"), sz)
