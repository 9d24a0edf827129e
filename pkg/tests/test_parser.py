import pytest

from app.errors import ExpressionSyntaxError, MissingSpinLabel, MissingSystem, UnknownAtom, Unsupported
from app.opalg import BosonOperator, SpinOperator, Subsystem, TensorOperator
from app.parser import parse_expression, render_operator
from app.symcore import gauss

N = BosonOperator.number()
SPIN_PAIR = (Subsystem.spin_system(1), Subsystem.spin_system(1))


def test_oscillator():
    op = parse_expression("N + 1/2")
    assert op == TensorOperator.single(N + BosonOperator.identity("1/2"))
    assert op.systems == (Subsystem.boson(),)


def test_precedence_and_normal_ordering():
    op = parse_expression("2*N^2 + N")
    assert op.factor(0) == BosonOperator({(2, 2): 2, (1, 1): 3})
    assert parse_expression("-a*ad + 1") == parse_expression("-N")
    # ^ is right associative
    assert parse_expression("N^2^2") == parse_expression("N^4")


def test_tensor_product():
    op = parse_expression("kron(Sz{s=1}, Sz{s=1}) + 1/2*kron(Sz{s=1}^2, I)")
    sz = SpinOperator.sz(1)
    expected = TensorOperator.from_factors(SPIN_PAIR, (sz, sz)) + \
        TensorOperator.from_factors(SPIN_PAIR, (sz * sz, None)) * gauss("1/2")
    assert op == expected


def test_spin_label_from_system():
    op = parse_expression("Sz", [Subsystem.spin_system("3/2")])
    assert op == TensorOperator.single(SpinOperator.sz("3/2"))
    with pytest.raises(MissingSpinLabel):
        parse_expression("Sz")


def test_imaginary_scalars():
    assert parse_expression("1/2i*N") == TensorOperator.single(N * gauss("I/2"))
    assert parse_expression("(1 + 2i)*a") == TensorOperator.single(BosonOperator.annihilation() * gauss("1 + 2*I"))


def test_scalar_needs_a_system():
    with pytest.raises(MissingSystem):
        parse_expression("3")
    op = parse_expression("3", [Subsystem.boson()])
    assert op.is_scalar()


def test_syntax_errors_carry_position():
    with pytest.raises(ExpressionSyntaxError) as exc:
        parse_expression("N +* 2")
    assert exc.value.detail.startswith("line 1, column")
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("N^(1/2)")
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("a{s=1}")


def test_identity_slots_take_the_sibling_subsystem():
    op = parse_expression("kron(Sz{s=1}, I) + kron(I, N)")
    assert op.systems == (Subsystem.spin_system(1), Subsystem.boson())
    assert op == TensorOperator.from_factors(op.systems, (SpinOperator.sz(1), None)) + \
        TensorOperator.from_factors(op.systems, (None, N))
    with pytest.raises(MissingSystem):
        parse_expression("kron(N, I)")
    with pytest.raises(Unsupported):
        parse_expression("kron(N, I) + kron(Sz{s=1}, I)")
    with pytest.raises(Unsupported):
        parse_expression("kron(N, I) + kron(I, N, N)")


def test_unnamed_identity_slots_render_explicitly():
    op = TensorOperator.from_factors(SPIN_PAIR, (SpinOperator.sz(1), None))
    text = render_operator(op)
    assert text == "kron(Sz{s=1}, Sz{s=1}^0)"
    assert parse_expression(text) == op


def test_bad_numbers_are_syntax_errors():
    with pytest.raises(ExpressionSyntaxError) as exc:
        parse_expression("N + 1/0")
    assert exc.value.detail.startswith("line 1, column 5")
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("Sz{s=1/3}")


def test_unknown_atoms_and_mixed_kinds():
    with pytest.raises(UnknownAtom):
        parse_expression("x + 1")
    with pytest.raises(Unsupported):
        parse_expression("N + Sz{s=1}")
    with pytest.raises(MissingSystem):
        parse_expression("a", [Subsystem.spin_system(1)])


@pytest.mark.parametrize("text, systems", [
    ("2*N^2 + N + 1", None),
    ("(1/2 + 3/2i)*ad*a^2 - 1/3i*a + 7", None),
    ("Sz{s=3/2}^3 - 2*Sz{s=3/2}", None),
    ("kron(Sz{s=1}, Sz{s=1}) + 1/2*kron(Sz{s=1}^2, I)", SPIN_PAIR),
    ("kron(N, Sz{s=1/2}) + kron(a + ad, I)", (Subsystem.boson(), Subsystem.spin_system("1/2"))),
])
def test_render_is_a_fixed_point(text, systems):
    op = parse_expression(text, systems)
    rendered = render_operator(op)
    assert parse_expression(rendered, systems) == op
    assert render_operator(parse_expression(rendered, systems)) == rendered


def test_render_zero():
    assert render_operator(TensorOperator((Subsystem.boson(),))) == "0"
