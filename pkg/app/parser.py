"""
Operator expression language.

Atoms ``a``, ``ad``, ``N`` (``ad*a``), ``Sz`` (optionally ``Sz{s=3/2}``) and
``I``; exact scalars such as ``3``, ``1.5``, ``1/2``, ``2i`` or ``1/2i``
(which is ``i/2``); operators ``^`` (tightest, right associative), unary
``+``/``-``, ``*`` and binary ``+``/``-``; tensor products ``kron(e1, e2)``.
"""
import logging
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import sympy
from pyparsing import (
    Forward, Keyword, OpAssoc, Optional as Opt, ParseBaseException, ParseFatalException, ParserElement, Regex,
    Suppress,
    ZeroOrMore, infix_notation, one_of,
)
from sympy import QQ_I

from app.errors import (
    DequantError, ExpressionSyntaxError, MissingSpinLabel, MissingSystem, Unsupported, UnknownAtom,
)
from app.geom import spin_label
from app.opalg import BosonOperator, SpinOperator, Subsystem, TensorOperator, kron
from app.symcore import GaussRational, gauss, gauss_parts

ParserElement.enable_packrat()

logger = logging.getLogger(__name__)

ATOMS = ("a", "ad", "N", "Sz", "I")

Value = Union[GaussRational, BosonOperator, SpinOperator, TensorOperator]


def _exact(s: str, loc: int, text: str) -> sympy.Rational:
    try:
        return sympy.Rational(text)
    except ZeroDivisionError:
        raise ParseFatalException(s, loc, f"division by zero in {text!r}")


class Number:

    def __init__(self, s, loc, toks):
        text = toks[0]
        imaginary = text.endswith("i")
        value = _exact(s, loc, text.rstrip("i"))
        self.value = gauss(value * sympy.I if imaginary else value)

    def __repr__(self):
        return f"Number({self.value})"


class Atom:

    def __init__(self, s, loc, toks):
        self.name = toks[0]
        self.spin = None
        if len(toks) > 1:
            try:
                self.spin = spin_label(_exact(s, loc, toks[1]))
            except ValueError as exc:
                raise ParseFatalException(s, loc, str(exc))
        self.loc = loc

    def __repr__(self):
        return f"Atom({self.name}, s={self.spin})"


class Kron:

    def __init__(self, s, loc, toks):
        self.args = list(toks[1:])

    def __repr__(self):
        return "Kron({})".format(", ".join(repr(x) for x in self.args))


class Operation:

    def __init__(self, op, operands):
        self.op = op
        self.operands = operands

    def __repr__(self):
        return f"Operation({self.op}, {self.operands})"


def _power(s, loc, toks):
    items = toks[0]
    node = items[-1]
    for base in reversed(items[:-1:2]):
        node = Operation("^", [base, node])
    return node


def _sign(s, loc, toks):
    sign, operand = toks[0]
    return Operation("neg", [operand]) if sign == "-" else operand


def _product(s, loc, toks):
    return Operation("*", list(toks[0][::2]))


def _sum(s, loc, toks):
    items = toks[0]
    operands = [(1, items[0])]
    for sign, operand in zip(items[1::2], items[2::2]):
        operands.append((1 if sign == "+" else -1, operand))
    return Operation("+", operands)


def make_grammar() -> ParserElement:
    expr = Forward()
    number = Regex(r"\d+(?:\.\d+)?(?:/\d+)?i?")
    label = Suppress("{") + Suppress("s") + Suppress("=") + Regex(r"\d+(?:/\d+)?") + Suppress("}")
    ident = Regex(r"[A-Za-z_][A-Za-z0-9_]*") + Opt(label)
    kron_call = Keyword("kron") + Suppress("(") + expr + ZeroOrMore(Suppress(",") + expr) + Suppress(")")

    number.set_parse_action(Number)
    ident.set_parse_action(Atom)
    kron_call.set_parse_action(Kron)

    operand = kron_call | number | ident
    expr <<= infix_notation(operand, [
        ("^", 2, OpAssoc.RIGHT, _power),
        (one_of("+ -"), 1, OpAssoc.RIGHT, _sign),
        ("*", 2, OpAssoc.LEFT, _product),
        (one_of("+ -"), 2, OpAssoc.LEFT, _sum),
    ])
    return expr


GRAMMAR = make_grammar()


# -- evaluation ---------------------------------------------------------------------

def _atom(node: Atom, context: Optional[Subsystem]) -> Value:
    if node.name not in ATOMS:
        raise UnknownAtom(f"unknown atom {node.name!r}", subexpression=node.name)
    if node.name == "I":
        return QQ_I.one
    if node.name == "Sz":
        spin = node.spin
        if spin is None and context is not None and context.kind == "spin":
            spin = context.spin
        if spin is None:
            raise MissingSpinLabel("Sz needs a spin label or a spin system", subexpression="Sz")
        if context is not None and (context.kind != "spin" or context.spin != spin):
            raise MissingSystem(f"Sz{{s={spin}}} placed on a {context.label()} subsystem", subexpression="Sz")
        return SpinOperator.sz(spin)
    if node.spin is not None:
        raise ExpressionSyntaxError(f"{node.name} takes no spin label", subexpression=node.name)
    if context is not None and context.kind != "boson":
        raise MissingSystem(f"{node.name} placed on a {context.label()} subsystem", subexpression=node.name)
    if node.name == "a":
        return BosonOperator.annihilation()
    if node.name == "ad":
        return BosonOperator.creation()
    return BosonOperator.number()


def _system_of(value: Value) -> Optional[Subsystem]:
    if isinstance(value, BosonOperator):
        return Subsystem.boson()
    if isinstance(value, SpinOperator):
        return Subsystem("spin", value.spin)
    return None


def _lift(value: Value, systems: Sequence[Subsystem]) -> TensorOperator:
    if isinstance(value, TensorOperator):
        return value
    if isinstance(value, (BosonOperator, SpinOperator)):
        if len(systems) != 1 or _system_of(value) != systems[0]:
            raise Unsupported("single-subsystem operator combined with a tensor product")
        return TensorOperator.single(value)
    return TensorOperator.identity(systems, value)


def _combine(left: Value, right: Value, op: str) -> Value:
    tensors = [v for v in (left, right) if isinstance(v, TensorOperator)]
    if tensors:
        systems = tensors[0].systems
        left, right = _lift(left, systems), _lift(right, systems)
    elif all(isinstance(v, (BosonOperator, SpinOperator)) for v in (left, right)):
        if _system_of(left) != _system_of(right):
            raise Unsupported("operators on different subsystems must be joined with kron",
                              subexpression=f"{_system_of(left).label()} and {_system_of(right).label()}")
    if not isinstance(left, (BosonOperator, SpinOperator, TensorOperator)):
        # scalars commute with everything
        left, right = right, left
    if op == "+":
        return left + right
    if op == "*":
        return left * right
    raise ValueError(op)


def _exponent(value: Value) -> int:
    if not isinstance(value, GaussRational) or value.y or value.x.denominator != 1 or value.x < 0:
        raise ExpressionSyntaxError("exponent must be a non-negative integer")
    return int(value.x)


def _evaluate(node, context: Optional[Subsystem], systems: Optional[Sequence[Subsystem]]) -> Value:
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Atom):
        return _atom(node, context)
    if isinstance(node, Kron):
        if systems is not None and len(systems) != len(node.args):
            raise MissingSystem(f"kron of {len(node.args)} factors with {len(systems)} system descriptors")
        factors = []
        for j, arg in enumerate(node.args):
            slot = systems[j] if systems is not None else None
            value = _evaluate(arg, slot, None)
            if isinstance(value, TensorOperator):
                factors.append(value)
                continue
            slot = slot or _system_of(value)
            if slot is None:
                raise MissingSystem(f"kron factor {j + 1} does not name its subsystem", subexpression=repr(arg))
            factors.append(_lift(value, [slot]))
        return kron(*factors)
    if node.op == "^":
        base = _evaluate(node.operands[0], context, systems)
        return base ** _exponent(_evaluate(node.operands[1], context, systems))
    if node.op == "neg":
        return _evaluate(node.operands[0], context, systems) * -1
    if node.op == "*":
        values = [_evaluate(x, context, systems) for x in node.operands]
        result = values[0]
        for value in values[1:]:
            result = _combine(result, value, "*")
        return result
    result = None
    for sign, operand in node.operands:
        value = _evaluate(operand, context, systems)
        value = value if sign > 0 else value * -1
        result = value if result is None else _combine(result, value, "+")
    return result


def _children(node) -> List:
    if isinstance(node, Kron):
        return node.args
    if isinstance(node, Operation):
        return [x[1] if isinstance(x, tuple) else x for x in node.operands]
    return []


def _walk(node) -> Iterator:
    yield node
    for child in _children(node):
        yield from _walk(child)


def _named_system(node) -> Optional[Subsystem]:
    # subsystem named by the atoms of a kron argument, if exactly one
    found: Set[Subsystem] = set()
    for item in _walk(node):
        if isinstance(item, Kron):
            return None
        if isinstance(item, Atom) and item.name in ("a", "ad", "N"):
            found.add(Subsystem.boson())
        elif isinstance(item, Atom) and item.name == "Sz" and item.spin is not None:
            found.add(Subsystem.spin_system(item.spin))
    return found.pop() if len(found) == 1 else None


def _outer_krons(node) -> Iterator[Kron]:
    if isinstance(node, Kron):
        yield node
        return
    for child in _children(node):
        yield from _outer_krons(child)


def infer_layout(tree) -> Optional[Tuple[Subsystem, ...]]:
    """
    Subsystems of the kron slots, each read from whichever term names it.

    Slots holding only ``I`` or scalars in one term take the subsystem that a
    sibling term gives the same slot.

    Returns:
        Optional[Tuple[Subsystem, ...]]: The layout, or ``None`` when the
        expression has no kron product or nests one inside another.

    Raises:
        Unsupported: If kron products differ in arity or give one slot two
            different subsystems.
        MissingSystem: If no term names some slot.
    """
    krons = list(_outer_krons(tree))
    if not krons or any(isinstance(x, Kron) for k in krons for arg in k.args for x in _walk(arg)):
        return None
    arity = len(krons[0].args)
    if any(len(k.args) != arity for k in krons):
        raise Unsupported("kron products of different arity in one expression")
    slots: Dict[int, Subsystem] = {}
    for k in krons:
        for j, arg in enumerate(k.args):
            system = _named_system(arg)
            if system is None:
                continue
            if slots.setdefault(j, system) != system:
                raise Unsupported(f"kron factor {j + 1} is a {slots[j].label()} and a {system.label()} subsystem")
    missing = [j for j in range(arity) if j not in slots]
    if missing:
        raise MissingSystem(f"kron factor {missing[0] + 1} does not name its subsystem")
    return tuple(slots[j] for j in range(arity))


def parse_expression(text: str, systems: Optional[Sequence[Subsystem]] = None) -> TensorOperator:
    """
    Parse an operator expression into a normal-ordered tensor operator.

    Args:
        text (str): The expression, e.g. ``"kron(Sz{s=1}, Sz{s=1}) + 1/2"``.
        systems (Optional[Sequence[Subsystem]]): One descriptor per subsystem;
            supplies spin labels and the layout of scalar-only expressions.

    Returns:
        TensorOperator: The operator.

    Raises:
        ExpressionSyntaxError: With line, column and the expected tokens.
        UnknownAtom: For names outside the atom set.
        MissingSpinLabel: For ``Sz`` without a label or spin system.
        MissingSystem: If a subsystem kind cannot be inferred.
    """
    try:
        tree = GRAMMAR.parse_string(text, parse_all=True)[0]
    except ParseBaseException as exc:
        detail = f"line {exc.lineno}, column {exc.col}: {exc.msg}"
        raise ExpressionSyntaxError(detail, subexpression=text)
    if systems is None:
        try:
            systems = infer_layout(tree)
        except DequantError as exc:
            exc.subexpression = exc.subexpression or text
            raise
    context = systems[0] if systems is not None and len(systems) == 1 else None
    value = _evaluate(tree, context, systems)
    if isinstance(value, TensorOperator):
        if systems is not None and tuple(systems) != value.systems:
            raise MissingSystem("expression layout differs from the system descriptors", subexpression=text)
        return value
    layout = tuple(systems) if systems is not None else None
    if layout is None:
        system = _system_of(value)
        if system is None:
            raise MissingSystem("a scalar expression needs a system descriptor", subexpression=text)
        layout = (system,)
    try:
        return _lift(value, layout)
    except DequantError as exc:
        exc.subexpression = exc.subexpression or text
        raise


# -- rendering -----------------------------------------------------------------------

def _rational(value: sympy.Rational) -> str:
    return str(value.p) if value.q == 1 else f"{value.p}/{value.q}"


def _coefficient(c: GaussRational):
    # returns (sign, text) with text empty for a unit coefficient
    re, im = gauss_parts(c)
    if not im:
        return (-1 if re < 0 else 1), ("" if abs(re) == 1 else _rational(abs(re)))
    if not re:
        return (-1 if im < 0 else 1), f"{_rational(abs(im))}i"
    sign = "-" if im < 0 else "+"
    return 1, f"({_rational(re)} {sign} {_rational(abs(im))}i)"


def _monomial(system: Subsystem, monomial, named: bool = True) -> str:
    if system.kind == "spin":
        atom = f"Sz{{s={_rational(system.spin)}}}"
        if monomial == 0:
            return "" if named else f"{atom}^0"
        return atom if monomial == 1 else f"{atom}^{monomial}"
    if monomial == (0, 0) and not named:
        return "N^0"
    parts = []
    for name, power in zip(("ad", "a"), monomial):
        if power:
            parts.append(name if power == 1 else f"{name}^{power}")
    return "*".join(parts)


def render_operator(op: TensorOperator) -> str:
    """
    Canonical text of an operator; parsing it back gives the same operator.
    """
    pieces: List[str] = []
    named = [any(_monomial(s, key[j]) for key, _ in op.items()) for j, s in enumerate(op.systems)]
    for key, c in op.items():
        sign, coefficient = _coefficient(c)
        words = [_monomial(s, m, named[j] or op.arity == 1) for j, (s, m) in enumerate(zip(op.systems, key))]
        if op.arity == 1:
            body = words[0]
        else:
            body = "kron({})".format(", ".join(w or "I" for w in words))
        if coefficient and body:
            term = f"{coefficient}*{body}"
        else:
            term = coefficient or body or "1"
        if not pieces:
            pieces.append(f"-{term}" if sign < 0 else term)
        else:
            pieces.append(f"{'-' if sign < 0 else '+'} {term}")
    return " ".join(pieces) if pieces else "0"
