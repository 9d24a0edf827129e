"""
Partition functions: exact traces, spectral reduced sums and discrete
transfer-matrix path integrals with configurable slicing.
"""
import itertools
import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import scipy.linalg
import sympy
from scipy import special

from app.dequant import (
    ClassicalSymbol, dequantize_extended, naive_symbol_extended, normal_symbol,
    symmetric_symbol_extended,
)
from app.errors import (
    DequantError, DivergentSum, MissingRule, NotSpectral, QuadratureNotConverged,
    TruncationTooSmall, Unsupported,
)
from app.geom import Manifold, SpectralRule
from app.opalg import TensorOperator, dimension, to_matrix
from app.symcore import PhaseSymbol, gauss_complex

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-12
NODE_START = 64
NODE_LIMIT = 1024
NODE_AGREEMENT = 1e-10
RICHARDSON_SCHEDULE = (64, 128, 256, 512)
TRUNCATION_MARGIN = 40
# Gauss-Laguerre weights overflow for alpha above this
MAX_KERNEL_LEVELS = 160
NORMAL_KERNEL_DIGITS = 30
MAX_EXACT_DIMENSION = 4096
MAX_BOSON_CUTOFF = 1 << 16
MAX_GRID_POINTS = 1 << 22

TRANSFER_MODES = ("matrix-element", "normal-kernel", "diagonal-kernel")


@dataclass(frozen=True)
class TimeContour:
    """
    Weight ``exp(-tau H)`` with ``tau = beta + i*theta``.

    ``profile_integral`` is the integral of the time profile ``f(t)`` for a
    Hamiltonian ``f(t) H``; it defaults to the real-time extent ``T``.
    """

    beta: float = 0.0
    real_time: float = 0.0
    profile_integral: Optional[float] = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    @property
    def theta(self) -> float:
        return self.real_time if self.profile_integral is None else self.profile_integral

    @property
    def tau(self) -> complex:
        return complex(self.beta, self.theta)


@dataclass(frozen=True)
class PartitionResult:
    value: complex
    method: str  # 'exact', 'reduced-sum' or 'transfer'
    error_estimate: float
    mode: Optional[str] = None
    slices: Optional[int] = None
    truncation: Optional[int] = None
    cutoff: Optional[int] = None
    label: Optional[str] = None

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.method != "transfer":
            return self.method
        return f"transfer:{self.mode}:N={self.slices}" if self.slices else f"transfer:{self.mode}"


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    value: complex
    abs_err_vs_exact: float
    phase_offset: float


def default_truncation(op: TensorOperator) -> int:
    degrees = [op.slot_degree(j) for j, s in enumerate(op.systems) if s.kind == "boson"]
    return max(degrees, default=0) + TRUNCATION_MARGIN


def _has_boson(op: TensorOperator) -> bool:
    return any(s.kind == "boson" for s in op.systems)


def _spectrum(op: TensorOperator, truncation: int) -> np.ndarray:
    matrix = to_matrix(op, truncation)
    if not np.allclose(matrix, matrix.conj().T, atol=1e-12):
        raise Unsupported("exact trace needs a Hermitian operator")
    return np.linalg.eigvalsh(matrix)


def _guard_band(op: TensorOperator) -> int:
    return max(op.slot_degree(j) for j, s in enumerate(op.systems) if s.kind == "boson") + 2


def _edge_weight(op: TensorOperator, beta: float, truncation: int) -> float:
    # Boltzmann weight of the basis states in the guard band below the Fock edge
    guard = _guard_band(op)
    sizes = [truncation if s.kind == "boson" else int(2 * s.spin) + 1 for s in op.systems]
    energies = np.real(np.diag(to_matrix(op, truncation))).reshape(sizes)
    edge = np.zeros(energies.shape, dtype=bool)
    for axis, system in enumerate(op.systems):
        if system.kind == "boson":
            index = [slice(None)] * len(sizes)
            index[axis] = slice(truncation - guard, None)
            edge[tuple(index)] = True
    with np.errstate(over="ignore"):
        return float(np.sum(np.exp(-beta * energies[edge])))


def contour_truncation(op: TensorOperator, contour: TimeContour) -> int:
    """
    Fock cutoff for traces of ``op`` on ``contour``.

    Starts from ``default_truncation`` and doubles until the weight of the
    guard band at the Fock edge is below ``TAIL_TOLERANCE``, the tolerance the
    reduced sum picks its cutoff with.

    Args:
        op (TensorOperator): Operator with at least one bosonic subsystem.
        contour (TimeContour): The weight; only ``beta`` matters.

    Returns:
        int: The cutoff ``D``; ``default_truncation(op)`` without bosons or at
        ``beta = 0``.
    """
    truncation = default_truncation(op)
    if not _has_boson(op) or contour.beta <= 0:
        return truncation
    while _edge_weight(op, contour.beta, truncation) >= TAIL_TOLERANCE:
        if dimension(op.systems, 2 * truncation) > MAX_EXACT_DIMENSION:
            logger.warning("Fock cutoff capped at D=%d above the tail tolerance", truncation)
            break
        truncation *= 2
    logger.debug("Fock cutoff D=%d for beta=%g", truncation, contour.beta)
    return truncation


def exact_partition(op: TensorOperator, contour: TimeContour, truncation: Optional[int] = None) -> PartitionResult:
    """
    Trace of ``exp(-tau op)`` from the eigenvalues of the truncated matrix.

    For bosonic subsystems the error estimate adds the change under removal of
    a guard band of ``degree + 2`` Fock states to a geometric tail above the
    largest retained eigenvalue.

    Args:
        op (TensorOperator): Hermitian operator.
        contour (TimeContour): The weight ``exp(-tau op)``.
        truncation (Optional[int]): Fock cutoff; defaults to ``contour_truncation``.

    Returns:
        PartitionResult: The trace and its error estimate.

    Raises:
        TruncationTooSmall: If the cutoff cannot hold the operator.
        DivergentSum: For bosons at ``beta = 0`` without an explicit cutoff.
    """
    boson = _has_boson(op)
    if boson and contour.beta <= 0 and truncation is None:
        raise DivergentSum("bosonic trace at beta = 0 needs an explicit truncation")
    truncation = truncation or contour_truncation(op, contour)
    eigenvalues = _spectrum(op, truncation)
    tau = contour.tau
    value = complex(np.sum(np.exp(-tau * eigenvalues)))
    if not boson:
        error = float(np.finfo(float).eps * len(eigenvalues) * max(1.0, abs(value)))
        return PartitionResult(value, "exact", error, truncation=truncation)
    guard = _guard_band(op)
    reduced_size = truncation - guard
    if reduced_size < guard:
        raise TruncationTooSmall(f"D={truncation} leaves no room for a guard band of {guard}")
    smaller = complex(np.sum(np.exp(-tau * _spectrum(op, reduced_size))))
    if contour.beta > 0:
        top = np.sort(eigenvalues)
        spacing = max(top[-1] - top[-2], 1e-12) if len(top) > 1 else 1.0
        tail = math.exp(-contour.beta * top[-1]) / -math.expm1(-contour.beta * spacing)
    else:
        tail = math.inf
    logger.debug("exact trace at D=%d, guard band %d", truncation, guard)
    return PartitionResult(value, "exact", abs(value - smaller) + tail, truncation=truncation)


# -- reduced sums -------------------------------------------------------------------

def _slot_rules(symbol: ClassicalSymbol, rules: Optional[Sequence[Optional[SpectralRule]]]):
    slots = []
    for j, system in enumerate(symbol.systems):
        found = [v for v in symbol.variables if v.subsystem == j]
        override = rules[j] if rules is not None and j < len(rules) else None
        if len(found) > 1:
            raise MissingRule(f"subsystem {j + 1} enters through non-spectral coordinates",
                              subexpression=", ".join(v.name for v in found))
        if found:
            rule = override or found[0].rule
            if rule is None:
                raise MissingRule(f"variable {found[0].name} has no spectral rule", subexpression=found[0].name)
            slots.append((found[0], rule))
            continue
        if system.kind == "boson":
            raise DivergentSum(f"symbol is flat along bosonic subsystem {j + 1}")
        slots.append((None, SpectralRule("spin-integer", system.spin)))
    return slots


def _lambdify(symbol: ClassicalSymbol, slots) -> Callable:
    variables = [variable.symbol for variable, _ in slots if variable is not None]
    return sympy.lambdify(variables, symbol.as_expr(), "numpy")


def _grid_sum(function: Callable, slots, cutoff: int, tau: complex) -> Tuple[complex, np.ndarray]:
    axes = [rule.values(cutoff) for _, rule in slots]
    grids = np.meshgrid(*axes, indexing="ij")
    arguments = [g for (variable, _), g in zip(slots, grids) if variable is not None]
    energies = np.broadcast_to(np.asarray(function(*arguments), dtype=complex), grids[0].shape)
    weights = np.exp(-tau * energies)
    return complex(np.sum(weights)), weights


def _exponent_parts(symbol: ClassicalSymbol, slots, bosons: Sequence[int], contour: TimeContour):
    # per spin configuration: constant and per-mode parts of Re(tau H) in m_j, or None once two modes couple
    expr = symbol.as_expr()
    tau = sympy.Float(contour.beta) + sympy.I * sympy.Float(contour.theta)
    ms = [sympy.Symbol(f"m{j}", real=True) for j in bosons]
    spin_axes = [(variable, rule.values()) for j, (variable, rule) in enumerate(slots) if j not in bosons]
    parts = []
    for combo in itertools.product(*(values for _, values in spin_axes)):
        local = {slots[j][0].symbol: m + sympy.Rational(1, 2) for j, m in zip(bosons, ms)}
        for (variable, _), value in zip(spin_axes, combo):
            if variable is not None:
                local[variable.symbol] = sympy.Float(value)
        exponent = sympy.Poly(sympy.expand(sympy.re(sympy.expand(tau * expr.subs(local)))), *ms)
        constant = 0.0
        per_mode = [[0.0] * (max(exponent.degree(m), 0) + 1) for m in ms]
        for powers, c in exponent.terms():
            active = [i for i, p in enumerate(powers) if p]
            if len(active) > 1:
                return None
            if active:
                per_mode[active[0]][powers[active[0]]] = float(c)
            else:
                constant = float(c)
        parts.append((constant, [np.polynomial.Polynomial(c).trim() for c in per_mode]))
    return parts


def _growth_tail(growth: np.polynomial.Polynomial, start: int) -> float:
    # sum over m >= start of exp(-growth(m)), a geometric series once the increments stop shrinking
    increment = growth(np.polynomial.Polynomial([1, 1])) - growth
    slope = increment.deriv()
    turning = [r.real for r in slope.roots() if abs(r.imag) < 1e-12] if slope.degree() >= 1 else []
    if increment(start) <= 0 or any(r >= start for r in turning):
        return math.inf
    return math.exp(-growth(start)) / -math.expm1(-increment(start))


def _tail_bound(symbol: ClassicalSymbol, slots, bosons: Sequence[int], cutoff: int,
                contour: TimeContour) -> Optional[float]:
    """
    Bound on the weight outside the box ``m_j <= cutoff`` of the bosonic modes.

    With ``Re(tau H) = c + sum_j g_j(m_j)`` for every spin configuration the
    weight factorizes, so the complement of the box is bounded by
    ``exp(-c) (prod_j (S_j + T_j) - prod_j S_j)`` with ``S_j`` the box sum and
    ``T_j`` the geometric tail of mode ``j``.

    Returns:
        Optional[float]: The bound; ``inf`` while some tail is not yet
        geometric, ``None`` when two modes couple.

    Raises:
        DivergentSum: If some mode does not grow along its spectrum.
    """
    parts = _exponent_parts(symbol, slots, bosons, contour)
    if parts is None:
        return None
    levels = np.arange(cutoff + 1, dtype=float)
    total = 0.0
    for constant, growths in parts:
        inside, excess = 1.0, 0.0
        for growth in growths:
            if growth.degree() < 1 or growth.coef[-1] <= 0:
                raise DivergentSum("symbol does not grow along the bosonic spectrum",
                                   subexpression=str(symbol.as_expr()))
            with np.errstate(over="ignore"):
                box = float(np.sum(np.exp(-growth(levels))))
            tail = _growth_tail(growth, cutoff + 1)
            if math.isinf(tail):
                return math.inf
            # prod (S + T) - prod S, accumulated without cancellation
            excess = excess * (box + tail) + inside * tail
            inside *= box
        total += math.exp(-constant) * excess
    return total


def _automatic_cutoff(function: Callable, symbol: ClassicalSymbol, slots, bosons: Sequence[int],
                      contour: TimeContour) -> int:
    cutoff = 16
    while True:
        bound = _tail_bound(symbol, slots, bosons, cutoff, contour)
        if bound is None:
            # coupled modes: settle on the weight of the outermost shell
            _, weights = _grid_sum(function, slots, cutoff, contour.tau)
            bound = _outer_shell(np.abs(weights), [j in bosons for j in range(len(slots))])
        if bound < TAIL_TOLERANCE:
            return cutoff
        cutoff *= 2
        if cutoff > MAX_BOSON_CUTOFF or cutoff ** len(bosons) > MAX_GRID_POINTS:
            raise DivergentSum("no cutoff reaches the tail tolerance")


def reduced_sum_partition(symbol: ClassicalSymbol, contour: TimeContour, cutoff: Optional[int] = None,
                          rules: Optional[Sequence[Optional[SpectralRule]]] = None) -> PartitionResult:
    """
    Spectral sum ``sum exp(-tau H(values))`` over the substitution rules.

    Each subsystem's spectral variable runs over its rule: ``m + 1/2`` for
    bosons (truncated at ``cutoff``) and ``m = -s..s`` for spins.

    Args:
        symbol (ClassicalSymbol): Polynomial in spectral variables.
        contour (TimeContour): The weight.
        cutoff (Optional[int]): Largest bosonic ``m``; chosen automatically so
            the tail bound is below ``1e-12`` when omitted.
        rules (Optional[Sequence]): Per-subsystem overrides of the variable rules.

    Returns:
        PartitionResult: The sum with a tail bound. Coupled bosonic modes
        carry no bound and report ``inf``.

    Raises:
        MissingRule: If a subsystem variable has no rule.
        DivergentSum: For bosons at ``beta = 0`` or a symbol that does not grow.
    """
    slots = _slot_rules(symbol, rules)
    bosons = [j for j, (_, rule) in enumerate(slots) if not rule.bounded]
    if bosons and contour.beta <= 0:
        raise DivergentSum("bosonic spectral sum at beta = 0 does not converge")
    function = _lambdify(symbol, slots)
    tau = contour.tau
    if not bosons:
        value, _ = _grid_sum(function, slots, 0, tau)
        error = float(np.finfo(float).eps * max(1.0, abs(value)) * math.prod(r.size() for _, r in slots))
        return PartitionResult(value, "reduced-sum", error)
    if cutoff is None:
        cutoff = _automatic_cutoff(function, symbol, slots, bosons, contour)
    value, _ = _grid_sum(function, slots, cutoff, tau)
    bound = _tail_bound(symbol, slots, bosons, cutoff, contour)
    if bound is None:
        logger.info("coupled bosonic modes leave the reduced sum at M=%d without a tail bound", cutoff)
        bound = math.inf
    logger.debug("reduced sum with cutoff M=%d, tail bound %.3e", cutoff, bound)
    return PartitionResult(value, "reduced-sum", bound, cutoff=cutoff)


def _outer_shell(weights: np.ndarray, unbounded: Sequence[bool]) -> float:
    mask = np.zeros(weights.shape, dtype=bool)
    for axis, flag in enumerate(unbounded):
        if flag:
            index = [slice(None)] * weights.ndim
            index[axis] = -1
            mask[tuple(index)] = True
    return float(np.sum(weights[mask]))


# -- transfer matrices ------------------------------------------------------------------

def _radial_coefficients(symbol: PhaseSymbol) -> np.ndarray:
    if symbol.denom_power or any(a != b for (a, b), _ in symbol.terms()):
        raise NotSpectral("normal kernel needs a polynomial in |z|^2", subexpression=symbol.render())
    top = max((a for (a, _), _ in symbol.terms()), default=0)
    coefficients = np.zeros(top + 1, dtype=complex)
    for (a, _), c in symbol.terms():
        coefficients[a] = gauss_complex(c)
    return coefficients


def _check_radial(symbol: PhaseSymbol):
    if any(a != b for (a, b), _ in symbol.terms()):
        raise NotSpectral("diagonal kernel needs a symbol of |z|^2", subexpression=symbol.render())


def _normal_series(coefficients: np.ndarray, epsilon: complex, levels: int) -> List[mpmath.mpc]:
    # Taylor coefficients of exp(-eps H(w)) from the recurrence k s_k = sum_j j e_j s_(k-j)
    exponent = [-mpmath.mpc(epsilon) * mpmath.mpc(c) for c in coefficients]
    series = [mpmath.exp(exponent[0])]
    for k in range(1, levels):
        top = min(k, len(exponent) - 1)
        series.append(mpmath.fsum(j * exponent[j] * series[k - j] for j in range(1, top + 1)) / k)
    return series


def _normal_levels(coefficients: np.ndarray, epsilon: complex, levels: int) -> Tuple[List[mpmath.mpc], int]:
    # <n| :w^k: |n> = n!/(n-k)!; also returns the largest term exponent in bits
    series = _normal_series(coefficients, epsilon, levels)
    values, largest = [], 0
    for n in range(levels):
        terms = [mpmath.ff(n, k) * series[k] for k in range(n + 1)]
        largest = max([largest] + [int(mpmath.mag(t)) for t in terms if t])
        values.append(mpmath.fsum(terms))
    return values, largest


def _normal_kernel(symbol: PhaseSymbol, epsilon: complex, levels: int) -> np.ndarray:
    coefficients = _radial_coefficients(symbol)
    with mpmath.workdps(NORMAL_KERNEL_DIGITS):
        _, largest = _normal_levels(coefficients, epsilon, levels)
    # the level sums cancel down from terms of size 2**largest
    digits = NORMAL_KERNEL_DIGITS + max(0, math.ceil(largest * math.log10(2)))
    with mpmath.workdps(digits):
        values, _ = _normal_levels(coefficients, epsilon, levels)
        return np.array([complex(v) for v in values])


@lru_cache(maxsize=None)
def _laguerre(nodes: int, alpha: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_genlaguerre(nodes, alpha)
    return x, w / np.sum(w)


@lru_cache(maxsize=None)
def _jacobi(nodes: int, alpha: int, beta: int) -> Tuple[np.ndarray, np.ndarray]:
    y, w = special.roots_jacobi(nodes, alpha, beta)
    return (1.0 + y) / 2.0, w / np.sum(w)


def _plane_level(symbol: PhaseSymbol, epsilon: complex, nodes: int, n: int) -> complex:
    x, w = _laguerre(nodes, n)
    return complex(np.sum(w * np.exp(-epsilon * symbol.evaluate(np.sqrt(x)))))


def _sphere_level(symbol: PhaseSymbol, spin, epsilon: complex, nodes: int, a: int) -> complex:
    two_s = int(2 * spin)
    x, w = _jacobi(nodes, two_s - a, a)
    radius = np.sqrt(x / (1.0 - x))
    return complex(np.sum(w * np.exp(-epsilon * symbol.evaluate(radius))))


def _map(executor: Optional[Executor], function: Callable, items: Sequence) -> List:
    if executor is None:
        return [function(item) for item in items]
    return list(executor.map(function, items))


def _diagonal_kernel(symbol: PhaseSymbol, manifold: Manifold, epsilon: complex, levels: int, nodes: int,
                     executor: Optional[Executor]) -> np.ndarray:
    if manifold.kind == "plane":
        def level(n):
            return _plane_level(symbol, epsilon, nodes, n)
        return np.array(_map(executor, level, range(levels)))

    def level(a):
        return _sphere_level(symbol, manifold.spin, epsilon, nodes, a)
    return np.array(_map(executor, level, range(int(2 * manifold.spin) + 1)))


def transfer_partition(target: Union[TensorOperator, PhaseSymbol], contour: TimeContour, slices: int,
                       truncation: Optional[int] = None, mode: str = "matrix-element",
                       slicing: str = "exponential", manifold: Optional[Manifold] = None,
                       executor: Optional[Executor] = None) -> PartitionResult:
    """
    Discrete path integral ``tr K**(N + 1)`` with ``eps = tau / (N + 1)``.

    Args:
        target: An operator for ``matrix-element`` mode, a symbol otherwise.
        contour (TimeContour): The weight.
        slices (int): ``N``.
        truncation (Optional[int]): Fock cutoff ``D``.
        mode (str): ``matrix-element``, ``normal-kernel`` or ``diagonal-kernel``.
        slicing (str): ``exponential`` or ``linear`` slices in matrix-element mode.
        manifold (Optional[Manifold]): Phase space of a symbol target.
        executor (Optional[Executor]): Worker pool for kernel assembly.

    Returns:
        PartitionResult: ``Z_N`` tagged with the mode and ``N``.

    Raises:
        QuadratureNotConverged: If node doubling never agrees to ``1e-10``.
        TruncationTooSmall: If ``D`` cannot hold the operator.
    """
    epsilon = contour.tau / (slices + 1)
    if mode == "matrix-element":
        if not isinstance(target, TensorOperator):
            raise Unsupported("matrix-element slices need an operator")
        truncation = truncation or contour_truncation(target, contour)
        hamiltonian = to_matrix(target, truncation)
        if slicing == "linear":
            kernel = np.eye(len(hamiltonian)) - epsilon * hamiltonian
        else:
            kernel = scipy.linalg.expm(-epsilon * hamiltonian)
        value = complex(np.trace(np.linalg.matrix_power(kernel, slices + 1)))
        error = float(np.finfo(float).eps * (slices + 1) * len(kernel) * max(1.0, abs(value)))
        label = f"transfer:matrix-element({slicing}):N={slices}"
        return PartitionResult(value, "transfer", error, mode, slices, truncation, label=label)

    if not isinstance(target, PhaseSymbol):
        raise Unsupported(f"{mode} slices need a phase-space symbol")
    manifold = manifold or Manifold.plane()
    levels = truncation or TRUNCATION_MARGIN
    if mode == "normal-kernel":
        if manifold.kind != "plane":
            raise Unsupported("normal-kernel slices are defined for bosonic modes")
        if levels > MAX_KERNEL_LEVELS:
            raise TruncationTooSmall(f"normal kernel supports at most {MAX_KERNEL_LEVELS} Fock levels")
        diagonal = _normal_kernel(target, epsilon, levels)
        value = complex(np.sum(diagonal ** (slices + 1)))
        error = float(np.finfo(float).eps * levels * (slices + 1) * max(1.0, abs(value)))
        return PartitionResult(value, "transfer", error, mode, slices, levels)
    if mode != "diagonal-kernel":
        raise Unsupported(f"unknown transfer mode {mode!r}")
    _check_radial(target)
    if manifold.kind == "plane" and levels > MAX_KERNEL_LEVELS:
        raise TruncationTooSmall(f"diagonal kernel supports at most {MAX_KERNEL_LEVELS} Fock levels")
    nodes = NODE_START
    previous = complex(np.sum(_diagonal_kernel(target, manifold, epsilon, levels, nodes, executor) ** (slices + 1)))
    while True:
        if nodes * 2 > NODE_LIMIT:
            raise QuadratureNotConverged(f"no agreement up to {NODE_LIMIT} nodes", subexpression=target.render())
        nodes *= 2
        diagonal = _diagonal_kernel(target, manifold, epsilon, levels, nodes, executor)
        value = complex(np.sum(diagonal ** (slices + 1)))
        difference = abs(value - previous)
        if difference <= NODE_AGREEMENT * max(abs(value), 1e-300):
            break
        previous = value
    logger.debug("diagonal kernel converged with %d nodes", nodes)
    size = levels if manifold.kind == "plane" else None
    return PartitionResult(value, "transfer", difference, mode, slices, size)


def continuum_limit(target: Union[TensorOperator, PhaseSymbol], contour: TimeContour, mode: str,
                    schedule: Sequence[int] = RICHARDSON_SCHEDULE, truncation: Optional[int] = None,
                    manifold: Optional[Manifold] = None, slicing: str = "exponential",
                    executor: Optional[Executor] = None) -> PartitionResult:
    """
    Richardson extrapolation of ``Z_N`` to ``eps -> 0`` over the slice schedule.
    """
    results = [transfer_partition(target, contour, n, truncation, mode, slicing, manifold, executor)
               for n in schedule]
    steps = np.array([1.0 / (n + 1) for n in schedule])
    values = np.array([r.value for r in results])

    def extrapolate(h, z):
        degree = len(h) - 1
        real = np.polyfit(h, z.real, degree)
        imag = np.polyfit(h, z.imag, degree)
        return complex(np.polyval(real, 0.0), np.polyval(imag, 0.0))

    value = extrapolate(steps, values)
    coarse = extrapolate(steps[1:], values[1:]) if len(steps) > 2 else values[-1]
    error = abs(value - coarse) + max(r.error_estimate for r in results)
    label = f"transfer:{mode}:richardson"
    return PartitionResult(value, "transfer", error, mode, None, results[-1].truncation, label=label)


def antinormal_partition(symbol: PhaseSymbol, manifold: Manifold, contour: TimeContour,
                         truncation: Optional[int] = None) -> PartitionResult:
    """
    Trace of ``exp(-tau A(H))`` for the anti-normal quantization ``A``.

    ``A(H)`` is diagonal for symbols of ``|z|^2``; its entries are the radial
    moments ``(n + k)! / n!`` on the plane and Beta integrals on the sphere.
    """
    _check_radial(symbol)
    tau = contour.tau
    if manifold.kind == "plane":
        levels = truncation or TRUNCATION_MARGIN
        coefficients = _radial_coefficients(symbol)
        n = np.arange(levels, dtype=float)
        diagonal = sum(c * special.poch(n + 1, k) for k, c in enumerate(coefficients))
    else:
        two_s = int(2 * manifold.spin)
        k = symbol.denom_power
        diagonal = np.zeros(two_s + 1, dtype=complex)
        for a in range(two_s + 1):
            total = 0j
            for (b, _), c in symbol.terms():
                if 2 * manifold.spin - a + k - b + 1 <= 0:
                    raise NotSpectral("anti-normal moment diverges", subexpression=symbol.render())
                total += gauss_complex(c) * special.beta(a + b + 1, two_s - a + k - b + 1)
            diagonal[a] = (two_s + 1) * math.comb(two_s, a) * total
        levels = None
    value = complex(np.sum(np.exp(-tau * diagonal)))
    return PartitionResult(value, "exact", float(np.finfo(float).eps * len(diagonal) * max(1.0, abs(value))),
                           truncation=levels, label="antinormal-oracle")


# -- comparison table ---------------------------------------------------------------------

def _row(result: PartitionResult, reference: complex) -> ComparisonRow:
    ratio = result.value / reference if reference else complex("nan")
    return ComparisonRow(result.name, result.value, abs(result.value - reference), float(np.angle(ratio)))


def _optional(rows: List[PartitionResult], label: str, compute: Callable[[], PartitionResult]):
    try:
        rows.append(replace(compute(), label=label))
    except (NotSpectral, MissingRule, Unsupported) as exc:
        logger.info("skipping %s: %s %s", label, exc.name, exc.detail)


def slicing_compare(op: TensorOperator, contour: TimeContour, schedule: Sequence[int] = RICHARDSON_SCHEDULE,
                    truncation: Optional[int] = None, executor: Optional[Executor] = None) -> List[ComparisonRow]:
    """
    Compare the partition function across symbols and slicing prescriptions.

    Rows: the exact trace, reduced sums of the corrected, naive and
    anti-normal symbols, and transfer matrices over the slice schedule. The
    naive and anti-normal rows appear only for diagonal operators.

    Returns:
        List[ComparisonRow]: Value, absolute error and phase offset against
        the exact trace.
    """
    truncation = truncation or contour_truncation(op, contour)
    exact = exact_partition(op, contour, truncation)
    results = [exact]
    corrected = dequantize_extended(op)
    results.append(replace(reduced_sum_partition(corrected, contour), label="reduced-sum(corrected)"))
    _optional(results, "reduced-sum(naive)", lambda: reduced_sum_partition(naive_symbol_extended(op), contour))
    _optional(results, "reduced-sum(symmetric)",
              lambda: reduced_sum_partition(symmetric_symbol_extended(op), contour))
    for slicing in ("exponential", "linear"):
        for n in schedule:
            results.append(transfer_partition(op, contour, n, truncation, "matrix-element", slicing))
    if op.arity == 1:
        system = op.systems[0]
        manifold = Manifold.plane() if system.kind == "boson" else Manifold.sphere(system.spin)
        kernels = []
        if system.kind == "boson":
            kernels.append(("normal-kernel", "naive", lambda: normal_symbol(op)))
        kernels.append(("diagonal-kernel", "corrected", corrected.to_phase_symbol))
        for mode, which, make_symbol in kernels:
            try:
                symbol = make_symbol()
                _check_radial(symbol)
            except DequantError as exc:
                logger.info("skipping %s: %s", mode, exc.name)
                continue
            levels = min(truncation, MAX_KERNEL_LEVELS)
            for n in schedule:
                result = transfer_partition(symbol, contour, n, levels, mode, manifold=manifold, executor=executor)
                results.append(replace(result, label=f"transfer:{mode}({which}):N={n}"))
            limit = continuum_limit(symbol, contour, mode, schedule, levels, manifold, executor=executor)
            results.append(replace(limit, label=f"transfer:{mode}({which}):richardson"))
    return [_row(r, exact.value) for r in results]
