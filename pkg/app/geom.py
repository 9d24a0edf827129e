import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import sympy

from app.symcore import (
    ONE, ZBS, ZS, PhaseSymbol, derivative,
)

logger = logging.getLogger(__name__)

# {f, g} = POISSON_SIGN * (df/dz dg/dzb - df/dzb dg/dz) / omega_zzbar
POISSON_SIGN = 1


def spin_label(s: Union[int, str, sympy.Rational]) -> sympy.Rational:
    """
    Normalize a spin label to an exact half-integer.

    Args:
        s (Union[int, str, sympy.Rational]): ``1``, ``"3/2"`` or ``Rational(3, 2)``.

    Returns:
        sympy.Rational: The label.

    Raises:
        ValueError: If ``2s`` is not a positive integer.
    """
    try:
        value = sympy.Rational(s)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ValueError(f"spin must be a positive half-integer, got {s}")
    if value <= 0 or (2 * value).q != 1:
        raise ValueError(f"spin must be a positive half-integer, got {s}")
    return value


@dataclass(frozen=True)
class SpectralRule:
    """
    Substitution rule turning a spectral variable into a discrete sum.

    ``boson-half-integer`` maps the variable to ``m + 1/2`` for ``m = 0, 1, ...``;
    ``spin-integer`` maps it to ``m`` for ``m = -s, ..., s``.
    """

    kind: str
    spin: Optional[sympy.Rational] = None

    def size(self, cutoff: Optional[int] = None) -> int:
        if self.kind == "spin-integer":
            return int(2 * self.spin) + 1
        if cutoff is None:
            raise ValueError("boson rule needs a cutoff")
        return cutoff + 1

    def labels(self, cutoff: Optional[int] = None) -> np.ndarray:
        """Quantum numbers ``m`` in ascending order."""
        if self.kind == "spin-integer":
            return np.arange(self.size(), dtype=float) - float(self.spin)
        return np.arange(self.size(cutoff), dtype=float)

    def values(self, cutoff: Optional[int] = None) -> np.ndarray:
        """Spectral values substituted for the variable."""
        if self.kind == "spin-integer":
            return self.labels()
        return self.labels(cutoff) + 0.5

    @property
    def bounded(self) -> bool:
        return self.kind == "spin-integer"


@dataclass(frozen=True)
class Manifold:
    """
    Phase space of one subsystem with its geometric data in complex coordinates.

    Only ``dYdzbar`` of the Kaehler function is stored, so the logarithm of the
    sphere never enters the symbol algebra.
    """

    kind: str  # 'plane' or 'sphere'
    a_z: PhaseSymbol
    a_zbar: PhaseSymbol
    omega_zzbar: PhaseSymbol
    dYdzbar: PhaseSymbol
    spectral_rule: SpectralRule
    spin: Optional[sympy.Rational] = None
    nonstandard: bool = False

    @classmethod
    def plane(cls) -> "Manifold":
        half_i = PhaseSymbol.constant("I/2")
        return cls(
            kind="plane",
            a_z=ZBS * half_i,
            a_zbar=-(ZS * half_i),
            omega_zzbar=PhaseSymbol.constant("I"),
            dYdzbar=ZS,
            spectral_rule=SpectralRule("boson-half-integer"),
        )

    @classmethod
    def sphere(cls, s) -> "Manifold":
        s = spin_label(s)
        return cls._sphere(s, connection=s, nonstandard=False)

    @classmethod
    def sphere_nonstandard(cls, s) -> "Manifold":
        """
        Sphere whose connection carries the prefactor ``s + 1/2`` while the
        Kaehler data stays that of the spin-``s`` bundle.
        """
        s = spin_label(s)
        logger.warning("building the (s+1/2) sphere connection for s=%s", s)
        return cls._sphere(s, connection=s + sympy.Rational(1, 2), nonstandard=True)

    @classmethod
    def _sphere(cls, s: sympy.Rational, connection: sympy.Rational, nonstandard: bool) -> "Manifold":
        u_inv = PhaseSymbol(ONE.numerator, 1)
        i_c = PhaseSymbol.constant(sympy.I * connection)
        return cls(
            kind="sphere",
            a_z=ZBS * i_c * u_inv,
            a_zbar=-(ZS * i_c * u_inv),
            omega_zzbar=i_c * 2 * u_inv ** 2,
            dYdzbar=ZS * (2 * s) * u_inv,
            spectral_rule=SpectralRule("spin-integer", s),
            spin=s,
            nonstandard=nonstandard,
        )

    def label(self) -> str:
        if self.kind == "plane":
            return "plane"
        tag = "sphere'" if self.nonstandard else "sphere"
        return f"{tag}(s={self.spin})"


@dataclass(frozen=True)
class VectorField:
    xi_z: PhaseSymbol
    xi_zbar: PhaseSymbol

    @property
    def is_zero(self) -> bool:
        return self.xi_z.is_zero and self.xi_zbar.is_zero


def check_symplectic(manifold: Manifold) -> bool:
    """
    Check ``omega = -dA`` in components: ``-(d_z A_zb - d_zb A_z) == omega_zzbar``.
    """
    curl = derivative(manifold.a_zbar, "z") - derivative(manifold.a_z, "zb")
    return -curl == manifold.omega_zzbar


def kaehler_check(manifold: Manifold) -> bool:
    """
    Check that ``exp(-Y/2)`` solves the polarization equation, i.e.
    ``dY/dzb == 2i A_zb``.
    """
    return manifold.dYdzbar == manifold.a_zbar * PhaseSymbol.constant("2*I")


def hamiltonian_vector_field(f: PhaseSymbol, manifold: Manifold) -> VectorField:
    """
    Hamiltonian vector field of ``f`` defined by ``i_xi omega = -df``.

    Args:
        f (PhaseSymbol): The observable; complex symbols give the C-linear
            extension.
        manifold (Manifold): Phase space carrying ``omega_zzbar``.

    Returns:
        VectorField: ``xi_z = -d_zb f / omega``, ``xi_zb = d_z f / omega``.

    Raises:
        OutsideClosedFamily: If the division leaves the symbol algebra.
    """
    omega = manifold.omega_zzbar
    return VectorField(
        xi_z=-derivative(f, "zb").divide(omega),
        xi_zbar=derivative(f, "z").divide(omega),
    )


def preserves_polarization(field: VectorField) -> bool:
    return derivative(field.xi_zbar, "z").is_zero


def interior_product_check(f: PhaseSymbol, manifold: Manifold) -> bool:
    """Check ``i_xi omega + df = 0`` on the ``dz`` and ``dzb`` components."""
    field = hamiltonian_vector_field(f, manifold)
    omega = manifold.omega_zzbar
    dz_part = derivative(f, "z") - omega * field.xi_zbar
    dzb_part = derivative(f, "zb") + omega * field.xi_z
    return dz_part.is_zero and dzb_part.is_zero


def poisson_bracket(f: PhaseSymbol, g: PhaseSymbol, manifold: Manifold) -> PhaseSymbol:
    """
    Poisson bracket ``{f, g}`` in complex coordinates.

    Raises:
        OutsideClosedFamily: If the division by ``omega_zzbar`` leaves the
            symbol algebra.
    """
    cross = derivative(f, "z") * derivative(g, "zb") - derivative(f, "zb") * derivative(g, "z")
    return (cross * POISSON_SIGN).divide(manifold.omega_zzbar)
