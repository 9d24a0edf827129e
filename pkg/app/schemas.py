import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from app.opalg import Subsystem
from app.pathint import RICHARDSON_SCHEDULE, TimeContour

ComplexPair = Tuple[float, float]


def pair(value: complex) -> ComplexPair:
    return (float(value.real), float(value.imag))


def finite(value: Optional[float]) -> Optional[float]:
    """Drop non-finite floats, which have no JSON encoding."""
    if value is None or not math.isfinite(value):
        return None
    return float(value)


class SystemSpec(BaseModel):
    kind: str  # 'boson' or 'spin'
    truncation: Optional[int] = Field(default=None, ge=1)
    spin: Optional[str] = None

    @classmethod
    def parse(cls, text: str) -> "SystemSpec":
        """
        Read a descriptor such as ``boson``, ``boson:60`` or ``spin:3/2``.

        Raises:
            ValueError: If the descriptor is malformed.
        """
        kind, _, value = text.strip().partition(":")
        if kind == "boson":
            return cls(kind="boson", truncation=int(value) if value else None)
        if kind == "spin" and value:
            return cls(kind="spin", spin=value)
        raise ValueError(f"bad system descriptor {text!r}")

    def subsystem(self) -> Subsystem:
        if self.kind == "boson":
            return Subsystem.boson()
        return Subsystem.spin_system(self.spin)


class ContourSpec(BaseModel):
    beta: float = Field(default=0.0, ge=0.0)
    T: float = 0.0
    theta: Optional[float] = None

    def contour(self) -> TimeContour:
        return TimeContour(self.beta, self.T, self.theta)


class JobSpec(BaseModel):
    command: Literal["dequantize", "quantize", "partition", "slicing-compare", "gvh"]
    expression: Optional[str] = None
    symbol: Optional[str] = None
    systems: List[SystemSpec] = []
    contour: ContourSpec = ContourSpec()
    method: Literal["exact", "reduced-sum", "transfer", "all"] = "all"
    mode: Literal["matrix-element", "normal-kernel", "diagonal-kernel"] = "matrix-element"
    slicing: Literal["exponential", "linear"] = "exponential"
    slices: Optional[int] = Field(default=None, ge=0)
    schedule: List[int] = list(RICHARDSON_SCHEDULE)
    cutoff: Optional[int] = Field(default=None, ge=0)
    truncation: Optional[int] = Field(default=None, ge=1)
    metaplectic: bool = True
    output_format: Literal["json", "csv", "text"] = "json"

    @field_validator("schedule")
    @classmethod
    def check_schedule(cls, value: List[int]) -> List[int]:
        if len(value) < 2 or any(n < 0 for n in value):
            raise ValueError("schedule needs at least two non-negative slice counts")
        return value

    def subsystems(self) -> Optional[List[Subsystem]]:
        return [s.subsystem() for s in self.systems] or None

    def fock_truncation(self) -> Optional[int]:
        """Explicit cutoff, else the largest ``boson:D`` descriptor."""
        if self.truncation is not None:
            return self.truncation
        sizes = [s.truncation for s in self.systems if s.truncation is not None]
        return max(sizes) if sizes else None


class VectorFieldOut(BaseModel):
    xi_z: str
    xi_zbar: str


class DequantizeResponse(BaseModel):
    command: str = "dequantize"
    expression: str
    systems: List[str]
    symbol: str
    spectral: Optional[str] = None
    field: Optional[VectorFieldOut] = None
    polarization_ok: Optional[bool] = None
    metaplectic: bool = True


class QuantizeResponse(BaseModel):
    command: str = "quantize"
    symbol: str
    manifold: str
    form: List[str]
    operator: Optional[str] = None
    metaplectic: bool = True


class PartitionRow(BaseModel):
    method: str
    value: ComplexPair
    abs_err_vs_exact: Optional[float] = None
    phase_offset: Optional[float] = None


class PartitionResponse(BaseModel):
    command: str
    expression: str
    contour: ContourSpec
    rows: List[PartitionRow]


class GvhResponse(BaseModel):
    command: str = "gvh"
    quadratic_homomorphism_ok: bool
    complex_quadratic_ok: bool
    residual_is_scalar: bool
    residual_value: ComplexPair
    residual_exact: str
    truncation: Optional[int] = None
    matrix_max_deviation: Optional[float] = None


class ErrorResponse(BaseModel):
    error: str
    detail: str
    subexpression: Optional[str] = None
