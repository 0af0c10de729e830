"""Four-transistor voltage reference (M6-M9) feeding the SCM, plus its trim schemes.

M6, M7 and M9 share one flavor; M8 carries its own so that the M8/M9 pair can
form a 2T reference setting M7's body bias V_BS7. Aspect ratios are plain
W/L values; sizing code normalises S6 to 1.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .devmodel import T0_DEFAULT, delta_vt, isq_sub, thermal_voltage
from .errors import ConvergenceError, DomainError, InputError
from .rootfind import golden_section


@dataclass(frozen=True)
class Vref4tDesign:
    s6: float
    s7: float
    s8: float
    s9: float
    flavor67_9: str
    flavor8: str | None = None
    vbs7_override: float | None = None

    def __post_init__(self):
        if not (self.s6 > 0 and self.s9 > 0 and self.s7 >= 0):
            raise DomainError("need s6 > 0, s9 > 0 and s7 >= 0")
        if self.vbs7_override is None and (self.flavor8 is None or not self.s8 > 0):
            raise DomainError("V_BS7 needs either vbs7_override or flavor8 with s8 > 0")


class TrimTarget(str, Enum):
    M9_SLOPE = "m9"
    M7_OFFSET = "m7"


@dataclass(frozen=True)
class CalibrationConfig:
    target: TrimTarget
    unit_aspect: float
    bits: int = 5
    base_units: int = 1

    def __post_init__(self):
        object.__setattr__(self, "target", TrimTarget(self.target))
        if self.bits < 1:
            raise DomainError("calibration needs at least one bit")
        if not self.unit_aspect > 0:
            raise DomainError("unit_aspect must be positive")
        if self.base_units < 0:
            raise DomainError("base_units must be >= 0")

    @property
    def n_codes(self):
        return 1 << self.bits


@dataclass(frozen=True)
class GenericVx:
    """PTAT voltage with a constant offset: ``v_off + n U_T ln(k_ptat)``."""

    v_off: float
    k_ptat: float
    n: float

    def __post_init__(self):
        if not self.k_ptat >= 1:
            raise DomainError(f"k_ptat must be >= 1, got {self.k_ptat}")
        if not self.v_off >= 0:
            raise DomainError("v_off must be >= 0")


@dataclass(frozen=True)
class FourTVx:
    design: Vref4tDesign


def vbs7(design, tech, T):
    """Body bias of M7 from equating the M8 and M9 subthreshold currents."""
    if design.vbs7_override is not None:
        return design.vbs7_override
    f9 = tech.flavor(design.flavor67_9)
    f8 = tech.flavor(design.flavor8)
    ratio = isq_sub(f9, T, tech.T0) * design.s9 / (isq_sub(f8, T, tech.T0) * design.s8)
    if not ratio > 0:
        raise DomainError("non-positive current ratio in V_BS7")
    vt_term = f8.n / f9.n * f8.vt0_at(T, tech.T0) - f9.vt0_at(T, tech.T0)
    return vt_term + f8.n * thermal_voltage(T) * math.log(ratio)


def delta_vt7(design, tech, T):
    f = tech.flavor(design.flavor67_9)
    return delta_vt(f.body, vbs7(design, tech, T), T, tech.T0)


def vx_4t(design, tech, T):
    f = tech.flavor(design.flavor67_9)
    nut = f.n * thermal_voltage(T)
    dvt = delta_vt7(design, tech, T)
    return nut * math.log(design.s9 / design.s6 + design.s7 / design.s6 * math.exp(-dvt / nut))


def vx_generic(model, T):
    return model.v_off + model.n * thermal_voltage(T) * math.log(model.k_ptat)


def vx_value(model, tech, T):
    """Dispatch on the V_X model variant."""
    if isinstance(model, GenericVx):
        return vx_generic(model, T)
    if isinstance(model, FourTVx):
        return vx_4t(model.design, tech, T)
    raise TypeError(f"unknown V_X model {model!r}")


def voff(design, tech, T0=T0_DEFAULT):
    """CWT offset of V_X relative to the pure M6/M9 PTAT reference at ``T0``."""
    f = tech.flavor(design.flavor67_9)
    nut = f.n * thermal_voltage(T0)
    dvt = delta_vt7(design, tech, T0)
    return nut * math.log1p(design.s7 / design.s9 * math.exp(-dvt / nut))


def _series_arrays(series):
    T = np.asarray([t for t, _ in series], dtype=float)
    v = np.asarray([v for _, v in series], dtype=float)
    if T.size < 2:
        raise InputError("need at least two samples")
    if np.any(np.diff(T) <= 0):
        raise InputError("temperatures must be strictly increasing")
    return T, v


def ptat_slope(series):
    """End-point slope ``(V(Tmax) - V(Tmin)) / (Tmax - Tmin)`` in V/K."""
    T, v = _series_arrays(series)
    return float((v[-1] - v[0]) / (T[-1] - T[0]))


def taylor_params(series):
    """Least-squares line ``V ~ v_x0 + delta_vx * T``; returns ``(v_x0, delta_vx)``."""
    T, v = _series_arrays(series)
    A = np.column_stack([np.ones_like(T), T])
    (v0, slope), *_ = np.linalg.lstsq(A, v, rcond=None)
    return float(v0), float(slope)


def apply_calibration(design, cal, code):
    if not (isinstance(code, (int, np.integer)) and 0 <= code < cal.n_codes):
        raise InputError(f"calibration code {code!r} outside [0, {cal.n_codes - 1}]")
    aspect = (cal.base_units + int(code)) * cal.unit_aspect
    if cal.target is TrimTarget.M9_SLOPE:
        if not aspect > 0:
            raise InputError("trimmed S9 must be positive; raise base_units")
        return replace(design, s9=aspect)
    return replace(design, s7=aspect)


def size_s9_over_s8_for_cwt(design, tech, Tlo, Thi, n_points=26, lo=0.1, hi=100.0):
    """S9/S8 making V_BS7 constant with temperature over ``[Tlo, Thi]``.

    The objective is the box spread ``max - min`` of V_BS7 over the grid. It
    shares its minimiser with the box TC whenever V_BS7 keeps a non-zero
    mean, and stays defined when it does not.
    """
    if not Thi > Tlo:
        raise DomainError("need Thi > Tlo")
    if design.flavor8 is None:
        raise DomainError("CWT sizing of S9/S8 needs a flavor for M8")
    Ts = np.linspace(Tlo, Thi, n_points)
    base = replace(design, vbs7_override=None)

    def spread(log_ratio):
        d = replace(base, s8=base.s9 / math.exp(log_ratio))
        v = [vbs7(d, tech, T) for T in Ts]
        return max(v) - min(v)

    a, b = math.log(lo), math.log(hi)
    x, _ = golden_section(spread, a, b, xtol=1e-10)
    if x - a < 1e-6 or b - x < 1e-6:
        raise ConvergenceError(f"CWT S9/S8 optimum pinned at the search boundary ({math.exp(x):.4g})")
    return math.exp(x)


def backsolve_delta_vt7(voff_target, s7_over_s9, n, T0=T0_DEFAULT):
    """Threshold shift of M7 that yields ``voff_target`` for a given S7/S9."""
    if not (voff_target > 0 and s7_over_s9 > 0):
        raise DomainError("need voff_target > 0 and s7_over_s9 > 0")
    nut = n * thermal_voltage(T0)
    return -nut * math.log(math.expm1(voff_target / nut) / s7_over_s9)
