"""Device-level equations: thermal voltage, ACM and subthreshold currents, body effect.

All voltages in volts, temperatures in kelvin, currents in amperes.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import DomainError
from .rootfind import newton_bisect

K_BOLTZMANN = 1.380649e-23  # J/K
Q_ELECTRON = 1.602176634e-19  # C
T0_DEFAULT = 298.15  # 25 degC


def celsius_to_kelvin(t_c):
    return t_c + 273.15


def kelvin_to_celsius(t_k):
    return t_k - 273.15


class BodyKind(str, Enum):
    BULK = "bulk"
    FDSOI = "fdsoi"


@dataclass(frozen=True)
class BodyModel:
    kind: BodyKind
    gamma_b: float = 0.0  # sqrt(V), bulk only
    phi_fp: float = 0.0  # Fermi potential at T0 (V); the law uses 2*phi_fp
    phi_fp_tslope: float = 0.0  # V/K, bulk only
    gamma_b_star: float = 0.0  # FD-SOI only

    def __post_init__(self):
        object.__setattr__(self, "kind", BodyKind(self.kind))
        if self.kind is BodyKind.BULK:
            if not (self.gamma_b > 0 and self.phi_fp > 0):
                raise DomainError("bulk body model needs gamma_b > 0 and phi_fp > 0")
        elif not 0 < self.gamma_b_star < 1:
            raise DomainError("FD-SOI body model needs 0 < gamma_b_star < 1")


@dataclass(frozen=True)
class FlavorParams:
    """Fitted parameters for one transistor type (e.g. SLVT, LVT, HVT)."""

    n: float
    m: float
    isq0_acm: float
    isq0_sub: float
    vt0: float
    body: BodyModel
    vt0_tslope: float = 0.0

    def __post_init__(self):
        if not self.n > 1:
            raise DomainError(f"subthreshold slope factor must exceed 1, got {self.n}")
        if not 1.0 <= self.m <= 2.5:
            raise DomainError(f"mobility exponent m={self.m} outside [1.0, 2.5]")
        if not (self.isq0_acm > 0 and self.isq0_sub > 0):
            raise DomainError("specific sheet currents must be positive")

    def vt0_at(self, T, T0):
        return self.vt0 + self.vt0_tslope * (T - T0)


@dataclass(frozen=True)
class TechnologyParams:
    name: str
    T0: float = T0_DEFAULT
    flavors: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.T0 > 0:
            raise DomainError("T0 must be positive")
        if not self.flavors:
            raise DomainError(f"technology {self.name!r} defines no flavors")

    def flavor(self, label):
        try:
            return self.flavors[label]
        except KeyError:
            raise DomainError(
                f"unknown flavor {label!r} (known: {', '.join(sorted(self.flavors))})"
            ) from None

    def with_flavor(self, label, flavor):
        flavors = dict(self.flavors)
        flavors[label] = flavor
        return replace(self, flavors=flavors)


@dataclass(frozen=True)
class OperatingPoint:
    i_f: float
    i_r: float = 0.0
    S: float = 1.0

    def __post_init__(self):
        if not (self.i_f > 0 and self.i_r >= 0 and self.S > 0):
            raise DomainError(f"invalid operating point {self}")


def thermal_voltage(T):
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T} K")
    return K_BOLTZMANN * T / Q_ELECTRON


def _power_law(isq0, m, T, T0):
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T} K")
    return isq0 * (T / T0) ** (2.0 - m)


def isq_acm(flavor, T, T0=T0_DEFAULT):
    """ACM specific sheet current, proportional to T**(2 - m)."""
    return _power_law(flavor.isq0_acm, flavor.m, T, T0)


def isq_sub(flavor, T, T0=T0_DEFAULT):
    """Subthreshold specific sheet current, same power law as :func:`isq_acm`."""
    return _power_law(flavor.isq0_sub, flavor.m, T, T0)


def _sqrt1p_minus1(i):
    # sqrt(1 + i) - 1 without cancellation for small i
    return i / (math.sqrt(1.0 + i) + 1.0)


def _acm_f_normalized(i_f):
    # sqrt(1+i) - 2 + ln(sqrt(1+i) - 1), in units of U_T
    s = math.sqrt(1.0 + i_f)
    return s - 2.0 + math.log(i_f) - math.log(s + 1.0)


def acm_f(i_f, T):
    """Pinch-off-to-source voltage ``V_P - V_S`` producing inversion level ``i_f``."""
    if not i_f > 0:
        raise DomainError(f"inversion level must be positive, got {i_f}")
    return thermal_voltage(T) * _acm_f_normalized(i_f)


def acm_f_inverse(v, T):
    """Inversion level ``i_f`` such that ``acm_f(i_f, T) == v``.

    Solved in ``ln(i_f)``, where the function is smooth and its derivative
    ``(sqrt(1 + i_f) + 1) / 2`` never drops below 1.
    """
    if not math.isfinite(v):
        raise DomainError(f"voltage must be finite, got {v}")
    target = v / thermal_voltage(T)

    def g(x):
        return _acm_f_normalized(math.exp(x)) - target

    def dg(x):
        return 0.5 * (math.sqrt(1.0 + math.exp(x)) + 1.0)

    return math.exp(newton_bisect(g, dg, math.log(1e-12), math.log(1e7)))


def acm_drain_current(op, isq):
    return isq * op.S * (op.i_f - op.i_r)


def subthreshold_current(flavor, S, V_GS, V_T, T, T0=T0_DEFAULT):
    """Deep-subthreshold drain current; valid for V_DS > 4 U_T."""
    return isq_sub(flavor, T, T0) * S * math.exp((V_GS - V_T) / (flavor.n * thermal_voltage(T)))


def delta_vt(body, V_BS, T, T0=T0_DEFAULT):
    """Threshold shift ``V_T - V_T0`` caused by a body-to-source bias."""
    if body.kind is BodyKind.FDSOI:
        return -body.gamma_b_star * V_BS
    two_phi = 2.0 * (body.phi_fp + body.phi_fp_tslope * (T - T0))
    if not (two_phi > 0 and two_phi - V_BS > 0):
        raise DomainError(
            f"bulk body effect undefined for V_BS={V_BS} V with 2*phi_fp={two_phi} V"
        )
    return body.gamma_b * (math.sqrt(two_phi - V_BS) - math.sqrt(two_phi))


def gamma_from_n(n):
    """Linearised body factor estimated from the subthreshold slope factor."""
    if not n > 1:
        raise DomainError(f"n must exceed 1, got {n}")
    return n - 1.0
