"""Self-cascode MOSFET (SCM): bias voltage, inversion levels, sizing ratio, sensitivity.

Naming follows the usual SCM convention: M1 is the grounded-source device at
inversion level ``i_f1 = alpha * i_f2``; M2 sits on top with its source at the
intermediate node V_X and its body at ground.
"""

import math
from dataclasses import dataclass

from .devmodel import T0_DEFAULT, acm_f, thermal_voltage
from .errors import DomainError
from .rootfind import newton_bisect


@dataclass(frozen=True)
class ScmDesign:
    alpha: float
    N: float
    S2: float
    flavor: str
    isq_ratio: float = 1.0  # I_SQ2 / I_SQ1

    def __post_init__(self):
        if not self.alpha > 1:
            raise DomainError(f"alpha must exceed 1, got {self.alpha}")
        if not self.N >= 1:
            raise DomainError(f"mirror ratio N must be >= 1, got {self.N}")
        if not (self.S2 > 0 and self.isq_ratio > 0):
            raise DomainError("S2 and isq_ratio must be positive")


@dataclass(frozen=True)
class ScmBiasSolution:
    i_f2: float
    i_f1: float
    v_x: float
    i_ref: float
    s_iref: float


def _check(i_f2, alpha):
    if not i_f2 > 0:
        raise DomainError(f"i_f2 must be positive, got {i_f2}")
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1, got {alpha}")


def _vx_normalized(i, alpha):
    s1 = math.sqrt(1.0 + alpha * i)
    s2 = math.sqrt(1.0 + i)
    # sqrt(1+a i) - sqrt(1+i) and the log ratio, both free of cancellation as i -> 0
    diff = (alpha - 1.0) * i / (s1 + s2)
    return diff + math.log(alpha) + math.log((s2 + 1.0) / (s1 + 1.0))


def scm_vx(i_f2, alpha, T):
    """Voltage at the SCM intermediate node for a given M2 inversion level."""
    _check(i_f2, alpha)
    return thermal_voltage(T) * _vx_normalized(i_f2, alpha)


def scm_vx_infimum(alpha, T):
    """Limit of :func:`scm_vx` as ``i_f2 -> 0``: ``U_T ln(alpha)``."""
    return thermal_voltage(T) * math.log(alpha)


def scm_solve_if2(v_x, alpha, T):
    """M2 inversion level producing ``v_x``; needs ``v_x > U_T ln(alpha)``."""
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1, got {alpha}")
    ut = thermal_voltage(T)
    target = v_x / ut
    if not (v_x > ut * math.log(alpha) and target > math.log(alpha)):
        raise DomainError(
            f"V_X = {v_x:.6g} V does not exceed U_T ln(alpha) = {ut * math.log(alpha):.6g} V "
            f"at T = {T:.2f} K: no SCM bias solution"
        )

    def g(x):
        return _vx_normalized(math.exp(x), alpha) - target

    def dg(x):
        i = math.exp(x)
        return 0.5 * (alpha - 1.0) * i / (math.sqrt(1.0 + alpha * i) + math.sqrt(1.0 + i))

    return math.exp(newton_bisect(g, dg, math.log(1e-12), math.log(1e7)))


def scm_s1_over_s2(alpha, N, isq_ratio=1.0):
    """Aspect-ratio ratio S1/S2 that satisfies KCL at node V_X."""
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1, got {alpha}")
    if not N >= 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return isq_ratio * (1.0 + N) / N / (alpha - 1.0)


def reference_current(isq2, i_f2, S2, N):
    return isq2 * i_f2 * S2 / N


def sensitivity_siref(i_f2, alpha, T):
    """Relative sensitivity of I_REF to V_X, ``d ln(I_REF) / d V_X`` (1/V)."""
    _check(i_f2, alpha)
    s1 = math.sqrt(1.0 + alpha * i_f2)
    s2 = math.sqrt(1.0 + i_f2)
    # alpha/(s1-1) - 1/(s2-1), rewritten with (s-1) = i/(s+1)
    bracket = (alpha - 1.0) / (s1 + s2)
    if not bracket > 0:
        raise DomainError("sensitivity is singular for alpha == 1")
    return 2.0 / (i_f2 * thermal_voltage(T)) / bracket


def scm_gate_voltage(i_f, flavor, T, T0=T0_DEFAULT):
    """Gate voltage giving inversion level ``i_f`` in a grounded-source device."""
    return flavor.vt0_at(T, T0) + flavor.n * acm_f(i_f, T)
