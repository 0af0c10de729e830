"""Composite current-reference simulation, box-method metrics and TC calibration."""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .devmodel import celsius_to_kelvin, isq_acm, subthreshold_current, thermal_voltage
from .errors import ConvergenceError, DomainError, InputError
from .scm import ScmDesign, reference_current, scm_gate_voltage, scm_solve_if2
from .vref4t import (
    CalibrationConfig,
    FourTVx,
    GenericVx,
    apply_calibration,
    delta_vt7,
    ptat_slope,
    voff,
    vx_value,
)

log = logging.getLogger(__name__)

DEFAULT_TEMPS_C = tuple(range(-40, 86, 5))


def default_grid():
    """-40..85 degC in 5 degC steps, in kelvin."""
    return [celsius_to_kelvin(t) for t in DEFAULT_TEMPS_C]


@dataclass(frozen=True)
class FlavorDelta:
    vt0_shift: float = 0.0
    isq_scale: float = 1.0
    n_shift: float = 0.0

    def __post_init__(self):
        if not self.isq_scale > 0:
            raise DomainError("isq_scale must be positive")


@dataclass(frozen=True)
class Corner:
    """Synthetic process corner: per-flavor parameter deltas.

    The key ``"*"`` applies to every flavor not listed explicitly.
    """

    name: str = "tt"
    deltas: dict = field(default_factory=dict)

    def delta_for(self, label):
        return self.deltas.get(label, self.deltas.get("*"))

    def apply(self, tech):
        if not self.deltas:
            return tech
        flavors = {}
        for label, f in tech.flavors.items():
            d = self.delta_for(label)
            if d is None:
                flavors[label] = f
                continue
            if not f.n + d.n_shift > 1:
                raise DomainError(f"corner {self.name!r} pushes n of {label!r} to {f.n + d.n_shift}")
            flavors[label] = replace(
                f,
                vt0=f.vt0 + d.vt0_shift,
                n=f.n + d.n_shift,
                isq0_acm=f.isq0_acm * d.isq_scale,
                isq0_sub=f.isq0_sub * d.isq_scale,
            )
        return replace(tech, flavors=flavors)


NOMINAL = Corner()


@dataclass(frozen=True)
class CurrentReferenceDesign:
    vx_model: object  # GenericVx or FourTVx
    scm: ScmDesign
    tech: object  # TechnologyParams
    cal: CalibrationConfig | None = None
    cal_code: int | None = None
    vsg4: float = 0.0
    vgs5: float = 0.0
    vgs8: float = 0.0

    def with_code(self, code):
        if self.cal is None or not isinstance(self.vx_model, FourTVx):
            raise DomainError("design has no calibration structure")
        return replace(self, cal_code=code)

    def effective_vx_model(self):
        if self.cal is not None and self.cal_code is not None and isinstance(self.vx_model, FourTVx):
            return FourTVx(apply_calibration(self.vx_model.design, self.cal, self.cal_code))
        return self.vx_model


@dataclass(frozen=True)
class SimPoint:
    T: float
    v_x: float
    i_f2: float
    i_ref: float


class TempSeries(list):
    """List of ``(T, value)`` pairs with strictly increasing T (kelvin)."""

    def __init__(self, samples=()):
        super().__init__((float(t), float(v)) for t, v in samples)
        for (t1, _), (t2, _) in zip(self, self[1:]):
            if not t2 > t1:
                raise InputError("temperatures must be strictly increasing")

    @property
    def temperatures(self):
        return np.array([t for t, _ in self])

    @property
    def values(self):
        return np.array([v for _, v in self])


class UnsolvableError(DomainError):
    def __init__(self, T, reason):
        super().__init__(f"no bias solution at T = {T:.2f} K ({T - 273.15:.2f} degC): {reason}")
        self.T = T


def _corner_generic(model, corner, flavor_label):
    d = corner.delta_for(flavor_label)
    if d is None or d.n_shift == 0.0:
        return model
    return replace(model, n=model.n + d.n_shift)


def simulate_points(design, corner=NOMINAL, Ts=None):
    """Per-temperature bias solutions of the composite reference."""
    Ts = default_grid() if Ts is None else list(Ts)
    if not Ts:
        raise InputError("empty temperature grid")
    tech = corner.apply(design.tech)
    model = design.effective_vx_model()
    if isinstance(model, GenericVx):
        model = _corner_generic(model, corner, design.scm.flavor)
    f_scm = tech.flavor(design.scm.flavor)
    out = []
    for T in Ts:
        v_x = vx_value(model, tech, T)
        try:
            i_f2 = scm_solve_if2(v_x, design.scm.alpha, T)
        except DomainError as exc:
            raise UnsolvableError(T, str(exc)) from exc
        except ConvergenceError as exc:
            raise ConvergenceError(f"at T = {T:.2f} K ({T - 273.15:.2f} degC): {exc}") from exc
        i_ref = reference_current(isq_acm(f_scm, T, tech.T0), i_f2, design.scm.S2, design.scm.N)
        out.append(SimPoint(T, v_x, i_f2, i_ref))
    return out


def simulate_iref(design, corner=NOMINAL, Ts=None):
    return TempSeries((p.T, p.i_ref) for p in simulate_points(design, corner, Ts))


def _box(values, span, scale):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise InputError("box metrics need at least two samples")
    mean = values.mean()
    if mean == 0.0:
        raise DomainError("box metric undefined for zero mean")
    if not span > 0:
        raise InputError("sweep range must be positive")
    return float((values.max() - values.min()) / (abs(mean) * span) * scale)


def tc_box(series):
    """Box-method temperature coefficient in ppm/degC."""
    series = TempSeries(series)
    T = series.temperatures
    if T.size < 2:
        raise InputError("box metrics need at least two samples")
    return _box(series.values, T[-1] - T[0], 1e6)


def ls_box(series):
    """Box-method line sensitivity in %/V from ``(V_DD, I_REF)`` pairs."""
    vdd = np.array([v for v, _ in series], dtype=float)
    cur = np.array([i for _, i in series], dtype=float)
    if vdd.size < 2:
        raise InputError("box metrics need at least two samples")
    if np.any(np.diff(vdd) <= 0):
        raise InputError("supply voltages must be strictly increasing")
    return _box(cur, vdd[-1] - vdd[0], 100.0)


def _solve_at(design, T, corner=NOMINAL):
    (p,) = simulate_points(design, corner, [T])
    return p


def vdd_min(design, T, corner=NOMINAL):
    """Minimum supply voltage and the name of the limiting branch.

    The SCM gate voltage is set by M1, the grounded-source device, which runs
    at ``i_f1 = alpha * i_f2``.
    """
    p = _solve_at(design, T, corner)
    tech = corner.apply(design.tech)
    v_g = scm_gate_voltage(design.scm.alpha * p.i_f2, tech.flavor(design.scm.flavor), T, tech.T0)
    branches = {
        "V_G": v_g,
        "V_X+V_SG4": p.v_x + design.vsg4,
        "V_X+V_GS5+V_GS8": p.v_x + design.vgs5 + design.vgs8,
    }
    limiting = max(branches, key=branches.get)
    return 4.0 * thermal_voltage(T) + branches[limiting], limiting


def vref_branch_current(design, T, corner=NOMINAL):
    """Estimate of the 4T reference current I_DS7 + I_DS9 (zero-V_GS devices)."""
    model = design.effective_vx_model()
    if not isinstance(model, FourTVx):
        raise DomainError("4T branch current needs a FourT V_X model")
    tech = corner.apply(design.tech)
    d = model.design
    f = tech.flavor(d.flavor67_9)
    vt = f.vt0_at(T, tech.T0)
    i9 = subthreshold_current(f, d.s9, 0.0, vt, T, tech.T0)
    i7 = subthreshold_current(f, d.s7, 0.0, vt + delta_vt7(d, tech, T), T, tech.T0) if d.s7 > 0 else 0.0
    return i7 + i9


def supply_current(design, T, i_vref=None, corner=NOMINAL):
    """``(N + 1) I_REF + i_vref``; ``i_vref`` defaults to the 4T branch estimate."""
    p = _solve_at(design, T, corner)
    if i_vref is None:
        i_vref = vref_branch_current(design, T, corner)
    return (design.scm.N + 1.0) * p.i_ref + i_vref


@dataclass(frozen=True)
class CodeResult:
    code: int
    tc: float | None  # None when some temperature has no solution
    voff: float | None
    slope: float | None
    note: str = ""


@dataclass(frozen=True)
class CalibrationResult:
    best_code: int
    best_tc: float
    per_code: list


def evaluate_code(design, code, corner=NOMINAL, Ts=None):
    d = design.with_code(code)
    tech = corner.apply(design.tech)
    vdesign = d.effective_vx_model().design
    try:
        pts = simulate_points(d, corner, Ts)
    except DomainError as exc:
        return CodeResult(code, None, None, None, note=str(exc))
    tc = tc_box((p.T, p.i_ref) for p in pts)
    slope = ptat_slope([(p.T, p.v_x) for p in pts])
    return CodeResult(code, tc, voff(vdesign, tech, tech.T0), slope)


def calibrate_tc(design, corner=NOMINAL, Ts=None):
    """Exhaustive search of the trim code minimising the box TC of I_REF."""
    if design.cal is None or not isinstance(design.vx_model, FourTVx):
        raise DomainError("calibration needs a calibration config and a FourT V_X model")
    per_code = []
    best = None
    for code in range(design.cal.n_codes):
        r = evaluate_code(design, code, corner, Ts)
        per_code.append(r)
        if r.tc is None:
            log.info("code %d skipped: %s", code, r.note)
            continue
        if best is None or r.tc < best.tc:
            best = r
    if best is None:
        raise DomainError(f"no calibration code is solvable in corner {corner.name!r}")
    return CalibrationResult(best.code, best.tc, per_code)


def tc_of(design, corner=NOMINAL, Ts=None):
    return tc_box(simulate_iref(design, corner, Ts))


def normalized_iref(series, T_ref=celsius_to_kelvin(25.0)):
    """Series divided by its value at ``T_ref`` (must be on the grid)."""
    for T, v in series:
        if math.isclose(T, T_ref, abs_tol=1e-9):
            return [(t, x / v) for t, x in series]
    raise InputError(f"reference temperature {T_ref} K not on the grid")
