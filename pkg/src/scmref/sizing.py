"""Four-step sizing flow for the SCM current reference.

1. size the 4T reference (S9/S8 for a CWT V_BS7) and evaluate V_X at T0;
2. scan the (S9/S6, alpha) plane for the analytic TC valley;
3. turn V_X(T0) and alpha into inversion levels and aspect ratios;
4. repeat step 3 at an externally refined alpha.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .devmodel import acm_f, isq_acm, thermal_voltage
from .errors import DomainError
from .refsim import CurrentReferenceDesign, default_grid, tc_box, simulate_iref
from .scm import ScmDesign, scm_gate_voltage, scm_s1_over_s2, scm_solve_if2, sensitivity_siref
from .vref4t import FourTVx, GenericVx, Vref4tDesign, size_s9_over_s8_for_cwt, vx_4t, vx_value

ALPHA_STEP = 0.025


def alpha_grid(lo=1.05, hi=3.0, step=ALPHA_STEP):
    """Alpha values ``lo, lo + step, ..., <= hi``, rounded to kill float drift."""
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 10) for k in range(count)]


@dataclass(frozen=True)
class SizingInputs:
    i_ref_target: float
    N: float
    s7_over_s6: float
    s9_over_s6: float
    tech: object
    scm_flavor: str
    vref_flavor: str
    flavor8: str | None = None
    vbs7_override: float | None = None
    mirror_flavor: str | None = None
    buffer_flavor: str | None = None
    if_mirror: float = 1.0
    if_buffer: float = 0.1
    alpha_range: tuple = (1.05, 3.0)
    alpha_step: float = ALPHA_STEP
    s9_values: tuple = tuple(range(2, 17))
    isq_ratio: float = 1.0

    def __post_init__(self):
        if not self.i_ref_target > 0:
            raise DomainError("i_ref_target must be positive")
        lo, hi = self.alpha_range
        if not (1 < lo <= hi <= 4):
            raise DomainError(f"alpha_range {self.alpha_range} must lie within (1, 4]")
        if not self.s9_values:
            raise DomainError("s9_values is empty")
        if self.vbs7_override is None and self.flavor8 is None:
            raise DomainError("give flavor8 or vbs7_override")

    @property
    def alphas(self):
        return alpha_grid(self.alpha_range[0], self.alpha_range[1], self.alpha_step)


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    margin: float  # V


@dataclass
class SizingReport:
    alpha_opt: float
    tc_analytic: float | None
    s_iref: float
    s1: float
    s2: float
    s3: float | None
    s4: float | None
    s5: float | None
    vx_t0: float
    if1: float
    if2: float
    constraint_checks: list = field(default_factory=list)
    vref: Vref4tDesign | None = None
    final: bool = False

    @property
    def all_passed(self):
        return all(c.passed for c in self.constraint_checks)


@dataclass
class TcMap:
    """Analytic TC (ppm/degC) and S_IREF (1/V, at T0) over (row, alpha); NaN = unsolvable."""

    rows: list
    alphas: list
    tc: np.ndarray
    s_iref: np.ndarray

    def row_argmin(self, row):
        i = self.rows.index(row)
        tcs = self.tc[i]
        if np.all(np.isnan(tcs)):
            raise DomainError(f"no solvable cell in row {row}")
        j = int(np.nanargmin(tcs))
        return self.alphas[j], float(tcs[j])

    def global_argmin(self):
        if np.all(np.isnan(self.tc)):
            raise DomainError("no solvable cell in the map")
        i, j = np.unravel_index(np.nanargmin(self.tc), self.tc.shape)
        return self.rows[i], self.alphas[j], float(self.tc[i, j])

    def cells(self):
        for i, r in enumerate(self.rows):
            for j, a in enumerate(self.alphas):
                yield r, a, self.tc[i, j], self.s_iref[i, j]


def _cell(vx_model, tech, scm_flavor, alpha, Ts):
    d = CurrentReferenceDesign(vx_model, ScmDesign(alpha, 1.0, 1.0, scm_flavor), tech)
    try:
        tc = tc_box(simulate_iref(d, Ts=Ts))
    except DomainError:
        return math.nan, math.nan
    T0 = tech.T0
    i_f2 = scm_solve_if2(vx_value(vx_model, tech, T0), alpha, T0)
    return tc, sensitivity_siref(i_f2, alpha, T0)


def tc_map(models, tech, scm_flavor, alphas, Ts=None):
    """Evaluate TC and S_IREF for each ``(label, vx_model)`` row and each alpha."""
    Ts = default_grid() if Ts is None else list(Ts)
    rows = [label for label, _ in models]
    tc = np.full((len(rows), len(alphas)), np.nan)
    s = np.full_like(tc, np.nan)
    for i, (_, model) in enumerate(models):
        for j, a in enumerate(alphas):
            tc[i, j], s[i, j] = _cell(model, tech, scm_flavor, a, Ts)
    return TcMap(rows, list(alphas), tc, s)


def generic_tc_map(v_off, n, tech, scm_flavor, k_values, alphas, Ts=None):
    """TC map over (K_PTAT, alpha) for a PTAT-plus-offset bias voltage."""
    models = [(k, GenericVx(v_off, k, n)) for k in k_values]
    return tc_map(models, tech, scm_flavor, alphas, Ts)


def _vref_design(inputs, s9_over_s6, s9_over_s8=None):
    if inputs.vbs7_override is not None:
        return Vref4tDesign(1.0, inputs.s7_over_s6, 0.0, s9_over_s6, inputs.vref_flavor,
                            inputs.flavor8, inputs.vbs7_override)
    return Vref4tDesign(1.0, inputs.s7_over_s6, s9_over_s6 / s9_over_s8, s9_over_s6,
                        inputs.vref_flavor, inputs.flavor8)


def cwt_s9_over_s8(inputs, Ts=None):
    """CWT ratio S9/S8 for the inputs' flavors, or None with a fixed V_BS7."""
    if inputs.vbs7_override is not None:
        return None
    Ts = default_grid() if Ts is None else list(Ts)
    probe = Vref4tDesign(1.0, inputs.s7_over_s6, 1.0, inputs.s9_over_s6,
                         inputs.vref_flavor, inputs.flavor8)
    return size_s9_over_s8_for_cwt(probe, inputs.tech, min(Ts), max(Ts))


def step1_vref(inputs, Ts=None):
    """Size the 4T reference (S6 = 1) and return ``(design, V_X at T0)``."""
    ratio = cwt_s9_over_s8(inputs, Ts)
    design = _vref_design(inputs, inputs.s9_over_s6, ratio)
    return design, vx_4t(design, inputs.tech, inputs.tech.T0)


def step2_alpha_guess(inputs, Ts=None):
    """Analytic TC map over (S9/S6, alpha); returns the best alpha on the chosen row."""
    ratio = cwt_s9_over_s8(inputs, Ts)
    rows = list(inputs.s9_values)
    if inputs.s9_over_s6 not in rows:
        rows = sorted(rows + [inputs.s9_over_s6])
    models = [(r, FourTVx(_vref_design(inputs, r, ratio))) for r in rows]
    m = tc_map(models, inputs.tech, inputs.scm_flavor, inputs.alphas, Ts)
    alpha, _ = m.row_argmin(inputs.s9_over_s6)
    return alpha, m


def _check(name, value, T0):
    margin = value - 4.0 * thermal_voltage(T0)
    return ConstraintCheck(name, margin > 0, margin)


def step3_aspect_ratios(inputs, vx_t0, alpha, vref=None, Ts=None):
    """Inversion levels, sensitivity and aspect ratios for a given V_X(T0) and alpha."""
    tech = inputs.tech
    T0 = tech.T0
    if2 = scm_solve_if2(vx_t0, alpha, T0)
    if1 = alpha * if2
    f_scm = tech.flavor(inputs.scm_flavor)
    s2 = inputs.N * inputs.i_ref_target / (isq_acm(f_scm, T0, T0) * if2)
    s1 = s2 * scm_s1_over_s2(alpha, inputs.N, inputs.isq_ratio)
    checks = [ConstraintCheck(
        "S1/S2 KCL ratio",
        math.isclose(s1 / s2, scm_s1_over_s2(alpha, inputs.N, inputs.isq_ratio), rel_tol=1e-9),
        0.0,
    )]

    s3 = s4 = s5 = None
    if inputs.mirror_flavor is not None:
        fp = tech.flavor(inputs.mirror_flavor)
        s4 = inputs.i_ref_target / (isq_acm(fp, T0, T0) * inputs.if_mirror)
        s3 = inputs.N * s4
        vsg4 = scm_gate_voltage(inputs.if_mirror, fp, T0, T0)
        checks.append(_check("V_SG4 > 4U_T", vsg4, T0))
    if inputs.buffer_flavor is not None:
        fb = tech.flavor(inputs.buffer_flavor)
        s5 = inputs.i_ref_target / (isq_acm(fb, T0, T0) * inputs.if_buffer)
        # source of M5 sits at V_X with its body grounded
        v_y = fb.vt0 + fb.n * (vx_t0 + acm_f(inputs.if_buffer, T0))
        checks.append(_check("V_Y = V_X + V_GS5 > 4U_T", v_y, T0))

    tc = None
    if vref is not None:
        d = CurrentReferenceDesign(FourTVx(vref), ScmDesign(alpha, inputs.N, s2, inputs.scm_flavor,
                                                            inputs.isq_ratio), tech)
        try:
            tc = tc_box(simulate_iref(d, Ts=Ts))
        except DomainError:
            tc = None
    return SizingReport(
        alpha_opt=alpha, tc_analytic=tc, s_iref=sensitivity_siref(if2, alpha, T0),
        s1=s1, s2=s2, s3=s3, s4=s4, s5=s5, vx_t0=vx_t0, if1=if1, if2=if2,
        constraint_checks=checks, vref=vref,
    )


def step4_finalize(inputs, alpha_sim, Ts=None):
    """Final sizing at a simulation-refined alpha."""
    vref, vx_t0 = step1_vref(inputs, Ts)
    report = step3_aspect_ratios(inputs, vx_t0, alpha_sim, vref=vref, Ts=Ts)
    return replace(report, final=True)


def run_flow(inputs, alpha_sim=None, Ts=None):
    """Steps 1-4 in sequence. Returns ``(step3 report, final report, tc map)``."""
    vref, vx_t0 = step1_vref(inputs, Ts)
    alpha_guess, m = step2_alpha_guess(inputs, Ts)
    initial = step3_aspect_ratios(inputs, vx_t0, alpha_guess, vref=vref, Ts=Ts)
    final = step4_finalize(inputs, alpha_guess if alpha_sim is None else alpha_sim, Ts)
    return initial, final, m


def tc_vs_s2_over_s1(inputs, Ts=None, tcmap=None):
    """``(alpha, S2/S1, TC)`` along the chosen S9/S6 row; TC is None when unsolvable."""
    if tcmap is None:
        _, tcmap = step2_alpha_guess(replace(inputs, s9_values=(inputs.s9_over_s6,)), Ts)
    i = tcmap.rows.index(inputs.s9_over_s6)
    out = []
    for j, a in enumerate(tcmap.alphas):
        tc = tcmap.tc[i, j]
        out.append((a, 1.0 / scm_s1_over_s2(a, inputs.N, inputs.isq_ratio),
                    None if math.isnan(tc) else float(tc)))
    return out
