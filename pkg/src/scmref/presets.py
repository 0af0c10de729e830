"""Technology parameter sets used by the examples, tests and bundled configs.

Only n, m and the FD-SOI body factor of the generic set come from published
figures. Threshold voltages, sheet currents and temperature slopes are
plausible placeholders chosen so the anchored operating points come out:
V_BS7 of about 188 mV made CWT by S9/S8 = 4.38, V_off = 17.3 mV at
S7/S6 = 2, S9/S6 = 8, and I_REF of about 2.5 nA.
"""

import math

from .devmodel import K_BOLTZMANN, Q_ELECTRON, T0_DEFAULT, BodyModel, FlavorParams, TechnologyParams
from .vref4t import backsolve_delta_vt7

VBS7_22NM = 0.188
S9_OVER_S8_22NM = 4.38
VOFF_22NM = 0.0173


def generic_fdsoi(n=1.2, m=1.5, gamma_b_star=0.15, isq0=100e-9, vt0=0.3):
    """Single-flavor technology with generic parameters (label ``"gen"``)."""
    body = BodyModel("fdsoi", gamma_b_star=gamma_b_star)
    flavor = FlavorParams(n=n, m=m, isq0_acm=isq0, isq0_sub=isq0, vt0=vt0, body=body)
    return TechnologyParams("generic-fdsoi", T0_DEFAULT, {"gen": flavor})


def fdsoi_22nm_style():
    """FD-SOI set with SLVT (M1, M2, M5-M7, M9), LVT (M8) and a pMOS mirror flavor."""
    n, m = 1.21, 1.63
    dvt7 = backsolve_delta_vt7(VOFF_22NM, 2.0 / 8.0, n)
    gamma = -dvt7 / VBS7_22NM
    vt_slvt, slope_slvt = 0.30, -0.6e-3
    # LVT-SLVT threshold gap cancels the PTAT log term of V_BS7 at S9/S8 = 4.38
    log_term = n * K_BOLTZMANN / Q_ELECTRON * math.log(S9_OVER_S8_22NM)
    gap0 = VBS7_22NM - log_term * T0_DEFAULT
    slvt = FlavorParams(
        n=n, m=m, isq0_acm=178e-9, isq0_sub=16e-9, vt0=vt_slvt, vt0_tslope=slope_slvt,
        body=BodyModel("fdsoi", gamma_b_star=gamma),
    )
    lvt = FlavorParams(
        n=n, m=m, isq0_acm=178e-9, isq0_sub=16e-9, vt0=vt_slvt + gap0,
        vt0_tslope=slope_slvt - log_term,
        body=BodyModel("fdsoi", gamma_b_star=gamma),
    )
    plvt = FlavorParams(
        n=1.25, m=1.6, isq0_acm=60e-9, isq0_sub=6e-9, vt0=0.35, vt0_tslope=-0.7e-3,
        body=BodyModel("fdsoi", gamma_b_star=0.25),
    )
    return TechnologyParams("22nm-fdsoi-style", T0_DEFAULT, {"slvt": slvt, "lvt": lvt, "plvt": plvt})
