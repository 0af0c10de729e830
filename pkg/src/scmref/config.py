"""INI run configuration: ``[technology] [design] [sweep] [output]``.

Keys are case-sensitive and ``#`` starts a comment. Temperatures are given in
degC and converted to kelvin here. Grids are ``lo:hi:step`` (inclusive),
comma lists, or single values.
"""

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace

from . import presets
from .devmodel import BodyModel, FlavorParams, TechnologyParams, celsius_to_kelvin
from .errors import ConfigError, DomainError, InputError
from .refsim import Corner, CurrentReferenceDesign, FlavorDelta
from .scm import ScmDesign
from .vref4t import CalibrationConfig, FourTVx, GenericVx, Vref4tDesign, size_s9_over_s8_for_cwt

SECTIONS = ("technology", "design", "sweep", "output")
FLAVOR_FIELDS = ("n", "m", "isq0_acm", "isq0_sub", "vt0", "vt0_tslope",
                 "body", "gamma_b", "phi_fp", "phi_fp_tslope", "gamma_b_star")
BODY_FIELDS = ("gamma_b", "phi_fp", "phi_fp_tslope", "gamma_b_star")
CORNER_FIELDS = tuple(f.name for f in fields(FlavorDelta))
DESIGN_KEYS = {
    "vx_model", "v_off", "k_ptat", "n",
    "s6", "s7", "s8", "s9", "s9_over_s8", "vbs7", "flavor67_9", "flavor8",
    "alpha", "N", "S2", "scm_flavor", "isq_ratio",
    "cal.target", "cal.unit_aspect", "cal.bits", "cal.base_units", "cal.code",
    "vsg4", "vgs5", "vgs8",
    "i_ref", "if_mirror", "if_buffer", "mirror_flavor", "buffer_flavor", "alpha_sim",
}
SWEEP_KEYS = {"T_C", "param1", "values1", "param2", "values2", "metrics", "alpha", "s9", "corner"}
OUTPUT_KEYS = {"precision"}
PRESETS = {"generic": presets.generic_fdsoi, "22nm": presets.fdsoi_22nm_style}
PRESET_ARGS = {"generic": ("n", "m", "gamma_b_star", "isq0", "vt0")}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


def parse_grid(text, what="grid"):
    """``lo:hi:step`` (inclusive), ``a, b, c`` or a single number."""
    text = text.strip()
    if not text:
        raise InputError(f"{what} is empty")
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise InputError(f"{what} {text!r}: expected lo:hi:step")
            lo, hi, step = parts
            if not step > 0 or hi < lo:
                raise InputError(f"{what} {text!r}: need step > 0 and hi >= lo")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [round(lo + k * step, 12) for k in range(count)]
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise InputError(f"{what} {text!r} is not numeric") from None
    if not values:
        raise InputError(f"{what} is empty")
    return values


def _line_map(text):
    where = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), lineno)
    return where


@dataclass
class RunConfig:
    tech: TechnologyParams
    design: CurrentReferenceDesign | None
    corners: dict
    temps_c: list
    sweep: dict = field(default_factory=dict)
    sizing: dict = field(default_factory=dict)
    s9_over_s8: float | None = None
    precision: int = 9

    @property
    def Ts(self):
        return [celsius_to_kelvin(t) for t in self.temps_c]


class _Reader:
    def __init__(self, parser, lines):
        self.p = parser
        self.lines = lines

    def where(self, section, key):
        n = self.lines.get((section, key))
        return f"line {n}: [{section}] {key}" if n else f"[{section}] {key}"

    def fail(self, section, key, msg):
        raise ConfigError(f"{self.where(section, key)}: {msg}")

    def has(self, section, key):
        return self.p.has_option(section, key)

    def raw(self, section, key, default=None):
        if not self.has(section, key):
            return default
        return self.p.get(section, key).strip()

    def num(self, section, key, default=None, required=False):
        text = self.raw(section, key)
        if text is None or text == "":
            if required:
                raise ConfigError(f"[{section}] missing required key {key!r}")
            return default
        try:
            x = float(text)
        except ValueError:
            self.fail(section, key, f"{text!r} is not a number")
        if not math.isfinite(x):
            self.fail(section, key, "must be finite")
        return x

    def integer(self, section, key, default=None):
        x = self.num(section, key)
        if x is None:
            return default
        if x != int(x):
            self.fail(section, key, "must be an integer")
        return int(x)

    def grid(self, section, key, default=None):
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            return parse_grid(text, key)
        except InputError as exc:
            self.fail(section, key, str(exc))


def _check_keys(r, section, allowed, patterns=()):
    if not r.p.has_section(section):
        return
    for key in r.p.options(section):
        if key in allowed or any(p.fullmatch(key) for p in patterns):
            continue
        r.fail(section, key, "unknown key")


def _technology(r):
    s = "technology"
    flavor_re = re.compile(r"[\w*-]+\.(%s)" % "|".join(FLAVOR_FIELDS))
    corner_re = re.compile(r"corner\.[\w-]+\.[\w*-]+\.(%s)" % "|".join(CORNER_FIELDS))
    preset_re = re.compile(r"preset\.(n|m|gamma_b_star|isq0|vt0)")
    _check_keys(r, s, {"preset", "name", "T0_C"}, (corner_re, preset_re, flavor_re))

    name = r.raw(s, "preset", "generic")
    if name not in PRESETS and name != "none":
        r.fail(s, "preset", f"unknown preset {name!r} (known: {', '.join(PRESETS)}, none)")
    kwargs = {}
    for key in r.p.options(s) if r.p.has_section(s) else []:
        m = preset_re.fullmatch(key)
        if m:
            if name not in PRESET_ARGS:
                r.fail(s, key, f"preset {name!r} takes no arguments")
            kwargs[m.group(1)] = r.num(s, key)

    flavors = {}
    if name != "none":
        try:
            base = PRESETS[name](**kwargs)
        except DomainError as exc:
            raise ConfigError(f"[technology] preset {name!r}: {exc}") from None
        flavors.update(base.flavors)

    overrides = {}
    corner_vals = {}
    for key in r.p.options(s) if r.p.has_section(s) else []:
        if corner_re.fullmatch(key):
            _, cname, flabel, fname = key.split(".")
            corner_vals.setdefault(cname, {}).setdefault(flabel, {})[fname] = r.num(s, key)
        elif flavor_re.fullmatch(key) and not preset_re.fullmatch(key):
            label, fname = key.split(".", 1)
            overrides.setdefault(label, {})[fname] = (
                r.raw(s, key) if fname == "body" else r.num(s, key)
            )

    for label, vals in overrides.items():
        key0 = f"{label}.{next(iter(vals))}"
        try:
            flavors[label] = _build_flavor(flavors.get(label), vals)
        except (TypeError, DomainError, ValueError) as exc:
            r.fail(s, key0, f"flavor {label!r}: {exc}")
    T0_C = r.num(s, "T0_C", 25.0)
    try:
        tech = TechnologyParams(r.raw(s, "name", name), celsius_to_kelvin(T0_C), flavors)
    except DomainError as exc:
        raise ConfigError(f"[technology] {exc}") from None

    corners = {"tt": Corner()}
    for cname, per_flavor in corner_vals.items():
        for flabel in per_flavor:
            if flabel != "*" and flabel not in tech.flavors:
                r.fail(s, f"corner.{cname}.{flabel}.{next(iter(per_flavor[flabel]))}",
                       f"unknown flavor {flabel!r}")
        try:
            deltas = {f: FlavorDelta(**v) for f, v in per_flavor.items()}
        except DomainError as exc:
            raise ConfigError(f"[technology] corner {cname!r}: {exc}") from None
        corners[cname] = Corner(cname, deltas)
    return tech, corners


def _build_flavor(base, vals):
    body_vals = {k: vals[k] for k in BODY_FIELDS if k in vals}
    kind = vals.get("body")
    if base is None:
        body = BodyModel(kind or "fdsoi", **body_vals)
        args = {k: vals[k] for k in ("n", "m", "isq0_acm", "isq0_sub", "vt0", "vt0_tslope") if k in vals}
        missing = {"n", "m", "isq0_acm", "isq0_sub", "vt0"} - set(args)
        if missing:
            raise DomainError(f"new flavor needs {', '.join(sorted(missing))}")
        return FlavorParams(body=body, **args)
    body = base.body
    if kind is not None or body_vals:
        body = BodyModel(kind or body.kind, **{**{k: getattr(body, k) for k in BODY_FIELDS}, **body_vals})
    args = {k: vals[k] for k in ("n", "m", "isq0_acm", "isq0_sub", "vt0", "vt0_tslope") if k in vals}
    return replace(base, body=body, **args)


def _flavor_key(r, tech, key, default=None):
    label = r.raw("design", key, default)
    if label is not None and label not in tech.flavors:
        r.fail("design", key, f"unknown flavor {label!r} (known: {', '.join(sorted(tech.flavors))})")
    return label


def _design(r, tech):
    s = "design"
    _check_keys(r, s, DESIGN_KEYS)
    if not r.p.has_section(s):
        return None, None, {}
    first = sorted(tech.flavors)[0]
    scm_flavor = _flavor_key(r, tech, "scm_flavor", first)
    kind = r.raw(s, "vx_model", "generic")
    s9_over_s8 = None
    try:
        if kind == "generic":
            n = r.num(s, "n", tech.flavor(scm_flavor).n)
            model = GenericVx(r.num(s, "v_off", 0.0), r.num(s, "k_ptat", required=True), n)
        elif kind == "fourt":
            f679 = _flavor_key(r, tech, "flavor67_9", first)
            f8 = _flavor_key(r, tech, "flavor8")
            vbs7 = r.num(s, "vbs7")
            s9 = r.num(s, "s9", required=True)
            s8 = r.num(s, "s8")
            ratio_text = r.raw(s, "s9_over_s8")
            if ratio_text == "cwt":
                s9_over_s8 = "cwt"
            elif ratio_text is not None:
                s9_over_s8 = r.num(s, "s9_over_s8")
                s8 = s9 / s9_over_s8
            model = FourTVx(Vref4tDesign(
                r.num(s, "s6", 1.0), r.num(s, "s7", 0.0), 1.0 if s8 is None else s8, s9,
                f679, f8, vbs7,
            ))
        else:
            r.fail(s, "vx_model", f"expected 'generic' or 'fourt', got {kind!r}")
        scm = ScmDesign(r.num(s, "alpha", 1.5), r.num(s, "N", 3.0), r.num(s, "S2", 1.0),
                        scm_flavor, r.num(s, "isq_ratio", 1.0))
        cal = None
        code = r.integer(s, "cal.code")
        if r.has(s, "cal.target"):
            cal = CalibrationConfig(r.raw(s, "cal.target"), r.num(s, "cal.unit_aspect", required=True),
                                    r.integer(s, "cal.bits", 5), r.integer(s, "cal.base_units", 1))
            if code is not None and not 0 <= code < cal.n_codes:
                r.fail(s, "cal.code", f"code {code} outside [0, {cal.n_codes - 1}]")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[design] {exc}") from None
    design = CurrentReferenceDesign(model, scm, tech, cal, code,
                                    r.num(s, "vsg4", 0.0), r.num(s, "vgs5", 0.0), r.num(s, "vgs8", 0.0))
    sizing = {
        "i_ref": r.num(s, "i_ref"),
        "if_mirror": r.num(s, "if_mirror", 1.0),
        "if_buffer": r.num(s, "if_buffer", 0.1),
        "mirror_flavor": _flavor_key(r, tech, "mirror_flavor"),
        "buffer_flavor": _flavor_key(r, tech, "buffer_flavor"),
        "alpha_sim": r.num(s, "alpha_sim"),
    }
    return design, s9_over_s8, sizing


def _sweep(r, corners):
    s = "sweep"
    _check_keys(r, s, SWEEP_KEYS)
    temps = r.grid(s, "T_C", [float(t) for t in range(-40, 86, 5)])
    out = {}
    for i in (1, 2):
        p = r.raw(s, f"param{i}")
        if p is not None:
            out[f"param{i}"] = p
            v = r.grid(s, f"values{i}")
            if v is None:
                raise ConfigError(f"{r.where(s, f'param{i}')}: values{i} missing")
            out[f"values{i}"] = v
    if "param2" in out and "param1" not in out:
        r.fail(s, "param2", "param2 given without param1")
    metrics = r.raw(s, "metrics", "tc")
    out["metrics"] = [m.strip() for m in metrics.split(",") if m.strip()]
    for key in ("alpha", "s9"):
        v = r.grid(s, key)
        if v is not None:
            out[key] = v
    corner = r.raw(s, "corner", "tt")
    if corner not in corners:
        r.fail(s, "corner", f"unknown corner {corner!r} (known: {', '.join(sorted(corners))})")
    out["corner"] = corner
    return temps, out


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#", ";"),
        strict=True, empty_lines_in_values=False,
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        msg = " ".join(str(exc).split())
        raise ConfigError(f"{source}: {msg}") from None
    for sec in parser.sections():
        if sec not in SECTIONS:
            n = next(i for i, line in enumerate(text.splitlines(), start=1)
                     if (m := _SECTION_RE.match(line)) and m.group(1).strip() == sec)
            raise ConfigError(f"{source}: line {n}: unknown section [{sec}] "
                              f"(expected {', '.join(SECTIONS)})")
    r = _Reader(parser, _line_map(text))
    tech, corners = _technology(r)
    design, s9_over_s8, sizing = _design(r, tech)
    temps, sweep = _sweep(r, corners)
    _check_keys(r, "output", OUTPUT_KEYS)
    precision = r.integer("output", "precision", 9)
    if not 1 <= precision <= 17:
        r.fail("output", "precision", "must be within 1..17")
    if s9_over_s8 == "cwt":
        vd = design.vx_model.design
        if vd.flavor8 is None or vd.vbs7_override is not None:
            r.fail("design", "s9_over_s8", "'cwt' needs flavor8 and no vbs7")
        Ts = [celsius_to_kelvin(t) for t in temps]
        s9_over_s8 = size_s9_over_s8_for_cwt(vd, tech, min(Ts), max(Ts))
        design = replace(design, vx_model=FourTVx(replace(vd, s8=vd.s9 / s9_over_s8)))
    return RunConfig(tech, design, corners, temps, sweep, sizing, s9_over_s8, precision)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))
