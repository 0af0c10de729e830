"""Command-line front end.

Exit codes: 0 success, 1 domain or constraint failure, 2 convergence failure,
3 configuration or schema error.
"""

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import load_config, parse_config, parse_grid
from .devmodel import acm_f, celsius_to_kelvin, delta_vt, isq_acm, isq_sub
from .errors import ConfigError, ConvergenceError, DomainError, InputError, ScmrefError
from .fom import bundled_table, fom, fom2, load_records, rank
from .refsim import calibrate_tc, ls_box, simulate_points, tc_box
from .scm import scm_solve_if2, sensitivity_siref
from .sizing import SizingInputs, step1_vref, step2_alpha_guess, step3_aspect_ratios
from .vref4t import FourTVx, GenericVx, ptat_slope, voff, vx_value

log = logging.getLogger("scmref")

EXIT_OK, EXIT_DOMAIN, EXIT_CONVERGENCE, EXIT_CONFIG = 0, 1, 2, 3
SWEEP_PARAMS = ("alpha", "k_ptat", "v_off", "n", "s7", "s9")
SWEEP_METRICS = ("tc", "s_iref", "voff", "ptat_slope")


class Emitter:
    """Collects CSV rows and comment lines; floats use ``precision`` significant digits."""

    def __init__(self, precision=9):
        self.precision = precision
        self.buf = io.StringIO()
        self.writer = csv.writer(self.buf, lineterminator="\n")

    def fmt(self, x):
        if x is None:
            return ""
        if isinstance(x, float):
            return format(x + 0.0, f".{self.precision}g")  # no "-0"
        return str(x)

    def row(self, *cells):
        self.writer.writerow([self.fmt(c) for c in cells])

    def comment(self, text):
        self.buf.write(f"# {text}\n")

    def text(self):
        return self.buf.getvalue()


def _emit(args, name, em):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            fh.write(em.text())
        if not args.quiet:
            print(f"wrote {path}", file=sys.stderr)
    else:
        sys.stdout.write(em.text())


def _config(args, need_design=True):
    if args.config is None:
        if need_design:
            raise ConfigError("this command needs --config")
        return parse_config("")
    cfg = load_config(args.config)
    if need_design and cfg.design is None:
        raise ConfigError(f"{args.config}: missing [design] section")
    return cfg


def _grid_arg(text, what):
    try:
        return parse_grid(text, what)
    except InputError as exc:
        raise ConfigError(str(exc)) from None


def cmd_model(args):
    cfg = _config(args, need_design=False)
    tech = cfg.tech
    label = args.flavor or sorted(tech.flavors)[0]
    f = tech.flavor(label)
    temps = _grid_arg(args.T, "--T") if args.T else [25.0]
    em = Emitter(cfg.precision)
    if args.op == "acm_f":
        levels = _grid_arg(args.i_f, "--if")
        em.row("i_f", "T_degC", "acm_f_V")
        for t in temps:
            for i in levels:
                em.row(i, t, acm_f(i, celsius_to_kelvin(t)))
    elif args.op == "isq":
        em.row("T_degC", "isq_acm_A", "isq_sub_A")
        for t in temps:
            T = celsius_to_kelvin(t)
            em.row(t, isq_acm(f, T, tech.T0), isq_sub(f, T, tech.T0))
    else:
        vbs = _grid_arg(args.vbs, "--vbs")
        em.row("V_BS_V", "T_degC", "delta_vt_V")
        for t in temps:
            for v in vbs:
                em.row(v, t, delta_vt(f.body, v, celsius_to_kelvin(t), tech.T0))
    _emit(args, f"model_{args.op}", em)
    return EXIT_OK


def _corner(cfg, name):
    try:
        return cfg.corners[name]
    except KeyError:
        raise ConfigError(f"unknown corner {name!r} (known: {', '.join(sorted(cfg.corners))})") from None


def cmd_simulate(args):
    cfg = _config(args)
    if not cfg.temps_c:
        raise ConfigError("empty temperature grid")
    corner = _corner(cfg, args.corner or cfg.sweep.get("corner", "tt"))
    pts = simulate_points(cfg.design, corner, cfg.Ts)
    em = Emitter(cfg.precision)
    em.row("T_degC", "V_X_V", "i_f2", "I_REF_A")
    for t, p in zip(cfg.temps_c, pts):
        em.row(float(t), p.v_x, p.i_f2, p.i_ref)
    if len(pts) > 1:
        em.comment(f"tc_box_ppmC = {em.fmt(tc_box((p.T, p.i_ref) for p in pts))}")
    _emit(args, "simulate", em)
    return EXIT_OK


def _with_param(design, name, value):
    model = design.vx_model
    if name == "alpha":
        return replace(design, scm=replace(design.scm, alpha=value))
    if name in ("k_ptat", "v_off", "n"):
        if not isinstance(model, GenericVx):
            raise ConfigError(f"sweep parameter {name!r} needs vx_model = generic")
        return replace(design, vx_model=replace(model, **{name: value}))
    if not isinstance(model, FourTVx):
        raise ConfigError(f"sweep parameter {name!r} needs vx_model = fourt")
    d = model.design
    if name == "s7":
        return replace(design, vx_model=FourTVx(replace(d, s7=value * d.s6)))
    # keep S9/S8 fixed so a CWT-sized V_BS7 stays CWT
    ratio = d.s9 / d.s8
    return replace(design, vx_model=FourTVx(replace(d, s9=value * d.s6, s8=value * d.s6 / ratio)))


def _metrics(design, metrics, corner, Ts):
    out = {}
    pts = None
    T0 = design.tech.T0
    model = design.vx_model
    for m in metrics:
        if m in ("tc", "ptat_slope"):
            if pts is None:
                pts = simulate_points(design, corner, Ts)
            if m == "tc":
                out[m] = tc_box((p.T, p.i_ref) for p in pts)
            else:
                out[m] = ptat_slope([(p.T, p.v_x) for p in pts]) * 1e3  # mV/degC
        elif m == "s_iref":
            tech = corner.apply(design.tech)
            i_f2 = scm_solve_if2(vx_value(model, tech, T0), design.scm.alpha, T0)
            out[m] = sensitivity_siref(i_f2, design.scm.alpha, T0)
        else:
            if isinstance(model, GenericVx):
                out[m] = model.v_off * 1e3
            else:
                out[m] = voff(model.design, corner.apply(design.tech), T0) * 1e3  # mV
    return out


def cmd_sweep(args):
    cfg = _config(args)
    sw = cfg.sweep
    if "param1" not in sw:
        raise ConfigError("[sweep] needs param1 and values1")
    for key in ("param1", "param2"):
        if key in sw and sw[key] not in SWEEP_PARAMS:
            raise ConfigError(f"[sweep] {key}: unknown parameter {sw[key]!r} "
                              f"(known: {', '.join(SWEEP_PARAMS)})")
    bad = [m for m in sw["metrics"] if m not in SWEEP_METRICS]
    if bad or not sw["metrics"]:
        raise ConfigError(f"[sweep] metrics: unknown {', '.join(bad) or '(none)'} "
                          f"(known: {', '.join(SWEEP_METRICS)})")
    corner = _corner(cfg, sw.get("corner", "tt"))
    v1 = sw["values1"]
    v2 = sw.get("values2", [None])
    em = Emitter(cfg.precision)
    em.row("param1", "param2", "metric", "value")
    cells = skipped = 0
    for a in v1:
        for b in v2:
            try:
                d = _with_param(cfg.design, sw["param1"], a)
                if b is not None:
                    d = _with_param(d, sw["param2"], b)
                vals = _metrics(d, sw["metrics"], corner, cfg.Ts)
            except DomainError as exc:
                log.info("cell (%s, %s) skipped: %s", a, b, exc)
                skipped += 1
                continue
            cells += 1
            for m in sw["metrics"]:
                em.row(a, b, m, vals[m])
    em.comment(f"param1 = {sw['param1']}, param2 = {sw.get('param2', '')}, "
               f"cells = {cells}, skipped = {skipped}")
    _emit(args, "sweep", em)
    return EXIT_OK


def _sizing_inputs(cfg):
    d = cfg.design
    if not isinstance(d.vx_model, FourTVx):
        raise ConfigError("size needs vx_model = fourt")
    if cfg.sizing.get("i_ref") is None:
        raise ConfigError("[design] i_ref is required for size")
    vd = d.vx_model.design
    sw = cfg.sweep
    kwargs = {}
    if "alpha" in sw:
        kwargs["alpha_range"] = (min(sw["alpha"]), max(sw["alpha"]))
        if len(sw["alpha"]) > 1:
            kwargs["alpha_step"] = sw["alpha"][1] - sw["alpha"][0]
    if "s9" in sw:
        kwargs["s9_values"] = tuple(sw["s9"])
    return SizingInputs(
        i_ref_target=cfg.sizing["i_ref"], N=d.scm.N, s7_over_s6=vd.s7 / vd.s6,
        s9_over_s6=vd.s9 / vd.s6, tech=cfg.tech, scm_flavor=d.scm.flavor,
        vref_flavor=vd.flavor67_9, flavor8=vd.flavor8, vbs7_override=vd.vbs7_override,
        mirror_flavor=cfg.sizing.get("mirror_flavor"), buffer_flavor=cfg.sizing.get("buffer_flavor"),
        if_mirror=cfg.sizing["if_mirror"], if_buffer=cfg.sizing["if_buffer"],
        isq_ratio=d.scm.isq_ratio, **kwargs,
    )


def _report_lines(tag, rep):
    lines = [f"[{tag}]"]
    for k in ("alpha_opt", "tc_analytic", "s_iref", "vx_t0", "if1", "if2", "s1", "s2", "s3", "s4", "s5"):
        v = getattr(rep, k)
        lines.append(f"  {k:12s} {'n/a' if v is None else format(v, '.6g')}")
    for c in rep.constraint_checks:
        lines.append(f"  check {c.name}: {'PASS' if c.passed else 'FAIL'} (margin {c.margin:.4g} V)")
    return lines


def cmd_size(args):
    cfg = _config(args)
    try:
        inputs = _sizing_inputs(cfg)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    Ts = cfg.Ts
    try:
        vref, vx_t0 = step1_vref(inputs, Ts)
    except DomainError as exc:
        raise DomainError(f"step 1 (4T reference sizing): {exc}") from None
    try:
        alpha_guess, _ = step2_alpha_guess(inputs, Ts)
    except DomainError as exc:
        raise DomainError(f"step 2 (analytic TC map): {exc}") from None
    reports = []
    alpha_sim = cfg.sizing.get("alpha_sim")
    for tag, alpha in (("step3", alpha_guess), ("final", alpha_guess if alpha_sim is None else alpha_sim)):
        try:
            rep = step3_aspect_ratios(inputs, vx_t0, alpha, vref=vref, Ts=Ts)
        except DomainError as exc:
            raise DomainError(f"step (b) solving i_f2 at alpha = {alpha}: {exc}") from None
        if tag == "final":
            rep = replace(rep, final=True)
        reports.append((tag, rep))

    text = [f"S9/S8 = {vref.s9 / vref.s8:.6g}" if vref.vbs7_override is None else
            f"V_BS7 = {vref.vbs7_override:.6g} V (fixed)", f"alpha_guess = {alpha_guess:.6g}"]
    for tag, rep in reports:
        text += _report_lines(tag, rep)
    em = Emitter(cfg.precision)
    em.row("stage", "quantity", "value")
    for tag, rep in reports:
        for k in ("alpha_opt", "tc_analytic", "s_iref", "vx_t0", "if1", "if2", "s1", "s2", "s3", "s4", "s5"):
            v = getattr(rep, k)
            em.row(tag, k, None if v is None else float(v))
        for c in rep.constraint_checks:
            em.row(tag, f"check:{c.name}", "PASS" if c.passed else "FAIL")
    if not args.quiet:
        print("\n".join(text), file=sys.stderr if not args.out else sys.stdout)
    _emit(args, "size", em)
    failed = [c.name for _, rep in reports for c in rep.constraint_checks if not c.passed]
    if failed:
        print(f"error: constraint failed: {', '.join(dict.fromkeys(failed))}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_calibrate(args):
    cfg = _config(args)
    if cfg.design.cal is None:
        raise ConfigError("[design] cal.target and cal.unit_aspect are required for calibrate")
    corner = _corner(cfg, args.corner or cfg.sweep.get("corner", "tt"))
    res = calibrate_tc(cfg.design, corner, cfg.Ts)
    em = Emitter(cfg.precision)
    em.row("code", "tc_ppmC", "voff_mV", "slope_mV_per_C")
    for r in res.per_code:
        em.row(r.code, r.tc, None if r.voff is None else r.voff * 1e3,
               None if r.slope is None else r.slope * 1e3)
    em.comment(f"corner = {corner.name}, selected_code = {res.best_code}, "
               f"best_tc_ppmC = {em.fmt(res.best_tc)}")
    _emit(args, "calibrate", em)
    return EXIT_OK


def _read_table(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ConfigError(f"{path}: line {lineno}: expected {len(header)} cells")
        try:
            data.append([float(x) for x in r])
        except ValueError:
            raise ConfigError(f"{path}: line {lineno}: non-numeric cell") from None
    return header, data


def _grouped_metric(data, x, by, by_name, fn, label, em, path):
    groups = {}
    for row in data:
        groups.setdefault(None if by is None else row[by], []).append((row[x], row[-1]))
    emitted = 0
    for key, pairs in groups.items():
        pairs.sort()
        cond = "" if key is None else key
        if len(pairs) < 2 and by is not None:
            log.info("%s: %s at %s = %s has one sample, skipped", path, label, by_name, cond)
            continue
        try:
            em.row(path, label, cond, fn(pairs))
        except InputError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        emitted += 1
    if not emitted:
        raise ConfigError(f"{path}: no {label} group has two or more samples")


def cmd_metrics(args):
    em = Emitter(9)
    em.row("file", "metric", "condition", "value")
    for path in args.files:
        header, data = _read_table(path)
        if "I_REF_A" not in header:
            raise ConfigError(f"{path}: missing column I_REF_A")
        has_t, has_v = "T_degC", "VDD_V"
        has_t, has_v = has_t in header, has_v in header
        if not (has_t or has_v):
            raise ConfigError(f"{path}: need a T_degC or VDD_V column")
        it = header.index("T_degC") if has_t else None
        iv = header.index("VDD_V") if has_v else None
        cols = [i for i in (it, iv) if i is not None] + [header.index("I_REF_A")]
        data = [[row[i] for i in cols] for row in data]
        jt = 0 if has_t else None
        jv = (1 if has_t else 0) if has_v else None
        if has_t:
            _grouped_metric(data, jt, jv, "VDD_V", tc_box, "tc_ppmC", em, path)
        if has_v:
            _grouped_metric(data, jv, jt, "T_degC", ls_box, "ls_pctV", em, path)
    _emit(args, "metrics", em)
    return EXIT_OK


def cmd_fom(args):
    records = []
    if args.bundled or not args.files:
        records += bundled_table()
    for path in args.files:
        try:
            records += load_records(path)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        except InputError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    em = Emitter(9)
    em.row("rank", "label", "fom", "fom2")
    for k, r in enumerate(rank(records), start=1):
        em.row(k, r.label, fom(r), fom2(r) if r.has_fom2 and r.i_ref > 0 else None)
    _emit(args, "fom", em)
    return EXIT_OK


COMMANDS = {
    "model": cmd_model, "simulate": cmd_simulate, "sweep": cmd_sweep, "size": cmd_size,
    "calibrate": cmd_calibrate, "metrics": cmd_metrics, "fom": cmd_fom,
}


def build_parser():
    def globals_(default):
        # subcommands re-declare the global flags with suppressed defaults so
        # they can appear on either side of the command name
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--config", default=default, help="INI run configuration")
        g.add_argument("--out", default=default, help="directory for CSV output (default: stdout)")
        g.add_argument("--quiet", action="store_true", default=False if default is None else default,
                       help="suppress informational output")
        return g

    common = globals_(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="scmref", parents=[globals_(None)],
                                description="Self-cascode current reference design toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("model", parents=[common], help="device-model curves")
    m.add_argument("--op", choices=("acm_f", "isq", "delta_vt"), required=True)
    m.add_argument("--if", dest="i_f", default="1", help="inversion levels (grid)")
    m.add_argument("--T", help="temperatures in degC (grid, default 25)")
    m.add_argument("--vbs", default="0", help="body-source voltages in V (grid)")
    m.add_argument("--flavor", help="flavor label (default: first defined)")

    for name, helptext in (("simulate", "I_REF versus temperature"),
                           ("calibrate", "exhaustive TC trim-code search")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--corner", help="corner name from [technology] (default tt)")
    sub.add_parser("sweep", parents=[common], help="1D/2D parameter map")
    sub.add_parser("size", parents=[common], help="four-step sizing flow")
    mt = sub.add_parser("metrics", parents=[common], help="box-method TC / LS from CSV files")
    mt.add_argument("files", nargs="+")
    f = sub.add_parser("fom", parents=[common], help="rank reference records by figure of merit")
    f.add_argument("files", nargs="*")
    f.add_argument("--bundled", action="store_true", help="include the bundled comparison table")
    return p


GRID_OPTIONS = ("--T", "--if", "--vbs")


def _join_grid_values(argv):
    # "--T -40:85:5" would otherwise parse "-40:85:5" as an option
    out = []
    it = iter(argv)
    for a in it:
        if a in GRID_OPTIONS:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_grid_values(argv))
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    if args.quiet:
        logging.getLogger("scmref").setLevel(logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:  # config and schema errors, including ConfigError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ScmrefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
