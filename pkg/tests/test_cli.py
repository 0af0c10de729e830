import csv
import io
from dataclasses import replace
from pathlib import Path

import pytest

from scmref.cli import EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_DOMAIN, EXIT_OK, _sizing_inputs, main
from scmref.config import load_config
from scmref.sizing import step2_alpha_guess

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")))


def footer(text):
    return [line[2:] for line in text.splitlines() if line.startswith("# ")]


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def edited(name, tmp_path, old, new):
    text = (CONFIGS / f"{name}.ini").read_text()
    assert old in text
    return write(tmp_path, f"{name}_edit.ini", text.replace(old, new))


class TestModel:
    def test_acm_f_zero(self, capsys):
        code, out, _ = run(capsys, "model", "--op", "acm_f", "--if", "3")
        assert code == EXIT_OK
        (r,) = rows(out)
        assert float(r["acm_f_V"]) == 0.0

    def test_isq_grid(self, capsys):
        code, out, _ = run(capsys, "model", "--op", "isq", "--T", "-40:85:5")
        assert code == EXIT_OK
        assert len(rows(out)) == 26

    def test_delta_vt(self, capsys):
        code, out, _ = run(capsys, "model", "--op", "delta_vt", "--vbs", "0,0.2")
        r = rows(out)
        assert code == EXIT_OK and float(r[0]["delta_vt_V"]) == 0.0
        assert float(r[1]["delta_vt_V"]) == pytest.approx(-0.15 * 0.2, rel=1e-12)

    def test_malformed_config(self, capsys, tmp_path):
        p = write(tmp_path, "bad.ini", "[technology]\npreset = generic\n[design]\nk_ptat = x8\n")
        code, _, err = run(capsys, "--config", p, "model", "--op", "isq")
        assert code == EXIT_CONFIG
        assert "line 4" in err

    def test_bad_grid(self, capsys):
        code, _, err = run(capsys, "model", "--op", "acm_f", "--if", "1:2")
        assert code == EXIT_CONFIG and "--if" in err

    def test_usage_error(self, capsys):
        assert run(capsys, "model")[0] == EXIT_CONFIG

    def test_out_dir(self, capsys, tmp_path):
        code, out, _ = run(capsys, "--out", tmp_path, "--quiet", "model", "--op", "acm_f", "--if", "1,3")
        assert code == EXIT_OK and out == ""
        text = (tmp_path / "model_acm_f.csv").read_text()
        assert text.startswith("i_f,T_degC,acm_f_V\n") and "\r" not in text


class TestSimulate:
    def test_columns_and_summary(self, capsys):
        code, out, _ = run(capsys, "--config", CONFIGS / "ptat_offset_generic.ini", "simulate")
        assert code == EXIT_OK
        assert out.splitlines()[0] == "T_degC,V_X_V,i_f2,I_REF_A"
        assert len(rows(out)) == 26
        assert footer(out)[0].startswith("tc_box_ppmC = ")

    def test_pure_ptat(self, capsys):
        code, out, _ = run(capsys, "--config", CONFIGS / "pure_ptat.ini", "simulate")
        assert code == EXIT_OK
        tc = float(footer(out)[0].split("=")[1])
        T = [float(r["T_degC"]) + 273.15 for r in rows(out)]
        expected = (2 - 1.5) / (sum(T) / len(T)) * 1e6
        assert tc == pytest.approx(expected, rel=0.10)

    def test_optimum_cell_below_50(self, capsys, tmp_path):
        # grid optimum from the sweep, then the simulate summary at that cell
        code, out, _ = run(capsys, "--config", CONFIGS / "ptat_offset_generic.ini", "sweep")
        assert code == EXIT_OK
        best = min(rows(out), key=lambda r: float(r["value"]))
        p = edited("ptat_offset_generic", tmp_path, "k_ptat = 8\nalpha = 1.5",
                   f"k_ptat = {best['param1']}\nalpha = {best['param2']}")
        code, out, _ = run(capsys, "--config", p, "simulate")
        tc = float(footer(out)[0].split("=")[1])
        assert tc < 50, f"optimum cell (K, alpha) = ({best['param1']}, {best['param2']}) has TC {tc:.1f}"

    def test_empty_grid(self, capsys, tmp_path):
        p = edited("ptat_offset_generic", tmp_path, "T_C = -40:85:5", "T_C = ")
        assert run(capsys, "--config", p, "simulate")[0] == EXIT_CONFIG

    def test_missing_config(self, capsys):
        code, _, err = run(capsys, "simulate")
        assert code == EXIT_CONFIG and "--config" in err

    def test_unsolvable_names_temperature(self, capsys, tmp_path):
        p = edited("pure_ptat", tmp_path, "k_ptat = 8\nalpha = 1.5", "k_ptat = 1.2\nalpha = 3")
        code, _, err = run(capsys, "--config", p, "simulate")
        assert code == EXIT_DOMAIN and "degC" in err

    def test_deterministic_bytes(self, capsys, tmp_path):
        a = run(capsys, "--config", CONFIGS / "vref4t_offset.ini", "simulate")[1]
        b = run(capsys, "--config", CONFIGS / "vref4t_offset.ini", "simulate")[1]
        assert a == b
        run(capsys, "--config", CONFIGS / "vref4t_offset.ini", "--out", tmp_path, "simulate")
        assert (tmp_path / "simulate.csv").read_bytes() == a.encode()

    def test_nine_digits(self, capsys):
        out = run(capsys, "--config", CONFIGS / "ptat_offset_generic.ini", "simulate")[1]
        i_ref = rows(out)[0]["I_REF_A"]
        mantissa = i_ref.split("e")[0].replace(".", "").replace("-", "").lstrip("0")
        assert len(mantissa) <= 9

    def test_corner(self, capsys):
        nominal = run(capsys, "--config", CONFIGS / "calibrate_22nm.ini", "simulate")[1]
        skew = run(capsys, "--config", CONFIGS / "calibrate_22nm.ini", "simulate", "--corner", "n_plus")[1]
        assert nominal != skew
        assert run(capsys, "--config", CONFIGS / "calibrate_22nm.ini", "simulate",
                   "--corner", "ff")[0] == EXIT_CONFIG

    def test_convergence_exit(self, capsys, tmp_path):
        p = edited("map_22nm", tmp_path, "preset = 22nm", "preset = 22nm\nlvt.vt0_tslope = 0.003")
        code, _, err = run(capsys, "--config", p, "simulate")
        assert code == EXIT_CONVERGENCE and "error" in err


class TestSweep:
    def test_voff_envelope(self, capsys):
        code, out, _ = run(capsys, "--config", CONFIGS / "vref4t_offset.ini", "sweep")
        assert code == EXIT_OK
        voff = [float(r["value"]) for r in rows(out) if r["metric"] == "voff"]
        assert len(voff) == 30
        assert min(voff) <= 5 and max(voff) >= 55
        assert all(b > a for a, b in zip(voff, voff[1:]))

    def test_footer_cell_count(self, capsys, tmp_path):
        p = edited("ptat_offset_generic", tmp_path, "values1 = 2:16:1", "values1 = 1.5, 2, 3")
        p = write(tmp_path, "f.ini", p.read_text().replace("values2 = 1.1:2.5:0.025", "values2 = 1.1, 3.9"))
        code, out, _ = run(capsys, "--config", p, "sweep")
        assert code == EXIT_OK
        note = footer(out)[-1]
        cells = int(note.split("cells = ")[1].split(",")[0])
        skipped = int(note.split("skipped = ")[1])
        assert cells + skipped == 3 * 2 and skipped >= 1
        assert len(rows(out)) == cells  # one metric

    def test_valley_matches_step2(self, capsys, tmp_path):
        p = edited("map_22nm", tmp_path, "values1 = 2:16:1", "values1 = 8")
        p = write(tmp_path, "m.ini", p.read_text().replace("metrics = tc, s_iref", "metrics = tc"))
        code, out, _ = run(capsys, "--config", p, "sweep")
        assert code == EXIT_OK
        r = rows(out)
        best = min(r, key=lambda x: float(x["value"]))
        cfg = load_config(CONFIGS / "size_22nm.ini")
        inputs = replace(_sizing_inputs(cfg), s9_values=(8,))
        alpha, m = step2_alpha_guess(inputs, cfg.Ts)
        assert float(best["param2"]) == pytest.approx(alpha)
        row = {float(x["param2"]): float(x["value"]) for x in r}
        for a, tc in zip(m.alphas, m.tc[0]):
            assert row[a] == pytest.approx(tc, rel=1e-8)

    def test_unknown_metric(self, capsys, tmp_path):
        p = edited("vref4t_offset", tmp_path, "metrics = voff, ptat_slope", "metrics = gain")
        assert run(capsys, "--config", p, "sweep")[0] == EXIT_CONFIG


class TestSize:
    def test_anchor_alpha_guess(self, capsys):
        code, out, _ = run(capsys, "--config", CONFIGS / "size_22nm.ini", "--quiet", "size")
        assert code == EXIT_OK
        guess = {(r["stage"], r["quantity"]): r["value"] for r in rows(out)}
        assert float(guess[("step3", "alpha_opt")]) == pytest.approx(1.825, abs=0.025)

    def test_report_and_checks(self, capsys):
        code, out, err = run(capsys, "--config", CONFIGS / "size_22nm.ini", "size")
        assert code == EXIT_OK
        assert "check S1/S2 KCL ratio: PASS" in err
        r = {(x["stage"], x["quantity"]): x["value"] for x in rows(out)}
        assert r[("final", "check:S1/S2 KCL ratio")] == "PASS"
        assert float(r[("final", "alpha_opt")]) == 1.65

    def test_infeasible_names_step_b(self, capsys, tmp_path):
        text = (CONFIGS / "size_22nm.ini").read_text()
        text = text.replace("s7 = 2\ns9 = 8", "s7 = 0\ns9 = 1.3\nvbs7 = 0.1")
        text = text.replace("alpha_sim = 1.65", "alpha_sim = 3.9").replace("alpha = 1.05:3.0:0.025", "alpha = 1.05:1.1:0.025")
        p = write(tmp_path, "inf.ini", text)
        code, _, err = run(capsys, "--config", p, "--quiet", "size")
        assert code == EXIT_DOMAIN
        assert "step (b)" in err and "3.9" in err

    def test_needs_target(self, capsys, tmp_path):
        p = edited("size_22nm", tmp_path, "i_ref = 2.5e-9\n", "")
        assert run(capsys, "--config", p, "size")[0] == EXIT_CONFIG

    def test_failed_constraint_exit(self, capsys, tmp_path):
        # a deep-subthreshold mirror cannot hold V_SG4 above 4 U_T
        p = edited("size_22nm", tmp_path, "if_mirror = 1", "if_mirror = 1e-9")
        code, _, err = run(capsys, "--config", p, "--quiet", "size")
        assert code == EXIT_DOMAIN and "constraint failed: V_SG4" in err


class TestCalibrate:
    def cal(self, capsys, corner=None):
        argv = ["--config", CONFIGS / "calibrate_22nm.ini", "calibrate"]
        if corner:
            argv += ["--corner", corner]
        code, out, _ = run(capsys, *argv)
        assert code == EXIT_OK
        note = dict(kv.split(" = ") for kv in footer(out)[-1].split(", "))
        return rows(out), note

    def test_argmin(self, capsys):
        table, note = self.cal(capsys)
        assert len(table) == 32
        tcs = [float(r["tc_ppmC"]) for r in table if r["tc_ppmC"]]
        best = float(note["best_tc_ppmC"])
        assert all(best <= t for t in tcs)
        assert float(table[int(note["selected_code"])]["tc_ppmC"]) == best

    def test_skew_corner_moves_code(self, capsys):
        _, nominal = self.cal(capsys)
        table, skew = self.cal(capsys, "n_plus")
        assert skew["corner"] == "n_plus"
        assert skew["selected_code"] != nominal["selected_code"]
        at_nominal_code = float(table[int(nominal["selected_code"])]["tc_ppmC"])
        assert float(skew["best_tc_ppmC"]) < at_nominal_code

    def test_voff_increasing(self, capsys):
        table, _ = self.cal(capsys)
        v = [float(r["voff_mV"]) for r in table]
        assert all(b > a for a, b in zip(v, v[1:]))

    def test_needs_calibration(self, capsys):
        assert run(capsys, "--config", CONFIGS / "ptat_offset_generic.ini", "calibrate")[0] == EXIT_CONFIG


class TestMetrics:
    def test_tc(self, capsys, tmp_path):
        p = write(tmp_path, "t.csv", "T_degC,I_REF_A\n-40,2.4e-9\n25,2.5e-9\n85,2.6e-9\n")
        code, out, _ = run(capsys, "metrics", p)
        assert code == EXIT_OK
        (r,) = rows(out)
        assert r["metric"] == "tc_ppmC" and float(r["value"]) == pytest.approx(640, rel=1e-9)

    def test_ls(self, capsys, tmp_path):
        p = write(tmp_path, "l.csv", "VDD_V,I_REF_A\n0.8,2.3e-9\n1.2,2.4e-9\n")
        (r,) = rows(run(capsys, "metrics", p)[1])
        assert r["metric"] == "ls_pctV" and float(r["value"]) == pytest.approx(10.638, abs=1e-3)

    def test_both(self, capsys, tmp_path):
        p = write(tmp_path, "b.csv", "T_degC,VDD_V,I_REF_A\n-40,1.2,2.4e-9\n85,1.2,2.6e-9\n"
                                     "25,0.8,2.3e-9\n25,1.2,2.5e-9\n")
        out = rows(run(capsys, "metrics", p)[1])
        assert {r["metric"] for r in out} == {"tc_ppmC", "ls_pctV"}

    def test_missing_column(self, capsys, tmp_path):
        p = write(tmp_path, "m.csv", "T_degC,I\n1,2\n3,4\n")
        code, _, err = run(capsys, "metrics", p)
        assert code == EXIT_CONFIG and "I_REF_A" in err


class TestFom:
    def test_bundled(self, capsys):
        code, out, _ = run(capsys, "fom", "--bundled")
        assert code == EXIT_OK
        by_label = {r["label"]: r for r in rows(out)}
        assert float(by_label["SCM-4T 0.11um"]["fom"]) == pytest.approx(0.0149, abs=1e-4)
        assert float(by_label["SCM-4T 22nm"]["fom"]) == pytest.approx(0.0017, abs=1e-4)
        assert by_label["SCM-4T 22nm"]["rank"] == "1"

    def test_single_row(self, capsys, tmp_path):
        p = write(tmp_path, "one.csv", "label,i_ref_A,power_W,vdd_V,area_mm2,t_min_C,t_max_C,tc_ppmC,ls_pctV\n"
                                       "a,1e-9,1e-9,1,0.01,0,100,50,\n")
        (r,) = rows(run(capsys, "fom", p)[1])
        assert r["rank"] == "1" and float(r["fom"]) == pytest.approx(0.005)
        assert float(r["fom2"]) == pytest.approx(0.005)

    def test_missing_area_excluded(self, capsys, tmp_path):
        p = write(tmp_path, "two.csv", "label,i_ref_A,power_W,vdd_V,area_mm2,t_min_C,t_max_C,tc_ppmC,ls_pctV\n"
                                       "a,1e-9,1e-9,1,0.01,0,100,50,\nb,1e-9,1e-9,1,,0,100,10,\n")
        code, out, err = run(capsys, "fom", p)
        assert code == EXIT_OK
        assert [r["label"] for r in rows(out)] == ["a"]
        assert "b" in err and "excluded" in err

    def test_schema_violation(self, capsys, tmp_path):
        p = write(tmp_path, "bad.csv", "label,tc_ppmC\na,1\n")
        assert run(capsys, "fom", p)[0] == EXIT_CONFIG
