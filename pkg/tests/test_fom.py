import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scmref.errors import DomainError, InputError
from scmref.fom import ReferenceRecord, bundled_table, fom, fom2, parse_records, rank

PRINTED_FOM = {
    "Far 2015": 0.0029, "Cordova 2017": 0.0077, "Santamaria 2019": 0.0174, "Agarwal 2022": 0.0819,
    "Aminzadeh 2022": 0.1159, "Mahmoudi 2022": 0.0040, "Bruni 2023": 0.0025, "Huang 2023": 0.0089,
    "Yang 2023": 0.0032, "De Vita 2007": 0.0193, "Kayahan 2013": 0.0166, "Ji 2017": 0.1415,
    "Wang 2019 (VLSI-DAT)": 0.0887, "Wang 2019 (TCAS-I)": 0.0499, "Huang 2020": 0.0570,
    "Lee 2020": 0.9595, "Chang 2022": 0.0575, "Shetty 2022": 0.0835, "SCM beta-multiplier 2023": 0.0597,
    "SCM-4T 0.11um": 0.0149, "SCM-4T 22nm": 0.0017,
}
HEADER = "label,i_ref_A,power_W,vdd_V,area_mm2,t_min_C,t_max_C,tc_ppmC,ls_pctV\n"


def rec(label="x", tc=100.0, area=0.01, t_min=-40.0, t_max=85.0, i_ref=2.5e-9, power=10e-9):
    return ReferenceRecord(label, i_ref, power, area, t_min, t_max, tc)


class TestFom:
    def test_bulk_this_work(self):
        assert fom(rec(tc=176, area=0.0106)) == pytest.approx(0.01492, abs=1e-5)
        assert round(fom(rec(tc=176, area=0.0106)), 4) == 0.0149

    def test_fdsoi_this_work(self):
        assert fom(rec(tc=82, area=0.00255)) == pytest.approx(0.00167, abs=5e-6)
        assert round(fom(rec(tc=82, area=0.00255)), 4) == 0.0017

    def test_zero_tc(self):
        assert fom(rec(tc=0.0)) == 0.0

    def test_invariants(self):
        with pytest.raises(DomainError):
            rec(t_min=10, t_max=10)
        with pytest.raises(DomainError):
            rec(area=0.0)
        with pytest.raises(DomainError):
            rec(tc=-1.0)

    def test_missing(self):
        with pytest.raises(DomainError):
            fom(ReferenceRecord("y", tc=10.0))

    @given(st.floats(0, 1000), st.floats(1e-4, 1.0), st.floats(1, 200), st.floats(0.1, 10))
    def test_homogeneity(self, tc, area, span, c):
        r = rec(tc=tc, area=area, t_min=0.0, t_max=span)
        assert fom(rec(tc=c * tc, area=area, t_min=0.0, t_max=span)) == pytest.approx(c * fom(r), rel=1e-12)
        assert fom(rec(tc=tc, area=c * area, t_min=0.0, t_max=span)) == pytest.approx(c * fom(r), rel=1e-12)
        assert fom(rec(tc=tc, area=area, t_min=0.0, t_max=span / 2)) == pytest.approx(2 * fom(r), rel=1e-12)


class TestFom2:
    def test_unit_power(self):
        r = rec(power=2.5e-9 * 1.0)
        assert fom2(r) == pytest.approx(fom(r), rel=1e-15)

    def test_fdsoi_row(self):
        # the comparison row arithmetic: 0.00167 x (16.3 nW / (1 V x 2.54 nA))
        r = rec(tc=82, area=0.00255, i_ref=2.54e-9, power=16.3e-9)
        assert fom2(r) == pytest.approx(0.0107, abs=1e-4)

    def test_linear_in_power(self):
        assert fom2(rec(power=20e-9)) == pytest.approx(2 * fom2(rec(power=10e-9)), rel=1e-15)

    def test_zero_current(self):
        with pytest.raises(DomainError):
            fom2(rec(i_ref=0.0))


class TestRank:
    def test_single(self):
        r = rec()
        assert rank([r]) == [r]

    def test_bundled_order(self):
        table = bundled_table()
        order = [r.label for r in rank(table)]
        assert order.index("SCM-4T 22nm") < order.index("De Vita 2007")
        assert order[0] == "SCM-4T 22nm"

    def test_permutation_invariant(self):
        rs = [rec(label=c, tc=t) for c, t in zip("abcde", (5, 1, 3, 1, 2))]
        ref = rank(rs)
        for perm in itertools.permutations(rs):
            assert rank(list(perm)) == ref
        assert [r.label for r in ref] == ["b", "d", "e", "c", "a"]

    def test_sorted(self):
        fs = [fom(r) for r in rank(bundled_table())]
        assert fs == sorted(fs)

    def test_missing_excluded(self, caplog):
        rs = [rec(label="ok"), ReferenceRecord("no-area", 1e-9, 1e-9, None, 0, 80, 40.0)]
        with caplog.at_level("WARNING"):
            out = rank(rs)
        assert [r.label for r in out] == ["ok"]
        assert "no-area" in caplog.text


class TestCsv:
    def test_bundled_values(self):
        rows = {r.label: r for r in bundled_table()}
        assert round(fom(rows["SCM-4T 0.11um"]), 4) == 0.0149
        assert round(fom(rows["SCM-4T 22nm"]), 4) == 0.0017
        assert round(fom(rows["De Vita 2007"]), 4) == 0.0193
        assert rows["Ji 2017"].extra.get("vdd_V") is None

    def test_labels(self):
        assert {r.label for r in bundled_table()} == set(PRINTED_FOM)

    @pytest.mark.parametrize("label", sorted(PRINTED_FOM))
    def test_printed_fom(self, label):
        # printed to four decimals; one unit of slack in the last digit
        rows = {r.label: r for r in bundled_table()}
        assert fom(rows[label]) == pytest.approx(PRINTED_FOM[label], abs=1e-4 + 1e-12)

    def test_empty_cells(self):
        rs = parse_records(HEADER + "a,,,,0.01,0,80,40,\n")
        assert rs[0].i_ref is None and rs[0].has_fom and not rs[0].has_fom2

    def test_missing_column(self):
        with pytest.raises(InputError, match="missing columns"):
            parse_records("label,tc_ppmC\nx,1\n")

    def test_bad_number(self):
        with pytest.raises(InputError, match="line 2"):
            parse_records(HEADER + "a,x,,,0.01,0,80,40,\n")

    def test_bad_row_length(self):
        with pytest.raises(InputError, match="line 2"):
            parse_records(HEADER + "a,1\n")

    def test_invalid_record(self):
        with pytest.raises(InputError, match="line 2"):
            parse_records(HEADER + "a,,,,0.01,80,0,40,\n")

    def test_empty(self):
        with pytest.raises(InputError):
            parse_records("")
