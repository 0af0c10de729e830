"""Figure of merit for temperature-independent current references and ranking."""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from importlib import resources

from .errors import DomainError, InputError

log = logging.getLogger(__name__)

CSV_COLUMNS = ("label", "i_ref_A", "power_W", "vdd_V", "area_mm2",
               "t_min_C", "t_max_C", "tc_ppmC", "ls_pctV")


@dataclass(frozen=True)
class ReferenceRecord:
    label: str
    i_ref: float | None = None  # A
    power: float | None = None  # W at vdd
    area: float | None = None  # mm^2
    t_min: float | None = None  # degC
    t_max: float | None = None
    tc: float | None = None  # ppm/degC
    ls: float | None = None  # %/V
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t_min is not None and self.t_max is not None and not self.t_max > self.t_min:
            raise DomainError(f"{self.label}: t_max must exceed t_min")
        if self.area is not None and not self.area > 0:
            raise DomainError(f"{self.label}: area must be positive")
        if self.tc is not None and not self.tc >= 0:
            raise DomainError(f"{self.label}: tc must be >= 0")

    @property
    def has_fom(self):
        return None not in (self.tc, self.area, self.t_min, self.t_max)

    @property
    def has_fom2(self):
        return self.has_fom and self.power is not None and self.i_ref is not None


def fom(rec):
    """TC per degree of temperature range times area (ppm/degC^2 x mm^2)."""
    if not rec.has_fom:
        raise DomainError(f"{rec.label}: fom needs tc, area and temperature range")
    span = rec.t_max - rec.t_min
    if not span > 0:
        raise DomainError(f"{rec.label}: zero temperature range")
    return rec.tc / span * rec.area


def fom2(rec):
    """:func:`fom` weighted by power over (1 V x I_REF)."""
    if rec.power is None or rec.i_ref is None:
        raise DomainError(f"{rec.label}: fom2 needs power and i_ref")
    if not rec.i_ref > 0:
        raise DomainError(f"{rec.label}: i_ref must be positive")
    return fom(rec) * rec.power / (1.0 * rec.i_ref)


def rank(records):
    """Records with a defined fom, ascending by fom then label."""
    out = []
    for r in records:
        if not r.has_fom:
            log.warning("%s: missing tc/area/range, excluded from ranking", r.label)
            continue
        out.append(r)
    return sorted(out, key=lambda r: (fom(r), r.label))


def _num(text, column, lineno):
    text = text.strip()
    if text == "":
        return None
    try:
        x = float(text)
    except ValueError:
        raise InputError(f"line {lineno}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(x):
        raise InputError(f"line {lineno}: column {column!r} is not finite")
    return x


def parse_records(text):
    """Parse the reference-record CSV; empty cells are missing values."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError("empty record file") from None
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise InputError(f"line 1: missing columns {', '.join(missing)}")
    idx = {c: header.index(c) for c in header}
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        label = row[idx["label"]].strip()
        if not label:
            raise InputError(f"line {lineno}: empty label")
        vals = {c: _num(row[idx[c]], c, lineno) for c in CSV_COLUMNS[1:]}
        extra = {c: row[idx[c]].strip() for c in header if c not in CSV_COLUMNS}
        if vals["vdd_V"] is not None:
            extra["vdd_V"] = vals["vdd_V"]
        try:
            records.append(ReferenceRecord(
                label, vals["i_ref_A"], vals["power_W"], vals["area_mm2"],
                vals["t_min_C"], vals["t_max_C"], vals["tc_ppmC"], vals["ls_pctV"], extra,
            ))
        except DomainError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
    return records


def load_records(path):
    with open(path, newline="") as fh:
        return parse_records(fh.read())


def bundled_table():
    """Published comparison table (measured values where two are given)."""
    text = resources.files("scmref").joinpath("data/table3.csv").read_text()
    return parse_records(text)
