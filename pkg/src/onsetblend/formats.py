"""CSV formats for every artifact the CLI reads or writes.

Probabilities and scores are printed with 6 decimals, coefficients with 12
significant digits.  Writes are atomic (temporary file, then rename).
"""

import csv
import datetime as dt
import math

import numpy as np

from ._io import atomic_open
from .baselines import PlattParams
from .blend import BASE, N_LEAD, N_OUT, N_TERMS, BlendModel, FeatureRow
from .climatology import ClimatologyKde
from .errors import MalformedRow
from .seasons import N_BINS

PRED_HEADER = ["grid_id", "init_date", "p_week1", "p_week2", "p_week3", "p_week4", "p_later"]
FEATURE_HEADER = ["grid_id", "init_date", "outcome"] + [
    f"{b}_{j}" for b in BASE for j in range(1, N_LEAD + 1)
]


def write_rows(path, header, rows):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_rows(path, header=None):
    """Yield ``(line_number, dict)`` for each data row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise MalformedRow(1, "empty file")
        first = [h.strip() for h in first]
        if header is not None and first != header:
            raise MalformedRow(1, f"expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(first):
                raise MalformedRow(lineno, f"expected {len(first)} fields")
            yield lineno, dict(zip(first, (c.strip() for c in row)))


def _date(text, lineno):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise MalformedRow(lineno, f"bad date {text!r}") from None


def _float(text, lineno):
    try:
        return float(text)
    except ValueError:
        raise MalformedRow(lineno, f"bad number {text!r}") from None


def fmt6(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6f}"


def fmt12(x):
    return f"{x:.12g}"


# -- onsets ---------------------------------------------------------------------


def write_onsets(path, onsets):
    """``onsets`` maps ``(grid_id, year)`` to a date or ``None``."""
    rows = [
        [g, y, "" if d is None else d.isoformat()] for (g, y), d in sorted(onsets.items())
    ]
    write_rows(path, ["grid_id", "year", "onset_date"], rows)


def read_onsets(path):
    out = {}
    for lineno, row in read_rows(path, ["grid_id", "year", "onset_date"]):
        try:
            year = int(row["year"])
        except ValueError:
            raise MalformedRow(lineno, "bad year") from None
        text = row["onset_date"]
        out[(row["grid_id"], year)] = _date(text, lineno) if text else None
    return out


def read_mok_dates(path):
    return {
        int(row["year"]): _date(row["mok_date"], lineno)
        for lineno, row in read_rows(path, ["year", "mok_date"])
    }


# -- climatology ------------------------------------------------------------------

CLIM_HEADER = ["grid_id", "bandwidth_days", "support_lo", "support_hi", "fallback", "onset_doys"]


def write_climatology(path, kdes):
    rows = []
    for grid_id in sorted(kdes):
        k = kdes[grid_id]
        doys = " ".join(fmt12(d) for d in k.onset_doys)
        rows.append(
            [grid_id, fmt12(k.bandwidth_days), fmt12(k.support[0]), fmt12(k.support[1]),
             int(k.bandwidth_fallback), doys]
        )
    write_rows(path, CLIM_HEADER, rows)


def read_climatology(path):
    out = {}
    for lineno, row in read_rows(path, CLIM_HEADER):
        doys = tuple(_float(v, lineno) for v in row["onset_doys"].split())
        out[row["grid_id"]] = ClimatologyKde(
            row["grid_id"],
            doys,
            _float(row["bandwidth_days"], lineno),
            (_float(row["support_lo"], lineno), _float(row["support_hi"], lineno)),
            row["fallback"] == "1",
        )
    return out


# -- predictions ------------------------------------------------------------------


def write_predictions(path, grid_ids, init_dates, probs):
    rows = [
        [g, d.isoformat()] + [fmt6(v) for v in p]
        for g, d, p in zip(grid_ids, init_dates, np.asarray(probs))
    ]
    write_rows(path, PRED_HEADER, rows)


def read_predictions(path):
    """Returns ``(grid_ids, init_dates, probs)``; rows renormalized after rounding."""
    grid_ids, dates, probs = [], [], []
    for lineno, row in read_rows(path, PRED_HEADER):
        grid_ids.append(row["grid_id"])
        dates.append(_date(row["init_date"], lineno))
        probs.append([_float(row[h], lineno) for h in PRED_HEADER[2:]])
    P = np.array(probs, dtype=float).reshape(-1, N_BINS)
    if np.any(P < 0):
        raise MalformedRow(0, "negative probability")
    return grid_ids, dates, P / P.sum(axis=1, keepdims=True)


# -- features -----------------------------------------------------------------------


def write_features(path, rows):
    out = []
    for r in rows:
        vals = [fmt12(v) for b in BASE for v in getattr(r, b)]
        out.append([r.grid_id, r.init_date.isoformat(), "" if r.outcome is None else r.outcome] + vals)
    write_rows(path, FEATURE_HEADER, out)


def read_features(path):
    rows = []
    for lineno, row in read_rows(path, FEATURE_HEADER):
        kwargs = {
            b: [_float(row[f"{b}_{j}"], lineno) for j in range(1, N_LEAD + 1)] for b in BASE
        }
        outcome = int(row["outcome"]) if row["outcome"] else None
        rows.append(FeatureRow(row["grid_id"], _date(row["init_date"], lineno), outcome=outcome, **kwargs))
    return rows


# -- blend model ----------------------------------------------------------------------

MODEL_HEADER = ["section", "l", "j", "jp", "value"]


def write_blend_model(path, model):
    rows = []
    for l in range(N_TERMS):
        for j in range(N_LEAD):
            for jp in range(N_OUT):
                rows.append(["coef", l, j + 1, jp + 1, fmt12(model.coef[l, j, jp])])
    for section, arr in (("mean", model.mean), ("scale", model.scale)):
        for i, b in enumerate(BASE):
            for j in range(N_LEAD):
                rows.append([section, b, j + 1, "", fmt12(arr[i, j])])
    rows.append(["ridge", "", "", "", fmt12(model.ridge)])
    write_rows(path, MODEL_HEADER, rows)


def read_blend_model(path):
    coef = np.full((N_TERMS, N_LEAD, N_OUT), np.nan)
    mean = np.full((len(BASE), N_LEAD), np.nan)
    scale = np.full((len(BASE), N_LEAD), np.nan)
    ridge = 0.0
    for lineno, row in read_rows(path, MODEL_HEADER):
        value = _float(row["value"], lineno)
        try:
            if row["section"] == "coef":
                coef[int(row["l"]), int(row["j"]) - 1, int(row["jp"]) - 1] = value
            elif row["section"] in ("mean", "scale"):
                target = mean if row["section"] == "mean" else scale
                target[BASE.index(row["l"]), int(row["j"]) - 1] = value
            elif row["section"] == "ridge":
                ridge = value
            else:
                raise MalformedRow(lineno, f"unknown section {row['section']!r}")
        except (ValueError, IndexError):
            raise MalformedRow(lineno, "bad model index") from None
    if np.isnan(coef).any() or np.isnan(mean).any() or np.isnan(scale).any():
        raise MalformedRow(0, "incomplete blend model file")
    return BlendModel(coef, mean, scale, ridge)


# -- calibration and ensembles --------------------------------------------------------


def write_platt(path, params):
    rows = [
        [j + 1, fmt12(params.a[j]), fmt12(params.b[j]), int(params.degenerate[j])]
        for j in range(N_BINS)
    ]
    write_rows(path, ["bin", "a", "b", "degenerate"], rows)


def read_platt(path):
    a, b, deg = np.ones(N_BINS), np.zeros(N_BINS), np.zeros(N_BINS, bool)
    for lineno, row in read_rows(path, ["bin", "a", "b", "degenerate"]):
        j = int(row["bin"]) - 1
        a[j], b[j] = _float(row["a"], lineno), _float(row["b"], lineno)
        deg[j] = row["degenerate"] == "1"
    return PlattParams(a, b, deg)


def write_weights(path, names, fit, reference_rps=None):
    rpss = "nan" if reference_rps is None else fmt6(fit.rpss(reference_rps))
    rows = [[n, fmt6(w), fmt6(fit.rps), rpss, int(fit.converged)] for n, w in zip(names, fit.weights)]
    write_rows(path, ["component", "weight", "rps", "rpss", "converged"], rows)


# -- evaluation ---------------------------------------------------------------------------


def write_reports(prefix, reports):
    """Summary, per-lead, per-year, reliability and histogram CSVs for each model."""
    summary, lead, year, rel, hist = [], [], [], [], []
    for name, r in reports.items():
        summary.append([name, r.n] + [fmt6(v) for v in (r.brier, r.rps, r.auc, r.bss, r.rpss)])
        for row in r.per_lead:
            lead.append([name, row["bin"], fmt6(row["brier"]), fmt6(row["bss"]), fmt6(row["auc"])])
        for row in r.per_year:
            year.append([name, row["year"], row["n"], fmt6(row["bss"]), fmt6(row["auc"])])
        t = r.reliability
        for k in range(len(t["count"])):
            rel.append([name, k + 1, fmt6(t["mean_p"][k]), fmt6(t["observed"][k]), int(t["count"][k])])
        for k, h in enumerate(t["hist"]):
            hist.append([name, f"{k / 10:.1f}", f"{(k + 1) / 10:.1f}", fmt6(h)])
    write_rows(f"{prefix}eval_report.csv", ["model", "n", "brier", "rps", "auc", "bss", "rpss"], summary)
    write_rows(f"{prefix}eval_per_lead.csv", ["model", "bin", "brier", "bss", "auc"], lead)
    write_rows(f"{prefix}eval_per_year.csv", ["model", "year", "n", "bss", "auc"], year)
    write_rows(f"{prefix}reliability.csv", ["model", "decile", "mean_p", "observed", "count"], rel)
    write_rows(f"{prefix}histogram.csv", ["model", "bin_lo", "bin_hi", "height"], hist)
