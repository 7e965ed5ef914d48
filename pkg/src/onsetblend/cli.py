"""``onsetblend`` command line.

Exit codes: 0 success, 1 validation error, 2 data error, 3 non-convergence.
"""

import argparse
import contextlib
import dataclasses
import os
import sys
import tempfile

import numpy as np

from . import decision, formats, ingest, pipeline
from .baselines import optimize_mme_weights, platt_fit
from .blend import N_LEAD, FeatureRow, fit_blend, predict_blend, rainfall_features, winsorize_logit
from .climatology import evolving_bin_probs, fit_kde, static_bin_probs
from .errors import ConvergenceError, DataError, MalformedRow, OnsetBlendError, ValidationError
from .evaluate import ScoredSet, evaluate, rps
from .onset import OnsetConfig, compute_five_day_threshold
from .seasons import MokPolicy, outcome_bin, parse_month_day, season_doy

EXIT_OK, EXIT_VALIDATION, EXIT_DATA, EXIT_CONVERGENCE = 0, 1, 2, 3


# -- configuration files ------------------------------------------------------------------


def read_key_values(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            out[key.strip()] = value.strip()
    return out


def parse_overrides(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def parse_years(text):
    """``2000-2029``, ``2000,2003`` or a mix of both."""
    years = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        lo, sep, hi = part.partition("-")
        try:
            years.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise ValidationError(f"bad year list {text!r}") from None
    return sorted(set(years))


def _coerce(value, default, name):
    try:
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float) or default is None:
            return None if value == "" else float(value)
    except ValueError:
        raise ValidationError(f"{name}: cannot parse {value!r}") from None
    return value


def config_from_mapping(cls, mapping):
    """Build a flat dataclass from string values, coercing by field default."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        if key not in fields:
            raise ValidationError(f"unknown configuration key {key!r}")
        f = fields[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        kwargs[key] = _coerce(value, default, key)
    return cls(**kwargs)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything ``onsetblend run`` needs.

    An empty ``rain`` path selects the synthetic world built from ``seed``,
    ``n_years``, ``n_cells`` and ``forecast_skill``.
    """

    rain: str = ""
    forecasts: str = ""
    mok: str = ""
    out: str = "out"
    model_a: str = "A"
    model_b: str = "B"
    variant: str = "none"
    spell_total_mm: float | None = None
    wet_day_mm: float = 1.0
    dry_len_days: int = 10
    dry_total_mm: float = 5.0
    followup_days: int = 30
    bins: str = "weekly"
    ridge: float = 1e-6
    auc: str = "half"
    kde_floor: float = 1.0
    seed: int = 7
    n_years: int = 30
    n_cells: int = 4
    forecast_skill: str = "0.9,0.6,0.3,0.1"
    years: str = ""
    cv: str = "loocv"
    train_years: str = ""
    test_years: str = ""

    def __post_init__(self):
        if self.auc not in ("strict", "half"):
            raise ValidationError("auc must be strict or half")
        if self.bins != "weekly":
            raise ValidationError("only the weekly bin convention is supported")
        if self.cv not in ("loocv", "split"):
            raise ValidationError("cv must be loocv or split")
        if self.ridge < 0:
            raise ValidationError("ridge must be nonnegative")
        MokPolicy.parse(self.variant)
        if self.cv == "split":
            train, test = parse_years(self.train_years), parse_years(self.test_years)
            if not train or not test:
                raise ValidationError("split mode needs train_years and test_years")
            if set(train) & set(test):
                raise ValidationError("train_years and test_years overlap")

    @property
    def synthetic(self):
        return not self.rain

    def onset_config(self, spell_total_mm):
        return OnsetConfig.for_variant(
            self.variant,
            spell_total_mm=spell_total_mm,
            wet_day_mm=self.wet_day_mm,
            dry_len_days=self.dry_len_days,
            dry_total_mm=self.dry_total_mm,
            followup_days=self.followup_days,
        )

    def synthetic_config(self):
        skill = tuple(float(v) for v in self.forecast_skill.split(","))
        kwargs = dict(seed=self.seed, n_years=self.n_years, n_cells=self.n_cells, forecast_skill=skill)
        if self.spell_total_mm is not None:
            kwargs["five_day_threshold_mm"] = self.spell_total_mm
        return ingest.SyntheticConfig(**kwargs)

    def check_paths(self):
        for name in ("rain", "forecasts", "mok"):
            path = getattr(self, name)
            if path and not os.path.exists(path):
                raise DataError(f"{name} file not found: {path}")
        if self.rain and not self.forecasts:
            raise ValidationError("a rain file needs a forecasts file")
        if MokPolicy.parse(self.variant).kind == "true" and not self.mok:
            raise ValidationError("true-mok variant needs a mok file")

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in dataclasses.fields(self)]


def write_config(path, config):
    """Echo the resolved config; ``out`` is omitted so reruns elsewhere match byte for byte."""
    with formats.atomic_open(path) as fh:
        for key, value in config.items():
            if key == "out":
                continue
            fh.write(f"{key} = {'' if value is None else value}\n")


# -- error context ----------------------------------------------------------------------------


@contextlib.contextmanager
def stage(name):
    """Tag errors raised inside with the pipeline stage name."""
    try:
        yield
    except OnsetBlendError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


def _cell_thresholds(truth, override):
    return {
        s.grid_id: compute_five_day_threshold([s], override=override) for s in truth
    }


# -- run --------------------------------------------------------------------------------------


def run_pipeline(config):
    """Full experiment; writes every artifact into ``config.out``."""
    config.check_paths()
    os.makedirs(config.out, exist_ok=True)
    out = lambda name: os.path.join(config.out, name)

    with stage("ingest"):
        if config.synthetic:
            synth = config.synthetic_config()
            onset_cfg = config.onset_config(synth.five_day_threshold_mm)
            truth, onsets, thresholds, ensembles = pipeline.synthetic_world(synth, onset_cfg)
            model_a, model_b = synth.model_a, synth.model_b
        else:
            truth = ingest.parse_rainfall_csv(config.rain)
            ensembles = ingest.parse_forecast_csv(config.forecasts)
            model_a, model_b = config.model_a, config.model_b
    if not config.synthetic:
        with stage("onset"):
            thresholds = _cell_thresholds(truth, config.spell_total_mm)
            onset_cfg = config.onset_config(next(iter(thresholds.values())))
            mok = formats.read_mok_dates(config.mok) if config.mok else None
            onsets = pipeline.detect_all_onsets(truth, onset_cfg, mok, thresholds)
    formats.write_onsets(out("onsets.csv"), onsets)

    with stage("features"):
        dataset = pipeline.build_dataset(ensembles, onsets, thresholds, onset_cfg, model_a, model_b)
    all_years = sorted(set(dataset.years.tolist()))
    years = parse_years(config.years) if config.years else all_years

    with stage("train"):
        if config.cv == "loocv":
            result = pipeline.run_loocv(dataset, years, config.ridge, config.auc, config.kde_floor)
            final_years = years
            final = pipeline.train_fold(
                dataset, dataset.mask_years(years), years, config.ridge, config.kde_floor
            )
        else:
            train, test = parse_years(config.train_years), parse_years(config.test_years)
            result = pipeline.run_split(dataset, train, test, config.ridge, config.auc, config.kde_floor)
            final_years, final = train, result.final_models

    with stage("write"):
        formats.write_climatology(out("climatology.csv"), final.kdes)
        formats.write_blend_model(out("blend_model.csv"), final.blend)
        formats.write_platt(out("platt.csv"), final.platt)
        mask = dataset.mask_years(final_years)
        _, evolving = pipeline.climatology_probs(dataset, final.kdes, mask)
        base = pipeline.blend_base(dataset, evolving, mask)
        dates = [d for d, m in zip(dataset.init_dates, mask) if m]
        rows = [
            FeatureRow(g, d, *base[i], outcome=int(y))
            for i, (g, d, y) in enumerate(zip(dataset.grid_ids[mask], dates, dataset.outcomes[mask]))
        ]
        formats.write_features(out("features.csv"), rows)
        for name, scored in result.predictions.items():
            formats.write_predictions(
                out(f"predictions_{name}.csv"), scored.grid_ids, scored.init_dates, scored.probs
            )
        static_rps = result.reports["static"].rps
        formats.write_weights(out("mme_weights.csv"), pipeline.MME_COMPONENTS, result.mme, static_rps)
        formats.write_reports(out(""), result.reports)
        write_config(out("run_config.txt"), config)
    return result


def cmd_run(args):
    mapping = read_key_values(args.config) if args.config else {}
    for key in ("out", "seed", "cv", "years", "train_years", "test_years", "auc", "ridge", "variant"):
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = str(value)
    mapping.update(parse_overrides(args.set))
    config = config_from_mapping(RunConfig, mapping)
    result = run_pipeline(config)
    print("model,rps,rpss,bss,auc")
    for name in pipeline.MODELS:
        r = result.reports[name]
        print(f"{name},{r.rps:.6f},{r.rpss:.6f},{r.bss:.6f},{r.auc:.6f}")


# -- single-stage commands -------------------------------------------------------------


def cmd_synth(args):
    mapping = read_key_values(args.config) if args.config else {}
    if args.seed is not None:
        mapping["seed"] = str(args.seed)
    fields = {f.name: f.default for f in dataclasses.fields(ingest.SyntheticConfig)}
    kwargs = {}
    for key, value in mapping.items():
        if key not in fields:
            raise ValidationError(f"unknown synthetic key {key!r}")
        default = fields[key]
        if key in ("init_start", "init_end"):
            kwargs[key] = parse_month_day(value)
        elif isinstance(default, tuple):
            kwargs[key] = tuple(_coerce(v.strip(), default[0], key) for v in value.split(","))
        else:
            kwargs[key] = _coerce(value, default, key)
    synth = ingest.SyntheticConfig(**kwargs)
    os.makedirs(args.out, exist_ok=True)
    truth, onsets, _, ensembles = pipeline.synthetic_world(synth)
    ingest.write_rainfall_csv(truth, os.path.join(args.out, "rain.csv"))
    ingest.write_forecast_csv(ensembles, os.path.join(args.out, "forecasts.csv"))
    formats.write_onsets(os.path.join(args.out, "onsets.csv"), onsets)
    with formats.atomic_open(os.path.join(args.out, "onset.cfg")) as fh:
        fh.write(f"spell_total_mm = {synth.five_day_threshold_mm}\n")


ONSET_KEYS = ("spell_total_mm", "wet_day_mm", "spell_len_days", "dry_len_days", "dry_total_mm", "followup_days")


def _onset_kwargs(path):
    mapping = read_key_values(path) if path else {}
    kwargs = {}
    for key, value in mapping.items():
        if key not in ONSET_KEYS:
            raise ValidationError(f"unknown onset key {key!r}")
        kwargs[key] = _coerce(value, 0 if key.endswith("days") else 0.0, key)
    return kwargs


def cmd_onset_detect(args):
    truth = ingest.parse_rainfall_csv(args.rain)
    kwargs = _onset_kwargs(args.config)
    override = kwargs.pop("spell_total_mm", None)
    thresholds = _cell_thresholds(truth, override)
    config = OnsetConfig.for_variant(args.variant, spell_total_mm=1.0, **kwargs)
    if config.mok_policy.kind == "true" and not args.mok:
        raise ValidationError("true-mok variant needs --mok")
    mok = formats.read_mok_dates(args.mok) if args.mok else None
    onsets = pipeline.detect_all_onsets(truth, config, mok, thresholds)
    _emit(args.out, formats.write_onsets, onsets)


def _emit(path, writer, *payload):
    """Write through ``writer`` to ``path``, or to stdout when no path is given."""
    if path:
        writer(path, *payload)
        return
    with tempfile.TemporaryDirectory() as tmp:
        target = os.path.join(tmp, "out.csv")
        writer(target, *payload)
        with open(target) as fh:
            sys.stdout.write(fh.read())


def cmd_clim_fit(args):
    onsets = formats.read_onsets(args.onsets)
    years = set(parse_years(args.years)) if args.years else None
    by_cell = {}
    for (g, y), d in sorted(onsets.items()):
        by_cell.setdefault(g, [])
        if d is not None and (years is None or y in years):
            by_cell[g].append(d)
    kdes = {g: fit_kde([season_doy(d) for d in ds], grid_id=g, floor=args.floor) for g, ds in by_cell.items()}
    formats.write_climatology(args.out, kdes)


def _read_instances(path):
    """``(grid_id, init_date)`` pairs from any CSV with those two columns."""
    return [(row["grid_id"], formats._date(row["init_date"], n)) for n, row in formats.read_rows(path)]


def cmd_clim_predict(args):
    kdes = formats.read_climatology(args.model)
    fn = static_bin_probs if args.kind == "static" else evolving_bin_probs
    inst = _read_instances(args.inits)
    missing = sorted({g for g, _ in inst} - set(kdes))
    if missing:
        raise DataError(f"no climatology for {missing[0]}")
    probs = np.array([fn(kdes[g], d) for g, d in inst])
    _emit(args.out, formats.write_predictions, [g for g, _ in inst], [d for _, d in inst], probs)


def cmd_blend_features(args):
    ensembles = ingest.parse_forecast_csv(args.forecasts)
    kdes = formats.read_climatology(args.clim)
    onsets = formats.read_onsets(args.onsets) if args.onsets else {}
    pairs = {}
    for e in ensembles:
        pairs.setdefault((e.grid_id, e.init_date), {})[e.model_id] = e
    rows = []
    for (g, init), models in sorted(pairs.items()):
        if args.model_a not in models or args.model_b not in models:
            raise DataError(f"{g} {init}: need forecasts from both models")
        if g not in kdes:
            raise DataError(f"no climatology for {g}")
        outcome = None
        if (g, init.year) in onsets:
            onset = onsets[(g, init.year)]
            if onset is not None and onset <= init:
                continue
            outcome = outcome_bin(onset, init)
        pi = winsorize_logit(evolving_bin_probs(kdes[g], init)[:N_LEAD])
        alpha, beta = rainfall_features(models[args.model_a], args.threshold)
        nu, mu = rainfall_features(models[args.model_b], args.threshold)
        rows.append(FeatureRow(g, init, pi, alpha, nu, beta, mu, outcome))
    if not rows:
        raise DataError("no forecast instances")
    formats.write_features(args.out, rows)


def cmd_blend_train(args):
    rows = formats.read_features(args.features)
    model = fit_blend(rows, ridge=args.ridge)
    formats.write_blend_model(args.out, model)


def cmd_blend_predict(args):
    model = formats.read_blend_model(args.model)
    rows = formats.read_features(args.features)
    probs = predict_blend(model, rows)
    _emit(args.out, formats.write_predictions, [r.grid_id for r in rows], [r.init_date for r in rows], probs)


def _outcomes(grid_ids, init_dates, onsets):
    out = []
    for g, d in zip(grid_ids, init_dates):
        if (g, d.year) not in onsets:
            raise DataError(f"{g} {d}: no observed onset record for {d.year}")
        onset = onsets[(g, d.year)]
        if onset is not None and onset <= d:
            raise DataError(f"{g} {d}: observed onset on or before initialization")
        out.append(outcome_bin(onset, d))
    return np.array(out, dtype=int)


def _aligned(path, keys):
    """Predictions from ``path`` reordered to ``keys``."""
    g, d, p = formats.read_predictions(path)
    index = {k: i for i, k in enumerate(zip(g, d))}
    try:
        return p[[index[k] for k in keys]]
    except KeyError as exc:
        raise DataError(f"{path}: missing forecast {exc.args[0]}") from None


def cmd_calibrate(args):
    g, d, raw = formats.read_predictions(args.raw)
    y = _outcomes(g, d, formats.read_onsets(args.truth))
    _emit(args.out, formats.write_platt, platt_fit(raw, y))


def cmd_mme_fit(args):
    paths = [p for p in args.components.split(",") if p]
    if len(paths) < 2:
        raise ValidationError("need at least two components")
    g, d, first = formats.read_predictions(paths[0])
    keys = list(zip(g, d))
    comps = [first] + [_aligned(p, keys) for p in paths[1:]]
    y = _outcomes(g, d, formats.read_onsets(args.truth))
    fit = optimize_mme_weights(comps, y)
    ref_rps = None
    if args.reference:
        ref_rps = rps(_aligned(args.reference, keys), y)
    names = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    _emit(args.out, formats.write_weights, names, fit, ref_rps)


def cmd_eval_run(args):
    g, d, probs = formats.read_predictions(args.pred)
    y = _outcomes(g, d, formats.read_onsets(args.truth))
    scored = ScoredSet(probs, y, g, d)
    reference = None
    if args.reference:
        reference = ScoredSet(_aligned(args.reference, list(zip(g, d))), y, g, d)
    report = evaluate(scored, reference, args.auc)
    if args.out:
        formats.write_reports(args.out, {args.name: report})
    print("n,brier,rps,auc,bss,rpss")
    print(f"{report.n}," + ",".join(formats.fmt6(v) for v in (report.brier, report.rps, report.auc, report.bss, report.rpss)))
    if args.by == "lead":
        print("bin,brier,bss,auc")
        for row in report.per_lead:
            print(f"{row['bin']},{formats.fmt6(row['brier'])},{formats.fmt6(row['bss'])},{formats.fmt6(row['auc'])}")
    elif args.by == "year":
        print("year,n,bss,auc")
        for row in report.per_year:
            print(f"{row['year']},{row['n']},{formats.fmt6(row['bss'])},{formats.fmt6(row['auc'])}")


# -- decision lab -----------------------------------------------------------------------------


def cmd_decision_demo(args):
    problem, scheme = decision.insurance_problem(), decision.insurance_scheme()
    prior_eu = decision.expected_payoffs(problem, problem.prior)
    informed = decision.informed_expected_payoff(problem, scheme)
    incomes = problem.income @ problem.prior
    print("quantity,value")
    print(f"EU no insurance,{prior_eu[0]:.6f}")
    print(f"EU insurance,{prior_eu[1]:.6f}")
    print(f"EU forecast-informed,{informed:.6f}")
    print(f"income no insurance,{incomes[0]:.6f}")
    print(f"income insurance,{incomes[1]:.6f}")
    print(f"income forecast-informed,{decision.expected_income(problem, scheme):.6f}")
    rng = np.random.default_rng(args.seed)
    sweeps = (
        ("coarsening never helps", decision.sweep_coarsening(rng, 100)),
        ("forecast value nonnegative", decision.sweep_nonnegative_value(rng, 200)),
        ("benefiting >= expected changes", decision.sweep_change_bound(rng, 200)),
    )
    print("sweep,cases,violations,worst_margin")
    for name, res in sweeps:
        print(f"{name},{res.cases},{res.violations},{res.worst_margin:.6g}")


def read_problems(path):
    """Problems and schemes from the long CSV ``problem_id,record,i,j,value``.

    Records: ``prior`` (i = state), ``payoff`` (i = action, j = state),
    ``signal`` (i = signal) and ``posterior`` (i = signal, j = state).
    """
    raw = {}
    for lineno, row in formats.read_rows(path, ["problem_id", "record", "i", "j", "value"]):
        rec = row["record"]
        if rec not in ("prior", "payoff", "signal", "posterior"):
            raise MalformedRow(lineno, f"unknown record {rec!r}")
        try:
            i = int(row["i"])
            j = int(row["j"]) if row["j"] else 0
        except ValueError:
            raise MalformedRow(lineno, "bad index") from None
        raw.setdefault(row["problem_id"], {}).setdefault(rec, {})[(i, j)] = formats._float(row["value"], lineno)

    def dense(cells, name, pid):
        if not cells:
            raise DataError(f"problem {pid}: missing {name} records")
        shape = tuple(max(k[a] for k in cells) + 1 for a in (0, 1))
        out = np.full(shape, np.nan)
        for k, v in cells.items():
            out[k] = v
        if np.isnan(out).any():
            raise DataError(f"problem {pid}: incomplete {name} records")
        return out

    problems, schemes = [], []
    for pid in sorted(raw):
        rec = raw[pid]
        prior = dense(rec.get("prior"), "prior", pid)[:, 0]
        problems.append(decision.DecisionProblem(prior, dense(rec.get("payoff"), "payoff", pid)))
        signal = dense(rec.get("signal"), "signal", pid)[:, 0]
        schemes.append(decision.ForecastScheme(signal, dense(rec.get("posterior"), "posterior", pid)))
    return sorted(raw), problems, schemes


def cmd_decision_check(args):
    ids, problems, schemes = read_problems(args.problems)
    violations = 0
    print("problem_id,value,min_coarsening_margin")
    for pid, problem, scheme in zip(ids, problems, schemes):
        value = decision.scheme_value(problem, scheme)
        n = len(scheme.signal_prob)
        margin = float("inf")
        # every two-message coarsening of the signals
        for mask in range(1, 2 ** (n - 1)):
            message_of = [(mask >> s) & 1 for s in range(n)]
            vp, vd = decision.compare_probabilistic_vs_deterministic(problem, scheme, message_of)
            margin = min(margin, vp - vd)
        violations += (value < -decision.TOL) + (margin < -decision.TOL)
        print(f"{pid},{value:.6g},{margin:.6g}")
    changes, count = decision.decision_change_bound(problems, schemes)
    violations += count < changes - decision.TOL
    print(f"expected_changes,{changes:.6g}")
    print(f"strictly_benefiting,{count}")
    print(f"violations,{violations}")
    if violations:
        raise ValidationError(f"{violations} property violations")


# -- parser -------------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_VALIDATION)


def build_parser():
    p = _Parser(prog="onsetblend", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic rain/forecast/onset dataset")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    onset = sub.add_parser("onset").add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = onset.add_parser("detect", help="observed onset date per cell and year")
    s.add_argument("--rain", required=True)
    s.add_argument("--config")
    s.add_argument("--variant", default="none")
    s.add_argument("--mok")
    s.add_argument("--out")
    s.set_defaults(func=cmd_onset_detect)

    clim = sub.add_parser("clim").add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = clim.add_parser("fit", help="fit per-cell onset climatologies")
    s.add_argument("--onsets", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--years")
    s.add_argument("--floor", type=float, default=1.0)
    s.set_defaults(func=cmd_clim_fit)
    s = clim.add_parser("predict", help="static or evolving bin probabilities")
    s.add_argument("--model", required=True)
    s.add_argument("--inits", required=True, help="CSV with grid_id and init_date columns")
    s.add_argument("--kind", choices=("static", "evolving"), default="evolving")
    s.add_argument("--out")
    s.set_defaults(func=cmd_clim_predict)

    blend = sub.add_parser("blend").add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = blend.add_parser("features", help="build blend features from forecasts")
    s.add_argument("--forecasts", required=True)
    s.add_argument("--clim", required=True)
    s.add_argument("--threshold", type=float, required=True)
    s.add_argument("--onsets")
    s.add_argument("--model-a", default="A")
    s.add_argument("--model-b", default="B")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_blend_features)
    s = blend.add_parser("train")
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ridge", type=float, default=1e-6)
    s.set_defaults(func=cmd_blend_train)
    s = blend.add_parser("predict")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_blend_predict)

    s = sub.add_parser("calibrate", help="fit per-bin Platt parameters")
    s.add_argument("--raw", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_calibrate)

    mme = sub.add_parser("mme").add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = mme.add_parser("fit", help="post-hoc multimodel ensemble weights")
    s.add_argument("--components", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--reference")
    s.add_argument("--out")
    s.set_defaults(func=cmd_mme_fit)

    ev = sub.add_parser("eval").add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = ev.add_parser("run", help="score predictions against observed onsets")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--reference")
    s.add_argument("--auc", choices=("strict", "half"), default="half")
    s.add_argument("--by", choices=("lead", "year"))
    s.add_argument("--name", default="model")
    s.add_argument("--out", help="prefix for report CSVs")
    s.set_defaults(func=cmd_eval_run)

    dec = sub.add_parser("decision").add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = dec.add_parser("demo", help="insurance example and property sweeps")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_decision_demo)
    s = dec.add_parser("check", help="property checks on user problems")
    s.add_argument("--problems", required=True)
    s.set_defaults(func=cmd_decision_check)

    s = sub.add_parser("run", help="end-to-end experiment")
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--cv", choices=("loocv", "split"))
    s.add_argument("--years")
    s.add_argument("--train-years", dest="train_years")
    s.add_argument("--test-years", dest="test_years")
    s.add_argument("--auc", choices=("strict", "half"))
    s.add_argument("--ridge", type=float)
    s.add_argument("--variant")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_run)
    return p


def exit_code(exc):
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    return EXIT_DATA


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except OnsetBlendError as exc:
        where = f"{exc.stage}: " if hasattr(exc, "stage") else ""
        print(f"onsetblend: {where}{type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"onsetblend: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
