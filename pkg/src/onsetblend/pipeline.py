"""End-to-end experiment: onsets -> climatology -> blend -> baselines -> scores."""

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from . import ingest
from .baselines import mme_predict, optimize_mme_weights, platt_apply, platt_fit, raw_model_bin_probs
from .blend import N_LEAD, fit_blend_arrays, predict_blend, rainfall_features, winsorize_logit
from .climatology import DEFAULT_SUPPORT, evolving_bin_probs, fit_kde, static_bin_probs
from .errors import DataError, ValidationError
from .evaluate import ScoredSet, concat_scored, evaluate
from .onset import OnsetConfig, detect_onsets
from .seasons import N_BINS, MokPolicy, outcome_bin, season_doy

MODELS = ("static", "evolving", "raw_a", "raw_b", "calibrated_b", "blend", "mme")


@dataclass
class Dataset:
    """Forecast instances (one per grid cell and initialization) as arrays."""

    grid_ids: np.ndarray
    init_dates: list
    years: np.ndarray
    init_doys: np.ndarray
    outcomes: np.ndarray
    wet_a: np.ndarray
    dry_a: np.ndarray
    wet_b: np.ndarray
    dry_b: np.ndarray
    raw_a: np.ndarray
    raw_b: np.ndarray
    onset_doys: dict = field(default_factory=dict)  # (grid_id, year) -> doy or None
    thresholds: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.outcomes)

    def mask_years(self, years):
        return np.isin(self.years, list(years))

    def scored(self, probs, mask=None):
        mask = np.ones(len(self), bool) if mask is None else mask
        dates = [d for d, m in zip(self.init_dates, mask) if m]
        return ScoredSet(
            probs, self.outcomes[mask], list(self.grid_ids[mask]), dates, self.years[mask]
        )


def detect_all_onsets(truth, config, mok_dates=None, thresholds=None):
    """``{(grid_id, year): onset_date or None}`` for every series and year."""
    out = {}
    for series in truth:
        cfg = config if thresholds is None else config.with_threshold(thresholds[series.grid_id])
        for rec in detect_onsets(series, cfg, mok_dates):
            out[(rec.grid_id, rec.year)] = rec.onset_date
    return out


def forecast_config(config):
    """Onset config for forecast members: true MOK is replaced by June 2."""
    if config.mok_policy.kind == "true":
        return OnsetConfig(**{**config.__dict__, "mok_policy": MokPolicy("clim", (6, 2))})
    return config


def build_dataset(ensembles, onsets, thresholds, config, model_a="A", model_b="B"):
    """Pair both models' ensembles per (grid, init) and compute every input.

    Instances whose observed onset is on or before the initialization date
    are dropped.
    """
    pairs = {}
    for e in ensembles:
        if e.model_id in (model_a, model_b):
            pairs.setdefault((e.grid_id, e.init_date), {})[e.model_id] = e
    fcfg = forecast_config(config)
    rows = []
    for (grid_id, init), models in sorted(pairs.items()):
        if len(models) != 2:
            raise DataError(f"{grid_id} {init}: need forecasts from both {model_a} and {model_b}")
        if (grid_id, init.year) not in onsets:
            raise DataError(f"{grid_id}: no observed onset record for {init.year}")
        onset = onsets[(grid_id, init.year)]
        if onset is not None and onset <= init:
            continue
        thr = thresholds[grid_id]
        ea, eb = models[model_a], models[model_b]
        wa, da = rainfall_features(ea, thr)
        wb, db = rainfall_features(eb, thr)
        cfg = fcfg.with_threshold(thr)
        rows.append(
            (grid_id, init, outcome_bin(onset, init), wa, da, wb, db,
             raw_model_bin_probs(ea, cfg), raw_model_bin_probs(eb, cfg))
        )
    if not rows:
        raise DataError("no forecast instances before onset")
    cols = list(zip(*rows))
    init_dates = list(cols[1])
    onset_doys = {k: (None if v is None else season_doy(v)) for k, v in onsets.items()}
    return Dataset(
        grid_ids=np.array(cols[0]),
        init_dates=init_dates,
        years=np.array([d.year for d in init_dates]),
        init_doys=np.array([season_doy(d) for d in init_dates]),
        outcomes=np.array(cols[2], dtype=int),
        wet_a=np.array(cols[3]),
        dry_a=np.array(cols[4]),
        wet_b=np.array(cols[5]),
        dry_b=np.array(cols[6]),
        raw_a=np.array(cols[7]),
        raw_b=np.array(cols[8]),
        onset_doys=onset_doys,
        thresholds=dict(thresholds),
    )


def fit_climatologies(dataset, train_years, support=DEFAULT_SUPPORT, floor=1.0):
    """Per-cell KDE from the onsets of ``train_years`` only."""
    train_years = set(train_years)
    kdes = {}
    for grid_id in np.unique(dataset.grid_ids):
        doys = [
            d for (g, y), d in sorted(dataset.onset_doys.items())
            if g == grid_id and y in train_years and d is not None
        ]
        if len(doys) < 1:
            raise DataError(f"{grid_id}: no training onsets for climatology")
        kdes[grid_id] = fit_kde(doys, support=support, grid_id=grid_id, floor=floor)
    return kdes


def climatology_probs(dataset, kdes, mask=None):
    """Static and evolving bin probabilities for the selected instances."""
    idx = np.flatnonzero(np.ones(len(dataset), bool) if mask is None else mask)
    static = np.empty((len(idx), N_BINS))
    evolving = np.empty((len(idx), N_BINS))
    for k, i in enumerate(idx):
        kde = kdes[dataset.grid_ids[i]]
        static[k] = static_bin_probs(kde, int(dataset.init_doys[i]))
        evolving[k] = evolving_bin_probs(kde, int(dataset.init_doys[i]))
    return static, evolving


def blend_base(dataset, evolving, mask):
    """``(n, 5, 4)`` base features (pi, alpha, nu, beta, mu) for ``mask`` rows."""
    pi = winsorize_logit(evolving[:, :N_LEAD])
    return np.stack(
        [pi, dataset.wet_a[mask], dataset.wet_b[mask], dataset.dry_a[mask], dataset.dry_b[mask]],
        axis=1,
    )


@dataclass
class FoldModels:
    kdes: dict
    blend: object
    platt: object


def train_fold(dataset, train_mask, train_years, ridge=1e-6, floor=1.0):
    """Climatology, blend and Platt parameters from training instances only."""
    kdes = fit_climatologies(dataset, train_years, floor=floor)
    _, evolving = climatology_probs(dataset, kdes, train_mask)
    base = blend_base(dataset, evolving, train_mask)
    y = dataset.outcomes[train_mask]
    model = fit_blend_arrays(base, y, ridge=ridge)
    platt = platt_fit(dataset.raw_b[train_mask], y)
    return FoldModels(kdes, model, platt)


def predict_fold(dataset, models, test_mask):
    """Predictions of every per-instance model (all but the MME)."""
    static, evolving = climatology_probs(dataset, models.kdes, test_mask)
    base = blend_base(dataset, evolving, test_mask)
    return {
        "static": static,
        "evolving": evolving,
        "raw_a": dataset.raw_a[test_mask],
        "raw_b": dataset.raw_b[test_mask],
        "calibrated_b": platt_apply(models.platt, dataset.raw_b[test_mask]),
        "blend": predict_blend(models.blend, base),
    }


MME_COMPONENTS = ("raw_a", "raw_b", "evolving")


@dataclass
class ExperimentResult:
    predictions: dict  # model -> ScoredSet
    reports: dict  # model -> EvalReport
    mme: object
    final_models: FoldModels | None = None

    def rpss(self, model):
        return self.reports[model].rpss


def _finish(dataset, mask, preds, tie_policy):
    """Post-hoc MME on the scored set, then reports vs static climatology."""
    y = dataset.outcomes[mask]
    mme = optimize_mme_weights([preds[c] for c in MME_COMPONENTS], y)
    preds["mme"] = mme_predict(mme.weights, [preds[c] for c in MME_COMPONENTS])
    scored = {m: dataset.scored(preds[m], mask) for m in MODELS}
    reports = {m: evaluate(scored[m], scored["static"], tie_policy) for m in MODELS}
    return scored, reports, mme


def run_loocv(dataset, years=None, ridge=1e-6, tie_policy="half", floor=1.0):
    """Leave-one-year-out predictions for every model; MME weights post hoc."""
    years = sorted(set(dataset.years.tolist()) if years is None else set(years))
    if len(years) < 2:
        raise ValidationError("leave-one-year-out needs at least two years")
    in_period = dataset.mask_years(years)
    order = np.flatnonzero(in_period)
    preds = {m: np.empty((len(dataset), N_BINS)) for m in MODELS if m != "mme"}
    for year in years:
        test = dataset.years == year
        train = in_period & ~test
        models = train_fold(dataset, train, [y for y in years if y != year], ridge, floor)
        for m, p in predict_fold(dataset, models, test).items():
            preds[m][test] = p
    preds = {m: p[order] for m, p in preds.items()}
    scored, reports, mme = _finish(dataset, in_period, preds, tie_policy)
    return ExperimentResult(scored, reports, mme)


def run_split(dataset, train_years, test_years, ridge=1e-6, tie_policy="half", floor=1.0):
    """Train on ``train_years``, score ``test_years``; MME weights post hoc on the test set."""
    if set(train_years) & set(test_years):
        raise ValidationError("train and test years overlap")
    train = dataset.mask_years(train_years)
    test = dataset.mask_years(test_years)
    if not test.any():
        raise DataError("no forecast instances in the test years")
    models = train_fold(dataset, train, train_years, ridge, floor)
    preds = predict_fold(dataset, models, test)
    scored, reports, mme = _finish(dataset, test, preds, tie_policy)
    return ExperimentResult(scored, reports, mme, models)


# -- synthetic world convenience ----------------------------------------------------


def synthetic_world(synth, onset_config=None):
    """Truth, observed onsets, thresholds and forecasts of the synthetic world.

    Forecasts are issued from the configured start through the day before
    observed onset.
    """
    thresholds = {c.id: c.five_day_threshold_mm for c in synth.cells()}
    if onset_config is None:
        onset_config = default_synthetic_onset_config(synth)
    truth = ingest.generate_synthetic_truth(synth)
    onsets = detect_all_onsets(truth, onset_config, thresholds=thresholds)
    stops = {k: v - dt.timedelta(days=1) for k, v in onsets.items() if v is not None}
    ensembles = ingest.generate_synthetic_forecasts(truth, synth, stop_dates=stops)
    return truth, onsets, thresholds, ensembles


def default_synthetic_onset_config(synth):
    return OnsetConfig.for_variant("none", spell_total_mm=synth.five_day_threshold_mm)


def synthetic_dataset(synth, onset_config=None):
    """Generate the synthetic world and assemble its dataset.

    Returns ``(dataset, truth, onsets, ensembles)``.
    """
    if onset_config is None:
        onset_config = default_synthetic_onset_config(synth)
    truth, onsets, thresholds, ensembles = synthetic_world(synth, onset_config)
    dataset = build_dataset(ensembles, onsets, thresholds, onset_config, synth.model_a, synth.model_b)
    return dataset, truth, onsets, ensembles
