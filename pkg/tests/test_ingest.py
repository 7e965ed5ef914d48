import datetime as dt
import filecmp

import numpy as np
import pytest

from onsetblend.errors import (
    LeadWindowExceedsTruth,
    MalformedRow,
    MissingDay,
    NegativeRain,
    RaggedEnsemble,
    ValidationError,
)
from onsetblend.ingest import (
    DailyRainSeries,
    ForecastEnsemble,
    GridCell,
    SyntheticConfig,
    generate_synthetic_forecasts,
    generate_synthetic_truth,
    init_dates,
    parse_forecast_csv,
    parse_rainfall_csv,
    synthetic_onset_doys,
    write_forecast_csv,
    write_rainfall_csv,
)
from onsetblend.onset import detect_onset
from onsetblend.pipeline import default_synthetic_onset_config
from onsetblend.seasons import season_doy


def write(tmp_path, text, name="f.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_row_rainfall(tmp_path):
    p = write(tmp_path, "grid_id,date,rain_mm\ng,2000-06-01,0\ng,2000-06-02,5\ng,2000-06-03,12\n")
    (s,) = parse_rainfall_csv(p)
    assert s.grid_id == "g" and s.start_date == dt.date(2000, 6, 1)
    assert list(s.values) == [0, 5, 12]


def test_missing_day(tmp_path):
    p = write(tmp_path, "grid_id,date,rain_mm\ng,2000-06-01,0\ng,2000-06-03,1\n")
    with pytest.raises(MissingDay):
        parse_rainfall_csv(p)


def test_rainfall_row_errors(tmp_path):
    with pytest.raises(NegativeRain):
        parse_rainfall_csv(write(tmp_path, "grid_id,date,rain_mm\ng,2000-06-01,-1\n"))
    with pytest.raises(MalformedRow) as err:
        parse_rainfall_csv(write(tmp_path, "grid_id,date,rain_mm\ng,2000-06-01,1\ng,2000-13-01,1\n"))
    assert err.value.line == 3
    with pytest.raises(MalformedRow):
        parse_rainfall_csv(write(tmp_path, "grid,date,rain\n"))
    with pytest.raises(MalformedRow):
        parse_rainfall_csv(write(tmp_path, "grid_id,date,rain_mm\ng,2000-06-01\n"))
    with pytest.raises(MalformedRow):
        parse_rainfall_csv(write(tmp_path, "grid_id,date,rain_mm\ng,2000-06-01,nan\n"))
    with pytest.raises(MalformedRow):
        parse_rainfall_csv(write(tmp_path, "grid_id,date,rain_mm\ng,2000-06-01,1\ng,2000-06-01,2\n"))


def test_interleaved_grids_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    start = dt.date(2001, 1, 1)
    a = DailyRainSeries("a", start, np.round(rng.gamma(0.5, 4, 365), 3))
    b = DailyRainSeries("b", start, np.round(rng.gamma(0.5, 4, 365), 3))
    lines = ["grid_id,date,rain_mm"]
    for i in range(365):
        for s in (a, b):
            lines.append(f"{s.grid_id},{s.date_at(i)},{s.values[i]:.3f}")
    parsed = parse_rainfall_csv(write(tmp_path, "\n".join(lines) + "\n"))
    assert [s.grid_id for s in parsed] == ["a", "b"]
    for got, want in zip(parsed, (a, b)):
        assert len(got) == 365 and np.array_equal(got.values, want.values)
    write_rainfall_csv(parsed, tmp_path / "out.csv")
    again = parse_rainfall_csv(tmp_path / "out.csv")
    assert all(np.array_equal(x.values, y.values) for x, y in zip(again, parsed))


def test_small_forecast_file(tmp_path):
    rows = ["model,grid_id,init_date,member,lead_day,rain_mm"]
    for m in (1, 2):
        for lead in (1, 2, 3):
            rows.append(f"A,g,2000-06-01,{m},{lead},{10 * m + lead}")
    (e,) = parse_forecast_csv(write(tmp_path, "\n".join(rows) + "\n"))
    assert e.members.shape == (2, 3)
    assert e.members[1, 2] == 23
    with pytest.raises(RaggedEnsemble):
        parse_forecast_csv(write(tmp_path, "\n".join(rows[:-1]) + "\n"))
    with pytest.raises(MalformedRow):
        parse_forecast_csv(write(tmp_path, "\n".join(rows + [rows[-1]]) + "\n"))


def test_domain_validation():
    with pytest.raises(ValidationError):
        GridCell("g", 95.0, 0.0, 20.0)
    with pytest.raises(ValidationError):
        GridCell("g", 10.0, 0.0, 0.0)
    with pytest.raises(NegativeRain):
        DailyRainSeries("g", dt.date(2000, 1, 1), [1.0, -0.5])
    with pytest.raises(ValidationError):
        ForecastEnsemble("A", "g", dt.date(2000, 1, 1), np.zeros((0, 31)))
    with pytest.raises(ValidationError):
        SyntheticConfig(forecast_skill=(0.1, 0.5, 0.3, 0.1))


def test_forecast_round_trip_30_members(tmp_path):
    cfg = SyntheticConfig(seed=3, n_years=1, n_cells=1, members_b=30, init_end=(5, 8))
    truth = generate_synthetic_truth(cfg)
    ens = generate_synthetic_forecasts(truth, cfg)
    write_forecast_csv(ens, tmp_path / "fc.csv")
    parsed = parse_forecast_csv(tmp_path / "fc.csv")
    assert len(parsed) == len(ens)
    for got, want in zip(parsed, ens):
        assert (got.model_id, got.grid_id, got.init_date) == (want.model_id, want.grid_id, want.init_date)
        assert np.array_equal(got.members, want.members)
    assert max(e.n_members for e in parsed) == 30


def test_synthetic_determinism(tmp_path):
    cfg = SyntheticConfig(seed=9, n_years=3, n_cells=2)
    for k in (1, 2):
        write_rainfall_csv(generate_synthetic_truth(cfg), tmp_path / f"r{k}.csv")
    assert filecmp.cmp(tmp_path / "r1.csv", tmp_path / "r2.csv", shallow=False)
    other = generate_synthetic_truth(SyntheticConfig(seed=10, n_years=3, n_cells=2))
    assert not np.array_equal(other[0].values, generate_synthetic_truth(cfg)[0].values)


def test_onset_every_year():
    cfg = SyntheticConfig(seed=1, n_years=30)
    onset_cfg = default_synthetic_onset_config(cfg)
    injected = synthetic_onset_doys(cfg)
    for series in generate_synthetic_truth(cfg):
        for year in cfg.years:
            chunk = series.slice_dates(dt.date(year, 1, 1), dt.date(year, 12, 31))
            onset = detect_onset(chunk, onset_cfg)
            assert onset is not None
            assert season_doy(onset) == injected[(series.grid_id, year)]


def test_zero_spread_fixes_onset_day():
    cfg = SyntheticConfig(seed=2, n_years=10, n_cells=1, onset_spread_days=0.0)
    onset_cfg = default_synthetic_onset_config(cfg)
    (series,) = generate_synthetic_truth(cfg)
    doys = set()
    for year in cfg.years:
        chunk = series.slice_dates(dt.date(year, 1, 1), dt.date(year, 12, 31))
        doys.add(season_doy(detect_onset(chunk, onset_cfg)))
    assert len(doys) == 1


def test_perfect_skill_reproduces_truth():
    cfg = SyntheticConfig(seed=4, n_years=1, n_cells=1, forecast_skill=(1, 1, 1, 1), members_b=1)
    (series,) = generate_synthetic_truth(cfg)
    for e in generate_synthetic_forecasts([series], cfg):
        i0 = series.index_of(e.init_date) + 1
        assert np.allclose(e.members[0], series.values[i0 : i0 + 31], atol=1e-9)


def _week_correlations(skill):
    cfg = SyntheticConfig(seed=5, n_years=8, n_cells=2, forecast_skill=skill, members_b=1)
    truth = generate_synthetic_truth(cfg)
    by_id = {s.grid_id: s for s in truth}
    fc, obs = [], []
    for e in generate_synthetic_forecasts(truth, cfg):
        s = by_id[e.grid_id]
        i0 = s.index_of(e.init_date) + 1
        fc.append(e.members[0, :28])
        obs.append(s.values[i0 : i0 + 28])
    fc, obs = np.array(fc), np.array(obs)
    assert len(fc) >= 1000
    return [np.corrcoef(fc[:, 7 * w : 7 * w + 7].ravel(), obs[:, 7 * w : 7 * w + 7].ravel())[0, 1] for w in range(4)]


def test_zero_skill_is_independent_of_truth():
    assert all(abs(r) < 0.1 for r in _week_correlations((0, 0, 0, 0)))


def test_skill_decays_by_week():
    r = _week_correlations((0.9, 0.6, 0.3, 0.1))
    assert all(a > b for a, b in zip(r, r[1:]))


def test_forecast_needs_truth_coverage():
    cfg = SyntheticConfig(seed=1, n_years=1, n_cells=1)
    (series,) = generate_synthetic_truth(cfg)
    short = DailyRainSeries(series.grid_id, series.start_date, series.values[:200])
    with pytest.raises(LeadWindowExceedsTruth):
        generate_synthetic_forecasts([short], cfg)


def test_init_dates_twice_weekly():
    cfg = SyntheticConfig()
    dates = init_dates(2001, cfg)
    assert {d.weekday() for d in dates} == {0, 3}
    assert dates[0] >= dt.date(2001, 5, 1) and dates[-1] <= dt.date(2001, 8, 31)
    assert init_dates(2001, cfg, last=dt.date(2001, 5, 10))[-1] <= dt.date(2001, 5, 10)
