import pytest

import ridepool


def small_stream(**kw):
    args = dict(grid=3, days=2, steps_per_day=96, daily_requests=60, seed=3)
    args.update(kw)
    return ridepool.synth(**args)


def test_stream_round_trip():
    s = small_stream()
    assert s.zones == 9
    assert s.days == 2
    assert s.request_count() > 0
    back = ridepool.Stream.from_text(s.to_text())
    assert back.to_text() == s.to_text()
    grid = s.counts_at(1)
    assert len(grid) == 9 and all(grid[i][i] == 0 for i in range(9))


def test_simulate_conserves_and_repeats():
    s = small_stream()
    a = ridepool.simulate(s, predictor="perfect", horizon=2, evaluations=300)
    b = ridepool.simulate(s, predictor="perfect", horizon=2, evaluations=300)
    assert a["steps_csv"] == b["steps_csv"]
    assert a["arrivals"] == a["served"] + a["expired_unserved"] + a["residual"]
    assert a["smape_cell"] == 0.0
    base = ridepool.simulate(s, evaluations=300)
    assert base["smape_cell"] is None
    assert isinstance(ridepool.improvement(base, a), float)


def test_periodic_stream_makes_yesterday_exact():
    s = ridepool.repeat_day(small_stream(), 1, 3)
    r = ridepool.simulate(s, predictor="yesterday", horizon=1, evaluations=300, day=2)
    assert r["smape_cell"] == 0.0


def test_metrics():
    assert ridepool.smape([1.0, 0.0], [0.0, 0.0]) == pytest.approx(100.0)
    q = ridepool.quality_of_service([12, 8], [10, 8], [100, 102], [5, 5], 102)
    assert q == pytest.approx(-0.5666666666666667)


def test_errors_map_to_python():
    s = small_stream()
    with pytest.raises(ridepool.ConfigError):
        ridepool.simulate(s, predictor="perfect", horizon=9)
    with pytest.raises(ridepool.ConfigError):
        ridepool.simulate(s, predictor="lstm", horizon=1)
    with pytest.raises(ridepool.FormatError):
        ridepool.Stream.from_text("not a stream\n")
    with pytest.raises(ridepool.RidepoolError):
        ridepool.improvement({"label": "a", "total_reward": 1.0}, {"label": "b", "total_reward": 1.0})
