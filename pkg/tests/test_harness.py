import json
from dataclasses import replace

import numpy as np
import pytest

from spikeplan.harness import (
    SegmentRecord, TrialConfig, metrics_from_records, records_from_csv, records_to_csv,
    run_trial, run_trials, signal_histogram, summarize, synaptic_change_report,
)
from spikeplan.network import GridSpec

SHORT = dict(segments=8, trials=2, n_samples=10, replay=3)


def test_config_validation():
    with pytest.raises(ValueError):
        TrialConfig(segments=0)
    with pytest.raises(ValueError):
        TrialConfig(kind="sometimes")
    with pytest.raises(ValueError):
        TrialConfig(ctx_prob=1.5)
    c = TrialConfig()
    assert (c.segments, c.trials, c.n_samples, c.replay) == (300, 10, 40, 20)


def test_kind_none_never_updates():
    ms = run_trials(TrialConfig(kind="none", **SHORT))
    assert all(m.updates_triggered == 0 for m in ms)
    assert all(np.array_equal(m.W_initial, m.W_final) for m in ms)


def test_aggregation_matches_records():
    cfg = TrialConfig(kind="global", **SHORT)
    ms = run_trials(cfg)
    s = summarize(cfg, ms)
    upd = [sum(r.triggered for r in m.records) for m in ms]
    assert s["updates_triggered"]["mean"] == pytest.approx(np.mean(upd))
    assert s["updates_triggered"]["std"] == pytest.approx(np.std(upd))
    plan = [r.planning_time for m in ms for r in m.records]
    assert s["planning_time"]["mean"] == pytest.approx(np.mean(plan))
    json.dumps(s)


def test_records_csv_round_trip():
    cfg = TrialConfig(kind="local", **SHORT)
    ms = run_trials(cfg)
    recs = [r for m in ms for r in m.records]
    text = records_to_csv(recs)
    assert text.startswith("# spikeplan-segments v1\n")
    back = records_from_csv(text)
    assert back == recs
    rebuilt = metrics_from_records(back, 2)
    for a, b in zip(ms, rebuilt):
        assert (a.updates_triggered, a.targets_reached) == (b.updates_triggered, b.targets_reached)
    with pytest.raises(ValueError):
        records_from_csv(text.replace("v1", "v9", 1))
    with pytest.raises(ValueError):
        records_from_csv("trial,segment\n")


def test_full_run_is_reproducible():
    cfg = TrialConfig(kind="global", **SHORT)
    a = records_to_csv([r for m in run_trials(cfg) for r in m.records])
    b = records_to_csv([r for m in run_trials(cfg) for r in m.records])
    assert a == b
    c = records_to_csv([r for m in run_trials(replace(cfg, seed=1)) for r in m.records])
    assert a != c


def test_parallel_trials_match_serial():
    cfg = TrialConfig(kind="global", **SHORT)
    serial = run_trials(cfg)
    parallel = run_trials(cfg, jobs=2)
    for a, b in zip(serial, parallel):
        assert a.records == b.records
        assert a.W_final.tobytes() == b.W_final.tobytes()


def test_synaptic_change_examples():
    g = GridSpec(2, 3)
    W = np.random.default_rng(0).uniform(-1, 1, (9, 9))
    i, o = synaptic_change_report(W, W, g)
    assert np.all(i == 0) and np.all(o == 0)
    W2 = W.copy()
    W2[:, 4] -= 0.03
    i, o = synaptic_change_report(W, W2, g)
    assert i.reshape(-1)[4] == pytest.approx(-0.03)
    D = np.random.default_rng(1).normal(0, 0.1, (9, 9))
    i, o = synaptic_change_report(W, W + D, g)
    for n in range(9):
        assert i.reshape(-1)[n] == pytest.approx(sum(D[k, n] for k in range(9)) / 9)
        assert o.reshape(-1)[n] == pytest.approx(sum(D[n, k] for k in range(9)) / 9)
    with pytest.raises(ValueError):
        synaptic_change_report(W, W[:3], g)


def test_signal_histogram_examples():
    h = signal_histogram([0.1])
    assert list(h.counts) == [1] and h.mass == pytest.approx(0.1)
    h = signal_histogram([0.2] * 20)
    assert h.top_share == pytest.approx(0.15)
    h = signal_histogram(np.linspace(0.03, 0.3, 100))
    assert h.counts.sum() == 100 and h.max_value == pytest.approx(0.3)
    with pytest.raises(ValueError):
        signal_histogram([])


def test_local_signals_reach_higher_magnitudes_than_global():
    """Paired runs at fixed seeds: the local mechanism's strongest signal is larger."""
    base = TrialConfig(segments=40, n_samples=20, replay=5)
    g = [a for m in run_trials(replace(base, kind="global", trials=3)) for r in m.records for a in r.alphas]
    l = [a for m in run_trials(replace(base, kind="local", trials=3)) for r in m.records for a in r.alphas]
    assert g and l
    assert max(l) >= max(g)
