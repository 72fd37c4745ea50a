"""Acceptance criteria, one test per criterion.

Each test records a one-line PASS/FAIL verdict that is printed in the
terminal summary (see conftest.py).  Run on its own with
``pytest tests/test_acceptance.py -v``.
"""

import filecmp
import gc
import json
import math
import time
from dataclasses import replace

import numpy as np

from gaitpd.analysis import evaluate, jacobi_eigh, pca
from gaitpd.baseline import WbamBand, detect_wbam, fit_band
from gaitpd.cli import run
from gaitpd.detector import (DetectorConfig, DetectorSession, TrialScore, alpha, classify_and_delay,
                             phi, score_crossings)
from gaitpd.gait import GaitCycle, detect_heel_strikes, resample_segment
from gaitpd.ingest import MARKER_INDEX, PerturbationLabel, fill_gaps
from gaitpd.kinematics import compute_com, differentiate, relative_states
from gaitpd.optimize import select_threshold, sweep, sweep_naive, threshold_grid
from gaitpd.pipeline import detect, prepare
from gaitpd.stats import band_statistics, cov
from gaitpd.synth import (GaitModelParams, PerturbationSpec, benchmark_matrix, generate_trial)

RESULTS = []


def report(n, name, ok, detail=""):
    RESULTS.append(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
    print(RESULTS[-1])
    assert ok, RESULTS[-1]


# -- 1 ----------------------------------------------------------------------

def _mixed_trials(n=20):
    kinds = [("trip", 10.0, 3.0, None), ("slip", 20.0, 3.0, None),
             ("translation", 45.0, 0.10, "E"), None]
    trials = []
    for i in range(n):
        cell = kinds[i % len(kinds)]
        spec = None if cell is None else PerturbationSpec(cell[0], cell[1], magnitude=cell[2],
                                                          direction=cell[3])
        trials.append(generate_trial(GaitModelParams(seed=100 + i), spec))
    return trials


def test_c01_streaming_equals_batch():
    trials = _mixed_trials()
    t0 = time.perf_counter()
    mismatched = 0
    for t in trials:
        p = prepare(t)
        a, b = detect(p, mode="stream"), detect(p, mode="batch")
        same = (np.array_equal(a.phi, b.phi, equal_nan=True)
                and np.array_equal(a.alpha, b.alpha, equal_nan=True)
                and a.detection_sample == b.detection_sample)
        mismatched += not same
    dt = time.perf_counter() - t0
    n_pert = sum(t.perturbation is not None for t in trials)
    report(1, "streaming == batch", mismatched == 0 and dt < 5.0,
           f"{len(trials)} trials ({n_pert} perturbed), {mismatched} mismatched, {dt:.2f} s (< 5 s)")


# -- 2 ----------------------------------------------------------------------

def _derived_checks():
    """(name, computed, expected) for every hand-derived example."""
    t = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    x = t ** 2
    x[2] = math.nan
    frame = np.zeros((8, 3))
    frame[0:4] = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)]
    feet = np.zeros((8, 3))
    feet[0:4] = (0.25, 0.02, 1.0)
    feet[MARKER_INDEX["rheel"]] = (0.4, 0.1, 0.0)
    feet[MARKER_INDEX["lheel"]] = (0.0, -0.1, 0.0)
    drift = np.repeat(frame[None], 10, axis=0)
    drift[:, :, 0] += 0.01 * np.arange(10)[:, None]
    ts = np.arange(20) / 100.0
    f = np.zeros(100)
    f[10:15] = f[30:35] = 100.0
    ev = detect_heel_strikes(f, 100.0, 20.0, 0.4).tolist()
    a_mag, a_sign = alpha(1.35, 1.0, 0.1)
    b_mag, b_sign = alpha(0.50, 1.0, 0.1)
    mean, sd, _ = band_statistics(np.array([[[1.0]], [[3.0]]]))
    cycles = [GaitCycle(1000, 2000, 10.0), GaitCycle(2000, 3000, 10.0)]
    crossing = np.zeros(3000, dtype=bool)
    crossing[1431] = True
    delay = score_crossings(crossing, cycles, [True, True],
                            PerturbationLabel(1200, "trip", None, 3.0)).delay_pct
    vals, vecs = jacobi_eigh([[2.0, 1.0], [1.0, 2.0]])
    k = int(np.argmax(vals))
    u1, u2 = np.array([1.0, 1.0]) / math.sqrt(2), np.array([1.0, -1.0]) / math.sqrt(2)
    pts = np.array([math.sqrt(6) * u1, -math.sqrt(6) * u1, math.sqrt(2) * u2, -math.sqrt(2) * u2])
    pc = pca(pts, 2, standardize=False)
    rep = evaluate([TrialScore("a", tp=1, delay_pct=20.0), TrialScore("b", tp=1, delay_pct=30.0)])
    wb = fit_band(np.where(np.arange(300) % 2 == 0, 1.0, -1.0),
                  [GaitCycle(i * 100, i * 100 + 100, 1.0) for i in range(3)])
    sag = np.full(1000, 0.5)
    front = np.zeros(1000)
    front[812] = 5.0
    unit = WbamBand(0.0, 1.0)
    # composed alpha/phi: 8 states at alpha = 3 sd with C = sd = 0.05
    s = DetectorSession()
    for j in range(10):
        for i in range(100):
            s.step(np.full(16, 0.95 if j % 2 == 0 else 1.05), float(i), i == 0)
    xs = np.full(16, 1.0)
    xs[:8] = 1.25
    composed = s.step(xs, 0.0, True).phi
    # slip pulse: a = 3 m/s^2 for 0.5 s
    params = GaitModelParams(noise_sd=0.0, seed=3)
    slipped = generate_trial(params, PerturbationSpec("slip", 5, magnitude=3.0, duration_s=0.5))
    plain = generate_trial(params, None)
    r = MARKER_INDEX["rheel"]
    dx = slipped.markers[:, r, 0] - plain.markers[:, r, 0]
    end = slipped.perturbation.onset_sample + 50
    v_end = (3 * dx[end] - 4 * dx[end - 1] + dx[end - 2]) * 100.0 / 2
    steady = detect(prepare(generate_trial(GaitModelParams(seed=5, trial_duration=17.0), None)))
    return [
        ("cubic gap fill of t^2 at t=2", fill_gaps(x)[0][2], 4.0),
        ("pelvis mean", compute_com(frame), [0.5, 0.5, 0.5]),
        ("com relative to mid-feet", relative_states(feet, compute_com(feet))[6:8], [0.05, 0.02]),
        ("central difference of t^2", differentiate(ts ** 2, 100.0)[1:-1], 2 * ts[1:-1]),
        ("rigid drift velocity", differentiate(compute_com(drift)[:, 0], 100.0), np.ones(10)),
        ("rigid drift positions", np.ptp(relative_states(drift, compute_com(drift)), axis=0), 0.0),
        ("refractory suppression", ev, [10]),
        ("ramp resampled to 5 bins", resample_segment(np.arange(10.0), 5), [0, 1.8, 3.6, 5.4, 7.2]),
        ("population mean/sd of {1,3}", [mean[0, 0], sd[0, 0]], [2.0, 1.0]),
        ("C with negative mean", cov(-0.5, 0.1), 0.2),
        ("alpha above band", [a_mag, a_sign], [0.15, 1.0]),
        ("alpha below band", [b_mag, b_sign], [0.30, -1.0]),
        ("phi of two-state view", phi([0.15, 0.0], [0.1, 0.2]), 0.5 * 0.15 / 0.35),
        ("steady fixture max phi below 0.125", float(np.nanmax(steady.phi) < 0.125), 1.0),
        ("composed alpha/phi = 8*0.6/16", composed, 0.30),
        ("delay 231 / 1000 samples", delay, 23.1),
        ("alternating WBAM history", [wb.mean, wb.sd], [0.0, 1.0]),
        ("either-channel WBAM detection", detect_wbam({"sagittal": sag, "frontal": front},
                                                      {"sagittal": unit, "frontal": unit}), 812),
        ("slip displacement a*D^2/2", dx[end], -0.375),
        ("slip velocity a*D", v_end, -1.5),
        ("2x2 eigenvalues", np.sort(vals), [1.0, 3.0]),
        ("2x2 leading eigenvector", abs(vecs[:, k] @ u1), 1.0),
        ("PCA on [[2,1],[1,2]] covariance", pc.explained_variance, [3.0, 1.0]),
        ("PCA leading component", pc.components[0], u1),
        ("delay mean and population sd", [rep.delay_mean, rep.delay_sd], [25.0, 5.0]),
    ]


def test_c02_derived_examples():
    checks = _derived_checks()
    failed = [name for name, got, want in checks
              if not np.allclose(np.asarray(got, dtype=float), np.asarray(want, dtype=float),
                                 rtol=0, atol=1e-9)]
    report(2, "derived examples to 1e-9", not failed,
           f"{len(checks) - len(failed)}/{len(checks)} passed" + (f"; failed {failed}" if failed else ""))


# -- 3 ----------------------------------------------------------------------

def test_c03_benchmark():
    t0 = time.perf_counter()
    trials = benchmark_matrix(seed=0)
    scores = []
    for t in trials:
        scores.append(classify_and_delay(detect(prepare(t), DetectorConfig(threshold_phi=0.125)),
                                         t.perturbation))
    dt = time.perf_counter() - t0
    tp = sum(s.tp for s in scores)
    tn = sum(s.tn for s in scores)
    fp = sum(s.fp for s in scores)
    fn = sum(s.fn for s in scores)
    acc = (tp + tn) / (tp + tn + fp + fn)
    steady = [s for s in scores if not s.perturbed]
    s_fp = sum(s.fp for s in steady)
    s_cycles = sum(s.fp + s.tn for s in steady)
    fp_rate = s_fp / s_cycles
    delays = [s.delay_pct for s in scores if s.tp]
    ok = len(trials) >= 40 and acc >= 0.95 and fp_rate <= 0.02 and max(delays) <= 50.0 and dt < 30
    report(3, "synthetic benchmark at 0.125", ok,
           f"{len(trials)} trials, accuracy {acc:.4f} (>= 0.95), TP {tp} FN {fn} FP {fp} TN {tn}, "
           f"unperturbed FP rate {fp_rate:.4f} (<= 0.02), max TP delay {max(delays):.1f}% (<= 50%), "
           f"{dt:.1f} s (< 30 s)")


# -- 4 ----------------------------------------------------------------------

def test_c04_threshold_monotonicity(benchmark_prepared):
    res = sweep(benchmark_prepared, 0.01, 1.0, 0.01)
    fp_ok = bool(np.all(np.diff(res.fp) <= 0))
    fn_ok = bool(np.all(np.diff(res.fn) >= 0))
    errors = res.fp + res.fn
    chosen = select_threshold(res)
    min_ok = errors[res.chosen] == errors.min()
    report(4, "threshold monotonicity", fp_ok and fn_ok and min_ok,
           f"{len(res.thresholds)} thresholds, FP non-increasing {fp_ok}, FN non-decreasing {fn_ok}, "
           f"selected {chosen:.2f} with FP+FN {errors[res.chosen]} (global min {errors.min()})")


# -- 5 ----------------------------------------------------------------------

def test_c05_cached_sweep_equals_naive(benchmark_prepared):
    picks = [benchmark_prepared[i] for i in (0, 13, 26, 30, 41)]
    thr = threshold_grid(0.05, 0.30, 0.025)
    cached = sweep(picks, 0.05, 0.30, 0.025)
    naive = sweep_naive(picks, thr)
    report(5, "cached sweep == naive", len(thr) == 11 and cached.equals(naive),
           f"{len(picks)} trials x {len(thr)} thresholds, exact equality {cached.equals(naive)}")


# -- 6 ----------------------------------------------------------------------

def test_c06_wbam_contract():
    rng = np.random.default_rng(2024)
    fired = inside_clean = 0
    n = 1000
    for _ in range(n):
        n_cycles = int(rng.integers(3, 6))
        lengths = rng.integers(80, 121, n_cycles + 2)
        bounds = np.concatenate(([0], np.cumsum(lengths)))
        cycles = [GaitCycle(int(a), int(b), (b - a) / 100) for a, b in zip(bounds[:-1], bounds[1:])]
        mu, sigma = rng.uniform(-1, 1), rng.uniform(0.05, 2.0)
        x = rng.normal(mu, sigma, bounds[-1])
        start = cycles[n_cycles].start_sample
        band = fit_band(x, cycles, n_cycles, before_sample=start)
        test = rng.uniform(band.lower, band.upper, bounds[-1] - start)
        test = np.clip(test, np.nextafter(band.lower, np.inf), np.nextafter(band.upper, -np.inf))
        x[start:] = test
        inside_clean += detect_wbam({"sagittal": x}, {"sagittal": band}, start) is None
        j = int(rng.integers(start, bounds[-1]))
        x[j] = band.mean + rng.choice([-5.0, 5.0]) * band.sd
        fired += detect_wbam({"sagittal": x}, {"sagittal": band}, start) == j
    report(6, "WBAM band contract", fired == n and inside_clean == n,
           f"{n} seeded trials, fired on 5 sd excursion {fired}/{n}, silent inside band {inside_clean}/{n}")


# -- 7 ----------------------------------------------------------------------

def test_c07_drift_immunity():
    trial = generate_trial(GaitModelParams(seed=21), None, "steady")
    m = trial.markers.copy()
    m[:, :, 0] += 0.2 * np.arange(trial.n_frames)[:, None] / trial.sample_rate
    a, b = prepare(trial), prepare(replace(trial, markers=m))
    change = float(np.abs(a.states[:, :8] - b.states[:, :8]).max())
    out = detect(b)
    n_det = int(sum(r.crossed for r in out.cycles))
    ok = change <= 1e-9 and out.detection_sample is None and n_det == 0
    report(7, "drift immunity (0.2 m/s)", ok,
           f"max position-state change {change:.2e} (<= 1e-9), detections {n_det}")


# -- 8 ----------------------------------------------------------------------

def test_c08_phi_bounds():
    rng = np.random.default_rng(8)
    n = 10_000
    in_range = single_ok = 0
    for _ in range(n):
        covs = 10 ** rng.uniform(-4, 1, 16)
        a = rng.exponential(1.0, 16) * 10 ** rng.uniform(-3, 3)
        a[rng.random(16) < rng.random()] = 0.0
        p = phi(a, covs)
        in_range += 0.0 <= p < 1.0
        one = np.zeros(16)
        one[rng.integers(16)] = 10 ** rng.uniform(-6, 6)
        single_ok += phi(one, covs) < 1 / 16
    report(8, "phi in [0,1), single-state phi < 1/16", in_range == n and single_ok == n,
           f"{n} cases, in range {in_range}/{n}, single-state bound {single_ok}/{n}")


# -- 9 ----------------------------------------------------------------------

def test_c09_step_throughput():
    p = prepare(generate_trial(GaitModelParams(seed=30, trial_duration=60.0), None))
    states = list(p.states)
    phase = [None if v != v else float(v) for v in p.phase]
    boundary = np.zeros(len(states), dtype=bool)
    boundary[p.events] = True
    boundary = boundary.tolist()
    best = 0.0
    gc_was_enabled = gc.isenabled()
    gc.disable()  # as timeit does; collector pauses depend on whatever else is alive
    try:
        for _ in range(5):
            s = DetectorSession()
            step = s.step
            t0 = time.perf_counter()
            for i in range(len(states)):
                step(states[i], phase[i], boundary[i])
            best = max(best, len(states) / (time.perf_counter() - t0))
    finally:
        if gc_was_enabled:
            gc.enable()
    report(9, "step throughput", best >= 1e5,
           f"{best:,.0f} samples/s over a {len(states)}-sample trial, best of 5 (>= 100,000)")


# -- 10 ---------------------------------------------------------------------

def test_c10_cli_determinism(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = {
        "perturbation": {"kind": "trip", "onset_phase": 20, "magnitude": 3.0},
        "gait": {"seed": 7, "trial_duration": 20.0},
        "matrix": {"kinds": ["trip", "translation"], "magnitudes": {"trip": [3.0], "translation": [0.1]},
                   "phases": {"trip": [10.0], "translation": [25.0]}},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert run(["matrix", "--config", "cfg.json", "--out-dir", "set"]) == 0
    for k in (1, 2):
        assert run(["simulate", "--config", "cfg.json", "--out", f"sim{k}/trial.csv"]) == 0
        assert run(["sweep", "--trials", "set", "--step", "0.01", "--out", f"sweep{k}.csv"]) == 0
    same = [
        filecmp.cmp("sim1/trial.csv", "sim2/trial.csv", shallow=False),
        filecmp.cmp("sim1/trial.label.json", "sim2/trial.label.json", shallow=False),
        filecmp.cmp("sweep1.csv", "sweep2.csv", shallow=False),
    ]
    report(10, "simulate/sweep byte-identical", all(same),
           f"trial.csv {same[0]}, trial.label.json {same[1]}, sweep.csv {same[2]}")
