"""Command-line entry point.

Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
errors.  Every failure prints a single ``gaitpd: error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import analysis, baseline, optimize
from .config import RunConfig, defaults_text
from .detector import DetectorConfig, classify_and_delay
from .errors import ConfigError, GaitPDError, InvalidSpec
from .ingest import TrialRecording, read_trial, serialize_trial
from .kinematics import STATE_NAMES
from .parallel import pmap
from .pipeline import PreparedTrial, detect, prepare
from .synth import generate_matrix, generate_trial


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def label_path_for(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".label.json")


def _write(path, text: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "threshold", None) is not None:
        cfg = replace(cfg, detector=replace(cfg.detector, threshold_phi=args.threshold))
    return cfg


def _load_trial(path, label, rate: float) -> TrialRecording:
    trial = read_trial(path, rate, label)
    return replace(trial, trial_id=Path(path).stem)


def _load_inputs(args, cfg: RunConfig) -> List[TrialRecording]:
    """Trials named by ``--in``/``--label`` or every CSV under ``--trials``."""
    if getattr(args, "trials", None):
        root = Path(args.trials)
        if not root.is_dir():
            raise FileNotFoundError(f"{root} is not a directory")
        paths = sorted(p for p in root.glob("*.csv") if p.name != "index.csv")
        if not paths:
            raise GaitPDError(f"no trial CSVs in {root}")
        return [_load_trial(p, label_path_for(p) if label_path_for(p).exists() else None,
                            cfg.sample_rate) for p in paths]
    src = args.input or cfg.paths.input
    if not src:
        raise UsageError("one of --in or --trials is required")
    label = args.label or cfg.paths.label
    return [_load_trial(src, label, cfg.sample_rate)]


def _out(args, cfg: RunConfig) -> Optional[str]:
    return args.out or cfg.paths.out


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _out(args, cfg)
    if not out:
        raise UsageError("--out is required")
    params = cfg.gait if args.seed is None else replace(cfg.gait, seed=args.seed)
    trial = generate_trial(params, cfg.perturbation, Path(out).stem)
    _write(out, serialize_trial(trial))
    if trial.perturbation is not None:
        _write(label_path_for(out), trial.perturbation.to_json() + "\n")
    _emit({"trial_id": trial.trial_id, "frames": trial.n_frames,
           "onset_sample": None if trial.perturbation is None else trial.perturbation.onset_sample})
    return 0


def cmd_matrix(args, cfg: RunConfig) -> int:
    m = cfg.matrix
    params = cfg.gait if args.seed is None else replace(cfg.gait, seed=args.seed)
    trials = generate_matrix(params, m.kinds, m.magnitudes, m.phases, m.onset_stride)
    root = Path(args.out_dir)
    rows = ["trial_id,kind,magnitude,direction,onset_sample"]
    for t in sorted(trials, key=lambda t: t.trial_id):
        _write(root / f"{t.trial_id}.csv", serialize_trial(t))
        lab = t.perturbation
        if lab is not None:
            _write(root / f"{t.trial_id}.label.json", lab.to_json() + "\n")
            rows.append(f"{t.trial_id},{lab.kind},{lab.magnitude:g},{lab.direction or ''},{lab.onset_sample}")
        else:
            rows.append(f"{t.trial_id},,,,")
    _write(root / "index.csv", "\n".join(rows) + "\n")
    _emit({"trials": len(trials), "out_dir": str(root)})
    return 0


def cmd_detect(args, cfg: RunConfig) -> int:
    trials = _load_inputs(args, cfg)
    if len(trials) != 1:
        raise UsageError("detect takes a single trial (--in)")
    prepared = prepare(trials[0], cfg.processing)
    output = detect(prepared, cfg.detector, args.mode)
    lines = "".join(json.dumps(r) + "\n" for r in output.records())
    out = _out(args, cfg)
    if out:
        _write(out, lines)
    else:
        sys.stdout.write(lines)
    row = {
        "trial_id": output.trial_id,
        "threshold": output.threshold,
        "detection_sample": output.detection_sample,
        "cycles": len(output.cycles),
        "skipped_samples": output.n_skipped,
    }
    truth = prepared.trial.perturbation
    if truth is not None:
        score = classify_and_delay(output, truth, tp_window_cycles=cfg.detector.tp_window_cycles)
        row.update({k: v for k, v in score.as_row().items() if k != "trial_id"})
    _emit(row)
    return 0


def _wbam_scores(prepared: List[PreparedTrial], cfg: RunConfig, channels=None):
    w = cfg.wbam
    return [baseline.score_wbam(p.trial, p.cycles, w.n_cycles, cfg.detector.window_cycles, w.k,
                                channels, cfg.detector.tp_window_cycles) for p in prepared]


def _wbam_reports(prepared, cfg: RunConfig):
    if cfg.wbam.mode == "or":
        return [analysis.evaluate(_wbam_scores(prepared, cfg), "wbam")]
    if cfg.wbam.mode == "per_plane":
        return [analysis.evaluate(_wbam_scores(prepared, cfg, [ch]), f"wbam_{ch}")
                for ch in baseline.CHANNELS]
    raise ConfigError(f"unknown wbam mode {cfg.wbam.mode!r}")


def cmd_baseline(args, cfg: RunConfig) -> int:
    if args.mode:
        cfg = replace(cfg, wbam=replace(cfg.wbam, mode=args.mode))
    prepared = pmap(prepare, _load_inputs(args, cfg), cfg.processing)
    reports = _wbam_reports(prepared, cfg)
    doc = {r.detector: r.to_dict() for r in reports}
    if len(reports) > 1:
        doc["plane_average"] = analysis.plane_average(reports)
    out = _out(args, cfg)
    if out:
        _write(out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for r in reports:
        _emit({"detector": r.detector, "accuracy": r.accuracy, **r.confusion,
               "delay_mean_pct": r.delay_mean})
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    s = cfg.sweep
    t_min = s.t_min if args.t_min is None else args.t_min
    t_max = s.t_max if args.t_max is None else args.t_max
    step = s.step if args.step is None else args.step
    trials = _load_inputs(args, cfg)
    result = optimize.sweep(trials, t_min, t_max, step, cfg.detector, cfg.processing)
    out = _out(args, cfg)
    if out:
        _write(out, result.to_csv())
    j = result.chosen
    d = result.mean_delay_pct[j]
    _emit({"threshold": result.threshold, "fp": int(result.fp[j]), "fn": int(result.fn[j]),
           "accuracy": float(result.accuracy[j]),
           "mean_delay_pct": None if math.isnan(d) else float(d)})
    return 0


def cmd_pca(args, cfg: RunConfig) -> int:
    prepared = pmap(prepare, _load_inputs(args, cfg), cfg.processing)
    X = np.concatenate([p.states for p in prepared], axis=0)
    X = X[np.isfinite(X).all(axis=1)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        k = cfg.analysis.pca_k if args.k is None else args.k
        res = analysis.pca(X, k, cfg.analysis.pca_standardize and not args.no_standardize)
    for w in caught:
        sys.stderr.write(f"gaitpd: note: {w.message}\n")
    out = _out(args, cfg)
    if out:
        _write(out, res.scores_csv())
    _emit({
        "samples": int(X.shape[0]),
        "explained_variance_ratio": [float(v) for v in res.explained_variance_ratio],
        "components": [dict(zip(STATE_NAMES, (float(v) + 0.0 for v in row))) for row in res.components],
    })
    return 0


def _score_kinematic(p: PreparedTrial, config: DetectorConfig):
    return classify_and_delay(detect(p, config), p.trial.perturbation,
                              tp_window_cycles=config.tp_window_cycles)


def cmd_evaluate(args, cfg: RunConfig) -> int:
    prepared = pmap(prepare, _load_inputs(args, cfg), cfg.processing)
    reports = []
    if args.detector in ("kinematic", "both"):
        rows = pmap(_score_kinematic, prepared, cfg.detector)
        reports.append(analysis.evaluate(rows, "kinematic"))
    if args.detector in ("wbam", "both"):
        reports.extend(_wbam_reports(prepared, cfg))
    doc = {r.detector: r.to_dict() for r in reports}
    out = _out(args, cfg)
    if out:
        _write(out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if args.rows_csv:
        _write(args.rows_csv, reports[0].rows_csv())
    for r in reports:
        sys.stdout.write(r.summary() + "\n")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    epilog = "Configuration defaults (--config JSON, unknown keys rejected):\n" + defaults_text()
    p = _Parser(prog="gaitpd", description="Ground perturbation detection from gait kinematics.",
                epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_, formatter_class=fmt)
        sp.add_argument("--config", help="run configuration JSON")
        return sp

    def inputs(sp, single=False):
        sp.add_argument("--in", dest="input", help="trial CSV")
        sp.add_argument("--label", help="perturbation label JSON for --in")
        if not single:
            sp.add_argument("--trials", help="directory of trial CSVs with sibling .label.json files")

    sp = add("simulate", "generate one synthetic trial")
    sp.add_argument("--out", help="trial CSV to write; the label goes next to it")
    sp.add_argument("--seed", type=int, help="override gait.seed")
    sp.set_defaults(func=cmd_simulate)

    sp = add("matrix", "generate a labelled trial set")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--seed", type=int, help="override gait.seed")
    sp.set_defaults(func=cmd_matrix)

    sp = add("detect", "run the kinematic detector on one trial")
    inputs(sp, single=True)
    sp.add_argument("--threshold", type=float, default=0.125, help="phi detection threshold")
    sp.add_argument("--mode", choices=("stream", "batch"), default="stream")
    sp.add_argument("--out", help="JSONL detection stream (stdout if omitted)")
    sp.set_defaults(func=cmd_detect)

    sp = add("baseline", "run the WBAM band detector")
    inputs(sp)
    sp.add_argument("--mode", choices=("or", "per_plane"), help="override wbam.mode")
    sp.add_argument("--out", help="report JSON")
    sp.set_defaults(func=cmd_baseline)

    sp = add("sweep", "sweep the detection threshold")
    inputs(sp)
    sp.add_argument("--t-min", type=float)
    sp.add_argument("--t-max", type=float)
    sp.add_argument("--step", type=float)
    sp.add_argument("--out", help="sweep CSV")
    sp.set_defaults(func=cmd_sweep)

    sp = add("pca", "principal components of the state trajectories")
    inputs(sp)
    sp.add_argument("--k", type=int, help="components to keep (default analysis.pca_k)")
    sp.add_argument("--no-standardize", action="store_true",
                    help="skip per-column scaling (overrides analysis.pca_standardize)")
    sp.add_argument("--out", help="scores CSV")
    sp.set_defaults(func=cmd_pca)

    sp = add("evaluate", "confusion matrix and delays over a trial set")
    inputs(sp)
    sp.add_argument("--threshold", type=float, help="override detector.threshold_phi")
    sp.add_argument("--detector", choices=("kinematic", "wbam", "both"), default="kinematic")
    sp.add_argument("--out", help="report JSON")
    sp.add_argument("--rows-csv", help="per-trial rows of the first report")
    sp.set_defaults(func=cmd_evaluate)
    return p


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args)
        return args.func(args, cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError, InvalidSpec) as exc:
        sys.stderr.write(f"gaitpd: error: {exc}\n")
        return 1
    except (GaitPDError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        sys.stderr.write(f"gaitpd: error: {msg}\n")
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
