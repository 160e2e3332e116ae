"""Command-line harness.

Subcommands::

    synth        write a synthetic campaign (one CSV per trial) + manifest
    run-single   single-sensor front-end over a campaign -> results/summary CSV
    run-array    3-sensor array front-end over a campaign -> results/summary CSV
    calibrate    build a decoder calibration from run-array results
    infer        classify result vectors, or one vector given on the command line
    evaluate     confusion matrices and accuracy of a calibration on results

Every flag can also come from the environment as ``MOXFE_<FLAG>`` (upper
case, dashes as underscores), e.g. ``MOXFE_JOBS=4``. Command-line values
win. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import CircuitConfig, default_config, load_config
from .decoder import Calibration, DecodeError, calibrate, evaluate, infer
from .events import (
    ConcentrationVector,
    concentration_vector,
    delta_t_single,
    read_results,
    result_rows,
    summarize,
    vectors_from_rows,
    write_results,
    write_summary,
)
from .frontend import q_out_width, run_array, run_single_sensor
from .signal_model import (
    DEFAULT_NOISE_SIGMA_V,
    GASES,
    LEVELS,
    campaign_schedule,
    default_sensor_params,
    load_trial,
    save_trial,
    synthesize_trial,
)

log = logging.getLogger("mox_frontend")

ENV_PREFIX = "MOXFE_"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env(flag: str, default=None):
    return os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"), default)


def _csv_list(text: str, cast=str) -> list:
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    try:
        return [cast(t) for t in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _levels(text):
    levels = _csv_list(text, int)
    bad = [lv for lv in levels if lv not in LEVELS]
    if bad:
        raise argparse.ArgumentTypeError(f"levels must be in 1..5, got {bad}")
    return levels


def _jobs_default() -> int:
    return int(_env("jobs", os.cpu_count() or 1))


def _add_common(p, *flags):
    if "config" in flags:
        p.add_argument("--config", default=_env("config"), help="circuit config file (default: shipped)")
    if "campaign" in flags:
        p.add_argument("--campaign", default=_env("campaign"), help="campaign directory or trial CSV")
    if "out" in flags:
        p.add_argument("--out", default=_env("out"), help="output path")
    if "seed" in flags:
        p.add_argument("--seed", type=int, default=int(_env("seed", 0)), help="schedule/noise seed")
    if "jobs" in flags:
        p.add_argument("--jobs", type=int, default=_jobs_default(), help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mox-frontend", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic campaign")
    _add_common(p, "out", "seed", "jobs")
    p.add_argument("--trials", type=int, default=int(_env("trials", 20)))
    p.add_argument("--gases", type=_csv_list, default=_env("gases", ",".join(GASES)))
    p.add_argument("--levels", type=_levels, default=_env("levels", "1,2,3,4,5"))
    p.add_argument("--noise", type=float, default=float(_env("noise", DEFAULT_NOISE_SIGMA_V)),
                   help="white-noise sigma in volts (0 for noiseless)")
    p.add_argument("--dt", type=float, default=float(_env("dt", 1e-3)))
    p.add_argument("--t-start", type=float, default=float(_env("t_start", -1.0)))
    p.add_argument("--t-end", type=float, default=float(_env("t_end", 10.0)))

    for name, helptext in (("run-single", "single-sensor front-end"), ("run-array", "3-sensor array front-end")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p, "config", "campaign", "out", "seed", "jobs")
        if name == "run-single":
            p.add_argument("--sensor", type=int, default=int(_env("sensor", 1)), help="sensor id (1-3)")
        p.add_argument("--invert-mean", action="store_true",
                       help="summary: invert the mean dt instead of averaging per-trial 1/dt")

    p = sub.add_parser("calibrate", help="fit decoder centroids")
    _add_common(p, "out")
    p.add_argument("--results", default=_env("results"), help="run-array output directory")

    p = sub.add_parser("infer", help="classify concentration vectors")
    _add_common(p, "config", "out")
    p.add_argument("--calibration", default=_env("calibration"))
    p.add_argument("--results", default=_env("results"))
    p.add_argument("--vector", default=None, help="comma-separated dt_s values, empty for absent")

    p = sub.add_parser("evaluate", help="score a calibration on results")
    _add_common(p, "out")
    p.add_argument("--calibration", default=_env("calibration"))
    p.add_argument("--results", default=_env("results"))
    return parser


# --- manifests ----------------------------------------------------------------


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_manifest(out: Path, **fields) -> None:
    doc = {"tool": "mox-frontend", "version": __version__, "created_utc": _now(), **fields}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_manifest(directory: Path) -> dict:
    path = directory / "manifest.json"
    if not path.exists():
        raise UsageError(f"{directory} has no manifest.json")
    return json.loads(path.read_text())


def _campaign_id(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        manifest = path / "manifest.json"
        if manifest.exists():
            m = json.loads(manifest.read_text())
            m.pop("created_utc", None)
            h.update(json.dumps(m, sort_keys=True).encode())
        for f in sorted(path.glob("*.csv")):
            h.update(f"{f.name}:{f.stat().st_size}".encode())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()[:16]


def _config(args) -> tuple[CircuitConfig, str | None]:
    if args.config:
        return load_config(args.config), str(Path(args.config).resolve())
    return default_config(), None


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# --- synth ----------------------------------------------------------------


def _synth_one(job):
    path, params, stim, rep, seed, dt, t0, t1 = job
    save_trial(synthesize_trial(params, stim, rep, seed, dt, t0, t1), path)
    return path.name


def cmd_synth(args) -> int:
    if not args.out:
        raise UsageError("--out is required")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for old in out.glob("trial_*.csv"):
        old.unlink()
    params = default_sensor_params(args.noise)
    schedule = campaign_schedule(args.gases, args.levels, args.trials, args.seed)
    _write_manifest(
        out,
        command="synth",
        seed=args.seed,
        gases=args.gases,
        levels=args.levels,
        trials=args.trials,
        noise_sigma_v=args.noise,
        dt_s=args.dt,
        t_start_s=args.t_start,
        t_end_s=args.t_end,
        n_files=len(schedule),
    )
    jobs = [
        (out / f"trial_{i:04d}.csv", params, stim, rep, seed, args.dt, args.t_start, args.t_end)
        for i, (stim, rep, seed) in enumerate(schedule)
    ]
    _map(_synth_one, jobs, args.jobs)
    log.info("wrote %d trial files to %s", len(jobs), out)
    return EXIT_OK


# --- run ----------------------------------------------------------------------


def _run_one(job):
    mode, path, cfg, sensor = job
    trial = load_trial(path)
    meta = dict(gas=trial.stimulus.gas, level=trial.stimulus.level, trial=trial.trial)
    if mode == "single":
        ev = run_single_sensor(trial.traces[sensor - 1], cfg)
        return ConcentrationVector((delta_t_single(ev),), **meta), None
    ev = run_array(trial.traces, cfg)
    try:
        width = q_out_width(ev)
    except ValueError:
        width = None
    return concentration_vector(ev, cfg.n_sensors, **meta), width


def _trial_files(campaign: str | None) -> list[Path]:
    if not campaign:
        raise UsageError("--campaign is required")
    path = Path(campaign)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
    elif path.exists():
        files = [path]
    else:
        raise FileNotFoundError(f"campaign {campaign} not found")
    if not files:
        raise ValueError(f"empty campaign: no trial files in {campaign}")
    return files


def cmd_run(args, mode: str) -> int:
    if not args.out:
        raise UsageError("--out is required")
    files = _trial_files(args.campaign)
    cfg, cfg_path = _config(args)
    sensor = getattr(args, "sensor", 1)
    if mode == "single" and not 1 <= sensor <= cfg.n_sensors:
        raise UsageError(f"--sensor must be in 1..{cfg.n_sensors}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(
        out,
        command=f"run-{mode}",
        mode=mode,
        sensor=sensor if mode == "single" else None,
        config_path=cfg_path,
        config_hash=cfg.digest(),
        campaign=str(Path(args.campaign).resolve()),
        campaign_id=_campaign_id(Path(args.campaign)),
        seed=args.seed,
        n_trials=len(files),
        invert_mean=args.invert_mean,
    )
    results = _map(_run_one, [(mode, f, cfg, sensor) for f in files], args.jobs)
    vectors = [v for v, _ in results]
    ids = [sensor] if mode == "single" else None
    rows = list(result_rows(vectors, ids))
    write_results(rows, out / "results.csv")
    write_summary(summarize(rows, invert_first=not args.invert_mean), out / "summary.csv")
    if mode == "array":
        with (out / "q_out_width.csv").open("w") as fh:
            fh.write("gas,level,trial,q_out_width_s\n")
            for v, w in results:
                fh.write(f"{v.gas},{v.level},{v.trial},{'' if w is None else '%.12g' % w}\n")
    log.info("processed %d trials -> %s", len(files), out)
    return EXIT_OK


# --- decoder ----------------------------------------------------------------


def _labeled_from_results(results_dir: str | None):
    if not results_dir:
        raise UsageError("--results is required")
    directory = Path(results_dir)
    manifest = _read_manifest(directory)
    rows = read_results(directory / "results.csv")
    if not rows:
        raise ValueError("results table is empty")
    n = max(r["sensor"] for r in rows)
    vectors = vectors_from_rows(rows, n)
    return [((v.gas, v.level), v) for v in vectors], manifest


def cmd_calibrate(args) -> int:
    if not args.out:
        raise UsageError("--out is required")
    labeled, manifest = _labeled_from_results(args.results)
    cal = calibrate(
        labeled,
        config_hash=manifest.get("config_hash", ""),
        campaign_id=manifest.get("campaign_id", ""),
    )
    cal.save(args.out)
    log.info("calibrated %d classes -> %s", len(cal.centroids), args.out)
    return EXIT_OK


def _load_calibration(path) -> Calibration:
    if not path:
        raise UsageError("--calibration is required")
    if not Path(path).exists():
        raise FileNotFoundError(f"calibration file {path} not found")
    return Calibration.load(path)


def _check_hash(cal: Calibration, config_hash: str | None) -> None:
    if cal.config_hash and config_hash and cal.config_hash != config_hash:
        raise DecodeError("config hash mismatch between calibration and results")


def _parse_vector(text: str) -> ConcentrationVector:
    values = []
    for tok in text.split(","):
        tok = tok.strip()
        values.append(float(tok) if tok else None)
    return ConcentrationVector(tuple(values))


def cmd_infer(args) -> int:
    cal = _load_calibration(args.calibration)
    if args.vector is not None:
        if args.config:
            _check_hash(cal, load_config(args.config).digest())
        gas, level, score = infer(_parse_vector(args.vector), cal)
        print(f"{gas},{level},{score:.6g}")
        return EXIT_OK
    labeled, manifest = _labeled_from_results(args.results)
    _check_hash(cal, manifest.get("config_hash"))
    lines = ["gas,level,trial,pred_gas,pred_level,score"]
    for (gas, level), v in labeled:
        try:
            pg, pl, score = infer(v, cal)
            lines.append(f"{gas},{level},{v.trial},{pg},{pl},{score:.6g}")
        except DecodeError:
            lines.append(f"{gas},{level},{v.trial},,,")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cal = _load_calibration(args.calibration)
    labeled, manifest = _labeled_from_results(args.results)
    _check_hash(cal, manifest.get("config_hash"))
    report = evaluate(labeled, cal).as_dict()
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(f"accuracy {report['accuracy']:.4f} (gas {report['gas_accuracy']:.4f}, "
          f"level {report['level_accuracy']:.4f}) over {report['n']} trials")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handlers = {
        "synth": cmd_synth,
        "run-single": lambda a: cmd_run(a, "single"),
        "run-array": lambda a: cmd_run(a, "array"),
        "calibrate": cmd_calibrate,
        "infer": cmd_infer,
        "evaluate": cmd_evaluate,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"mox-frontend: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"mox-frontend: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
