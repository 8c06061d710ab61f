"""Command line entry point: ``fracmem {simulate,verify-lemmas,sweep,fit}``.

Exit codes: 0 success / global-looking, 1 configuration or I/O error,
2 growth or overflow in ``simulate``, 3 failed lemma certification.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .config import ConfigError, canonical_json, config_hash, load_config
from .experiments import SWEEP_COLUMNS, build_params, run_single, run_sweep_rows, verify_lemmas
from .memory import MemoryBudgetExceeded

log = logging.getLogger("fracmem")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_LEMMA = 0, 1, 2, 3

INITIAL_DATA_NOTE = (
    "u0 = c exp(-|x|^2/2), u1 = 0, c chosen so that "
    "sqrt(||u0||_{H^sigma}^2 + ||u1||_{L^2}^2) = epsilon"
)


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(value)


def write_csv(path: Path, header, rows, config_sha: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_sha256={config_sha}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    data = np.array([[float(v) for v in row] for row in reader if row])
    return {name: data[:, i] for i, name in enumerate(header)}


def write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_manifest(out: Path, command: str, cfg: dict, outputs) -> None:
    write_json(out / "manifest.json", {
        "command": command,
        "version": __version__,
        "config": json.loads(canonical_json(cfg)),
        "config_sha256": config_hash(cfg),
        "outputs": sorted(str(o) for o in outputs),
        "initial_data_convention": INITIAL_DATA_NOTE,
        "domain": "periodic torus [-L/2, L/2)^n standing in for R^n",
    })


def _figures(cfg: dict) -> bool:
    return bool(cfg["output"]["figures"])


def run_simulate(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    sha = config_hash(cfg)
    ckpt = str(out / "checkpoints") if cfg["solver"]["checkpoint_every"] else None
    params, traj, report = run_single(cfg, checkpoint_dir=ckpt)
    weighted = traj.weighted_sum(params.gamma)
    rows = zip(traj.times, traj.l2_u, traj.hsigma_u, traj.l2_ut, weighted)
    write_csv(out / "trajectory.csv", ("t", "l2_u", "hsigma_u", "l2_ut", "weighted_sum"), rows, sha)
    payload = report.to_dict()
    payload["config_sha256"] = sha
    payload["params"] = params.as_dict()
    payload["exponent_range"] = str(params.exponent_range)
    write_json(out / "decay_report.json", payload)
    outputs = ["trajectory.csv", "decay_report.json"] + [
        os.path.relpath(p, out) for p in traj.checkpoints
    ]
    if _figures(cfg):
        from .plotting import plot_trajectory

        plot_trajectory(traj, params.gamma, report, out / "decay.png")
        outputs.append("decay.png")
    write_manifest(out, "simulate", cfg, outputs)
    log.info("verdict %s, slopes %s", report.verdict,
             {k: round(f.slope, 4) for k, f in report.fits.items()})
    return EXIT_OK if report.verdict == "global-looking" else EXIT_BLOWUP


def run_verify_lemmas(cfg: dict, out: Path, workers: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    report = verify_lemmas(cfg, workers)
    report["config_sha256"] = config_hash(cfg)
    write_json(out / "lemma_report.json", report)
    write_manifest(out, "verify-lemmas", cfg, ["lemma_report.json"])
    for failure in report["failures"]:
        print(f"FAILED {failure['lemma']} {json.dumps(failure['params'], sort_keys=True)}",
              file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_LEMMA


def run_sweep(cfg: dict, out: Path, workers: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    rows, axes = run_sweep_rows(cfg, workers)
    header = list(dict.fromkeys(axes + list(SWEEP_COLUMNS)))
    table = [[row.get(col, "") for col in header] for row in rows]
    write_csv(out / "sweep.csv", header, table, config_hash(cfg))
    outputs = ["sweep.csv"]
    if _figures(cfg) and len(axes) == 1:
        from .plotting import plot_sweep

        plot_sweep(rows, axes[0], out / "sweep.png")
        outputs.append("sweep.png")
    write_manifest(out, "sweep", cfg, outputs)
    return EXIT_OK


def run_fit(cfg: dict, out: Path, source: str | None) -> int:
    source = source or cfg["fit"]["input"]
    if not source:
        raise ConfigError("fit: no input trajectory (use --input or fit.input)")
    params = build_params(cfg)
    try:
        data = read_csv(source)
    except (OSError, ValueError, StopIteration) as exc:
        raise ConfigError(f"fit: cannot read {source}: {exc}") from exc
    t = data["t"]
    window = tuple(cfg["fit"]["window"]) if cfg["fit"]["window"] else (t[-1] / 5, t[-1])
    fits = {}
    for name in analysis.DIAGNOSTICS:
        if name in data:
            try:
                fits[name] = analysis.fit_decay_rate(t, data[name], window)._asdict()
            except ValueError as exc:
                fits[name] = {"error": str(exc)}
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "fit_report.json", {
        "input": str(source),
        "window": list(window),
        "target_slope": -params.gamma,
        "fits": fits,
        "config_sha256": config_hash(cfg),
    })
    write_manifest(out, "fit", cfg, ["fit_report.json"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        dest="overrides", help="override a config entry (repeatable)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="seed for random fields")
    common.add_argument("--workers", type=int, help="worker processes")

    parser = argparse.ArgumentParser(prog="fracmem", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run one simulation")
    sub.add_parser("verify-lemmas", parents=[common], help="certify the integral inequalities")
    sub.add_parser("sweep", parents=[common], help="parameter sweep")
    fit = sub.add_parser("fit", parents=[common], help="fit decay rates of a trajectory CSV")
    fit.add_argument("--input", metavar="CSV", help="trajectory CSV to fit")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("FRACMEM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if args.out is not None:
        overrides.append(f"output.dir={json.dumps(args.out)}")
    try:
        cfg = load_config(args.config, overrides)
        cfg["mode"] = args.command
        out = Path(cfg["output"]["dir"])
        if args.command == "simulate":
            return run_simulate(cfg, out)
        if args.command == "verify-lemmas":
            return run_verify_lemmas(cfg, out, cfg["workers"])
        if args.command == "sweep":
            return run_sweep(cfg, out, cfg["workers"])
        return run_fit(cfg, out, args.input)
    except (ConfigError, MemoryBudgetExceeded, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
