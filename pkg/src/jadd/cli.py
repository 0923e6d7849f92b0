"""Command-line entry point: ``jadd run | sweep | selftest``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .eval.config import load_raw, spec_from_mapping, sweep_specs
from .eval.runner import RunReport, ScenarioSpec, run_scenario
from .eval.selftest import run_selftest
from .sysconfig import ConfigError

CSV_COLUMNS = ["scenario_id", "drop", "speed_kmh", "td_ms", "sample_snr_db", "pilot_snr_db",
               "n_s", "l_order", "nmse_db", "nmse_stale_db", "se", "se_stale", "bound_check"]


def _speed(spec: ScenarioSpec) -> float:
    return spec.cluster.speed_kmh if spec.speed_kmh is None else spec.speed_kmh


def report_rows(report: RunReport) -> list[dict]:
    spec = report.spec
    rows = []
    for d in report.drops:
        rows.append({
            "scenario_id": spec.scenario_id,
            "drop": d.drop,
            "speed_kmh": _speed(spec),
            "td_ms": spec.td_ms,
            "sample_snr_db": spec.sample_snr_db,
            "pilot_snr_db": spec.pilot_snr_db,
            "n_s": d.n_s if d.ok else "",
            "l_order": spec.L,
            "nmse_db": d.nmse_db if d.ok else "",
            "nmse_stale_db": d.nmse_stale_db if d.ok else "",
            "se": d.se if d.ok else "",
            "se_stale": d.se_stale if d.ok else "",
            "bound_check": report.bound_check.outcome if d.ok else "failed",
        })
    return rows


def write_csv(path: Path, reports: list[RunReport]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in reports:
            writer.writerows(report_rows(r))


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, np.floating)):
        return _jsonable(obj.item())
    return obj


def spec_record(spec: ScenarioSpec) -> dict:
    rec = dataclasses.asdict(dataclasses.replace(spec, fixed_paths=None))
    rec.pop("fixed_paths")
    return rec


def write_manifest(path: Path, args, reports: list[RunReport], extra: dict | None = None) -> None:
    manifest = {
        "command": args.command,
        "config": str(args.config) if getattr(args, "config", None) else None,
        "seed": args.seed,
        "threads": args.threads,
        "versions": {"jadd": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "scenarios": [{"spec": spec_record(r.spec), "summary": r.summary()} for r in reports],
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(_jsonable(manifest), indent=2))


def _with_seed(raw: dict, seed) -> dict:
    if seed is not None:
        raw = dict(raw, seed=seed)
    return raw


def cmd_run(args) -> int:
    spec = spec_from_mapping(_with_seed(load_raw(args.config), args.seed))
    args.seed = spec.seed
    report = run_scenario(spec, threads=args.threads)
    _finish(args, [report])
    return 0


def cmd_sweep(args) -> int:
    raw = _with_seed(load_raw(args.config), args.seed)
    reports = [run_scenario(s, threads=args.threads) for s in sweep_specs(raw)]
    args.seed = reports[0].spec.seed if reports else args.seed
    _finish(args, reports)
    return 0


def _finish(args, reports: list[RunReport]) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "report.csv", reports)
    write_manifest(out / "manifest.json", args, reports)
    for r in reports:
        s = r.summary()
        print(f"{s['scenario_id']}: NMSE {s['nmse_db']:.2f} dB (stale {s['nmse_stale_db']:.2f} dB), "
              f"relative SE {s['se_relative']:.3f}, bound {s['bound_check']}, failed {s['failed']}")


def cmd_selftest(args) -> int:
    seed = 0 if args.seed is None else args.seed
    args.seed = seed
    show = lambda r: print(f"[{'PASS' if r.ok else 'FAIL'}] {r.name}: {r.detail}")
    results, reports = run_selftest(seed=seed, threads=args.threads, progress=show)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "report.csv", reports)
        checks = [dataclasses.asdict(r) for r in results]
        write_manifest(out / "manifest.json", args, reports, {"checks": checks})
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jadd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-drop details")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required: bool):
        p.add_argument("--config", type=Path, required=config_required, help="YAML scenario file")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the file)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for drops")
        p.add_argument("--out", default="out" if config_required else None, help="output directory")

    common(sub.add_parser("run", help="run one scenario file"), True)
    common(sub.add_parser("sweep", help="run the sweep grid of a scenario file"), True)
    common(sub.add_parser("selftest", help="run the invariant suite"), False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    handler = {"run": cmd_run, "sweep": cmd_sweep, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        print(f"jadd: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
