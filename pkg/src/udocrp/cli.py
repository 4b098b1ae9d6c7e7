"""Command line: ``udocrp run``, ``udocrp dump`` and ``udocrp list-experiments``."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import platform
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import RandomSource, parse_composition
from .experiments import ACCEPTANCE, DEFAULTS, EXPERIMENTS, ConfigError, resolve_config, run_experiment
from .jccp import build_concatenated, build_forward, build_negative
from .ocrp import OcrpParams, simulate_ocrp
from .skewer import skewer_trajectory


def build_id() -> str:
    """``git describe`` of the source tree, or the package version outside a checkout."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(extra: list) -> dict:
    """``--key value`` / ``--key=value`` pairs into a dict; a bare flag means True."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            out[key.replace("-", "_")] = _value(val)
            i += 1
        elif i + 1 < len(extra) and not extra[i + 1].startswith("--"):
            out[key.replace("-", "_")] = _value(extra[i + 1])
            i += 2
        else:
            out[key.replace("-", "_")] = True
            i += 1
    return out


def _plan(args, overrides: dict) -> list:
    """List of (experiment, overrides) to run."""
    config = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
        if not isinstance(config, dict):
            raise ConfigError("the config file must hold one JSON object")
    names = config.pop("experiment", None)
    if args.experiment:
        names = args.experiment
    plan = []
    for num in args.criterion or []:
        match = [runs for n, _, runs in ACCEPTANCE if n == num]
        if not match:
            raise ConfigError(f"no acceptance criterion {num}")
        plan.extend((name, {**ov, **overrides}) for name, ov in match[0])
    if names:
        names = [names] if isinstance(names, str) else list(names)
        for name in names:
            plan.append((name, {**config, **overrides}))
    if not plan:
        raise ConfigError("nothing to run: give --experiment, --criterion or a config with 'experiment'")
    if args.seed is not None:
        plan = [(name, {**ov, "seed": args.seed}) for name, ov in plan]
    for name, ov in plan:
        resolve_config(name, ov)
    return plan


def _write_outputs(out: Path, reports: list, argv: list) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "passed": all(r.passed for r in reports),
        "results": [r.to_dict() for r in reports],
        "metadata": {
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "build": build_id(),
            "command": ["udocrp", *argv],
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["experiment", "check", "statistic", "p_value", "threshold", "passed"],
                           lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerows(r.summary_rows())
    plot = out / "plotdata"
    for i, r in enumerate(reports):
        for tname, rows in r.tables.items():
            if not rows:
                continue
            plot.mkdir(exist_ok=True)
            with open(plot / f"{i:02d}_{r.name}_{tname}.csv", "w", newline="") as fh:
                w = csv.DictWriter(fh, list(rows[0]), lineterminator="\n")
                w.writeheader()
                w.writerows(rows)


def cmd_run(args, extra) -> int:
    if args.workers is not None:
        os.environ["UDOCRP_WORKERS"] = str(args.workers)
    plan = _plan(args, parse_overrides(extra))
    reports = []
    for name, ov in plan:
        rep = run_experiment(name, ov)
        reports.append(rep)
        if not args.quiet:
            for line in rep.lines():
                print(line)
    _write_outputs(Path(args.out), reports, sys.argv[1:])
    ok = all(r.passed for r in reports)
    print(f"{'PASS' if ok else 'FAIL'}: {sum(r.passed for r in reports)}/{len(reports)} experiments passed; "
          f"report in {args.out}")
    return 0 if ok else 1


def _dump_lines(args) -> list:
    rs = RandomSource(args.seed)
    alpha, theta = args.alpha, args.theta
    params = OcrpParams(alpha, theta)
    if args.what == "jccp":
        f = build_forward(args.n0, params, rs, level_cap=args.level_cap)
        return f.path.dumps().splitlines()
    start = parse_composition(args.start) if args.start else ()
    if args.what == "skewer":
        fw = build_concatenated(start, params, rs, level_cap=args.level_max) if start else []
        neg = build_negative(params, args.level_max, rs, level_cap=args.level_max) if theta > 0 else None
        traj = skewer_trajectory(fw, args.level_max, neg)
    else:
        traj = simulate_ocrp(start, params, args.level_max, rs)
    return [json.dumps({"level": y, "composition": list(c), "mass": sum(c)}) for y, c in traj]


def cmd_dump(args) -> int:
    if not 0 <= args.alpha <= 1 or args.theta < 0:
        raise ConfigError("need alpha in [0, 1] and theta >= 0")
    lines = _dump_lines(args)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_list(args) -> int:
    for name, fn in EXPERIMENTS.items():
        doc = (fn.__doc__ or "").strip().splitlines()[0]
        print(f"{name:26s} {doc}")
        if args.verbose:
            for k, v in DEFAULTS[name].items():
                print(f"    --{k.replace('_', '-'):22s} {v}")
    print("\nacceptance criteria (run with --criterion N):")
    for num, title, runs in ACCEPTANCE:
        print(f"  {num:2d}  {title}  [{', '.join(n for n, _ in runs)}]")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="udocrp", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run experiments and write report.json, summary.csv, plotdata/",
                       epilog="Any other --key value pair overrides an experiment parameter.")
    r.add_argument("--experiment", action="append", help="experiment name (repeatable)")
    r.add_argument("--criterion", type=int, action="append", help="acceptance criterion number (repeatable)")
    r.add_argument("--config", help="flat JSON object of parameters (and optionally 'experiment')")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="results")
    r.add_argument("--workers", type=int, help="worker processes (default: $UDOCRP_WORKERS or 1)")
    r.add_argument("--quiet", action="store_true")

    d = sub.add_parser("dump", help="emit a simulated object as JSON lines")
    d.add_argument("what", choices=["jccp", "skewer", "ocrp"])
    d.add_argument("--alpha", type=float, default=0.5)
    d.add_argument("--theta", type=float, default=0.0)
    d.add_argument("--n0", type=int, default=1)
    d.add_argument("--start", default="1")
    d.add_argument("--level-max", type=float, default=1.0)
    d.add_argument("--level-cap", type=float)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")

    ls = sub.add_parser("list-experiments", help="list experiments and acceptance criteria")
    ls.add_argument("-v", "--verbose", action="store_true", help="show default parameters")
    return p


def main(argv: list | None = None) -> int:
    parser = make_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args, extra)
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        if args.command == "dump":
            return cmd_dump(args)
        return cmd_list(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
