"""``conelab`` command line: run configured campaigns and manage the results store.

Exit codes: 0 all asserted checks pass, 2 a check failed, 1 usage/config/IO error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import experiments as ex
from .errors import ConeLabError, ConfigError, UnknownExperiment, UnknownRun

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
_RUN_KEYS = {"seed", "experiments", "figures"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def results_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get("CONELAB_OUT") or "results")


def load_config(path, seed: int | None = None) -> tuple[dict, list]:
    """Parse a run config into ``(snapshot, [ExperimentConfig])``.

    Accepts ``{"seed": S, "experiments": [...], "figures": bool}`` or a single
    experiment object; ``seed`` overrides every seed in the file.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if "kind" in raw:
        raw = {"seed": raw.pop("seed", None), "experiments": [raw]}
    unknown = set(raw) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    entries = raw.get("experiments")
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: 'experiments' must be a non-empty list")
    master = seed if seed is not None else raw.get("seed")
    cfgs = []
    for e in entries:
        if seed is not None and isinstance(e, dict):
            e = {k: v for k, v in e.items() if k != "seed"}
        cfgs.append(ex.ExperimentConfig.from_dict(e, seed=master))
    names = [c.name for c in cfgs]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: experiment names must be unique, got {names}")
    snapshot = dict(seed=master, figures=bool(raw.get("figures", False)),
                    experiments=[c.to_dict() for c in cfgs])
    return snapshot, cfgs


def _new_run_dir(store: Path, digest: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    base = f"{stamp}-{digest[:8]}"
    d, k = store / base, 1
    while d.exists():
        d, k = store / f"{base}-{k}", k + 1
    d.mkdir(parents=True)
    return d


def cmd_run(args) -> int:
    snapshot, cfgs = load_config(args.config, args.seed)
    cfg_bytes = ex.canonical_json(snapshot)
    digest = hashlib.sha256(cfg_bytes).hexdigest()
    store = results_dir(args.out)
    try:
        run_dir = _new_run_dir(store, digest)
    except OSError as e:
        raise ConfigError(f"cannot create run directory under {store}: {e.strerror or e}") from e
    figures = args.figures or snapshot["figures"]
    t0 = time.perf_counter()
    entries = []
    for cfg in cfgs:
        table = ex.run(cfg, jobs=args.jobs)
        csv_name = f"{cfg.name}.csv"
        (run_dir / csv_name).write_bytes(table.to_csv().encode("utf-8"))
        entry = dict(name=cfg.name, kind=cfg.kind, passed=table.passed, asserted=table.asserted,
                     rows=len(table.rows), csv=csv_name, provenance=table.provenance)
        if figures:
            from .plotting import render

            cols, rows = ex.projection(cfg.kind, table.rows)
            entry["figure"] = f"{cfg.name}.png"
            render(cfg.kind, cols, rows, run_dir / entry["figure"], cfg.name)
        entries.append(entry)
        print(f"{cfg.name}: {'pass' if table.passed else 'FAIL'}", file=sys.stderr)
    (run_dir / "config.json").write_bytes(cfg_bytes)
    manifest = dict(
        run_id=run_dir.name,
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        code_version=__version__,
        seed=snapshot["seed"],
        config=snapshot,
        config_sha256=digest,
        passed=all(e["passed"] for e in entries),
        experiments=entries,
        wall_time_s=round(time.perf_counter() - t0, 3),
    )
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(run_dir.name)
    return EXIT_OK if manifest["passed"] else EXIT_FAIL


def _manifest(store: Path, run_id: str) -> dict:
    path = store / run_id / "manifest.json"
    if not run_id or "/" in run_id or not path.is_file():
        raise UnknownRun(f"no run {run_id!r} in {store}")
    m = json.loads(path.read_text(encoding="utf-8"))
    cfg = (store / run_id / "config.json").read_bytes()
    if hashlib.sha256(cfg).hexdigest() != m.get("config_sha256"):
        raise ConfigError(f"run {run_id}: stored config does not match its manifest hash")
    return m


def cmd_list(args) -> int:
    store = results_dir(args.out)
    if not store.is_dir():
        return EXIT_OK
    for d in sorted(p for p in store.iterdir() if (p / "manifest.json").is_file()):
        m = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        names = ",".join(e["name"] for e in m.get("experiments", []))
        print(f"{d.name}\t{'pass' if m.get('passed') else 'fail'}\t{names}")
    return EXIT_OK


def cmd_show(args) -> int:
    m = _manifest(results_dir(args.out), args.run_id)
    print(f"run {m['run_id']}  seed {m['seed']}  code {m['code_version']}  wall {m['wall_time_s']}s")
    w = csv.writer(sys.stdout, lineterminator="\n", delimiter="\t")
    w.writerow(["experiment", "kind", "status", "asserted", "rows", "csv"])
    for e in m["experiments"]:
        w.writerow([e["name"], e["kind"], "pass" if e["passed"] else "fail", e["asserted"], e["rows"], e["csv"]])
    return EXIT_OK


def cmd_plotdata(args) -> int:
    store = results_dir(args.out)
    m = _manifest(store, args.run_id)
    entry = next((e for e in m["experiments"] if e["name"] == args.experiment), None)
    if entry is None:
        raise UnknownExperiment(f"run {args.run_id} has no experiment {args.experiment!r}")
    with open(store / args.run_id / entry["csv"], newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    cols, data = ex.projection(entry["kind"], rows)
    w = csv.writer(sys.stdout)
    w.writerow(cols)
    for r in data:
        w.writerow([ex._fmt(v) for v in r])
    if args.figure:
        from .plotting import render

        render(entry["kind"], cols, data, args.figure, args.experiment)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="results directory (default $CONELAB_OUT or ./results)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes per experiment")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    p = _Parser(prog="conelab", description=__doc__.splitlines()[0], parents=[common])
    p.add_argument("--version", action="version", version=f"conelab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", parents=[common], help="run the experiments of a JSON config")
    r.add_argument("config")
    r.add_argument("--figures", action="store_true", help="also render a PNG per experiment")
    r.set_defaults(func=cmd_run)
    sub.add_parser("list", parents=[common], help="list stored runs").set_defaults(func=cmd_list)
    s = sub.add_parser("show", parents=[common], help="summarise one run")
    s.add_argument("run_id")
    s.set_defaults(func=cmd_show)
    d = sub.add_parser("plotdata", parents=[common], help="emit plot-ready CSV for one experiment")
    d.add_argument("run_id")
    d.add_argument("experiment")
    d.add_argument("--figure", metavar="FILE", help="also render the projection to an image file")
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for k, v in (("out", None), ("jobs", 1), ("seed", None)):
        if not hasattr(args, k):
            setattr(args, k, v)
    if args.jobs < 1:
        print("conelab: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except ConeLabError as e:
        print(f"conelab: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"conelab: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
