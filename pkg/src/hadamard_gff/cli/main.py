"""``hadamard-gff`` command line.

``hadamard-gff run CONFIG [--check] [--out DIR] [--threads N]`` runs one
experiment and writes ``manifest.json`` plus one CSV per result table.
``hadamard-gff reproduce MANIFEST [--out DIR]`` reruns the recorded
config and compares the data rows with the recorded digests.

Exit codes: 0 success, 2 a ``--check`` threshold failed, 1 error.  The
default thread count comes from ``HADAMARD_GFF_THREADS`` (else 1);
``--threads`` overrides it.  Results do not depend on the thread count.
"""
from __future__ import annotations

import argparse
import os
import sys
import time

from .. import __version__
from ..errors import ConfigError, ResourceLimit, SolverFailure, HadamardGFFError
from .config import config_digest, load_config, normalize_config
from .experiments import run_experiment
from .output import data_digest, read_manifest, write_csv, write_manifest, write_operator_dump

__all__ = ["main", "run", "reproduce", "THREADS_ENV"]

THREADS_ENV = "HADAMARD_GFF_THREADS"


def _threads(flag):
    if flag is not None:
        if flag < 1:
            raise ConfigError("--threads must be at least 1")
        return flag
    env = os.environ.get(THREADS_ENV)
    if env is None or env == "":
        return 1
    try:
        value = int(env)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from exc
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
    return value


def run(cfg: dict, out_dir: str, check: bool = False, threads: int = 1, stream=None):
    """Run one experiment and write its files; returns ``(exit_code, manifest)``."""
    stream = sys.stdout if stream is None else stream
    os.makedirs(out_dir, exist_ok=True)
    digest = config_digest(cfg)
    start = time.perf_counter()
    result = run_experiment(cfg, threads)
    wall = time.perf_counter() - start
    meta = {"experiment": cfg["experiment"], "config_digest": digest,
            "seed": cfg["seed"], "version": __version__}
    files = []
    for name, (header, rows) in result.tables.items():
        fname = f"{cfg['experiment']}_{name}.csv"
        d = write_csv(os.path.join(out_dir, fname), dict(meta, table=name), header, rows)
        files.append({"name": fname, "table": name, "data_sha256": d})
    if cfg["dump_operator"] and result.operator is not None:
        write_operator_dump(os.path.join(out_dir, "operator.bin"), result.operator, __version__)
        files.append({"name": "operator.bin", "table": None, "data_sha256": None})
    checks = [{"label": c.label, "value": c.value, "passed": c.passed} for c in result.checks]
    passed = all(c.passed for c in result.checks)
    manifest = {
        "experiment": cfg["experiment"],
        "config": cfg,
        "config_digest": digest,
        "seed": cfg["seed"],
        "version": __version__,
        "wall_time_s": wall,
        "threads": threads,
        "files": files,
        "checks": checks,
    }
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    for f in files:
        print(f"wrote {os.path.join(out_dir, f['name'])}", file=stream)
    code = 0
    if check:
        for c in result.checks:
            print(f"{c.label}: {'PASS' if c.passed else 'FAIL'} (value={c.value:.6g})", file=stream)
        print(f"summary: {'PASS' if passed else 'FAIL'}", file=stream)
        code = 0 if passed else 2
    return code, manifest


def reproduce(manifest_path: str, out_dir=None, threads: int = 1, stream=None):
    """Rerun a recorded experiment; returns ``(exit_code, identical)``."""
    stream = sys.stdout if stream is None else stream
    manifest = read_manifest(manifest_path)
    if manifest.get("version") != __version__:
        print(f"warning: manifest written by version {manifest.get('version')}, "
              f"running version {__version__}", file=sys.stderr)
    cfg = normalize_config(manifest["config"])
    if out_dir is None:
        out_dir = os.path.join(os.path.dirname(os.path.abspath(manifest_path)), "reproduced")
    _, new = run(cfg, out_dir, threads=threads, stream=stream)
    recorded = {f["name"]: f["data_sha256"] for f in manifest.get("files", []) if f["data_sha256"]}
    identical = True
    for f in new["files"]:
        if f["data_sha256"] is None:
            continue
        same = recorded.get(f["name"]) == data_digest(os.path.join(out_dir, f["name"]))
        identical &= same
        print(f"{f['name']}: {'identical' if same else 'differs'}", file=stream)
    print(f"reproduction: {'identical' if identical else 'differs'}", file=stream)
    return 0, identical


def _parser():
    p = argparse.ArgumentParser(prog="hadamard-gff", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--check", action="store_true", help="compare against the acceptance thresholds")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    q = sub.add_parser("reproduce", help="rerun the experiment recorded in a manifest")
    q.add_argument("manifest")
    q.add_argument("--out", help="output directory (default: <manifest dir>/reproduced)")
    q.add_argument("--threads", type=int)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        threads = _threads(args.threads)
        if args.command == "run":
            cfg = load_config(args.config)
            if args.out:
                cfg["out"] = args.out
            code, _ = run(cfg, cfg["out"], check=args.check, threads=threads)
            return code
        if not os.path.exists(args.manifest):
            raise ConfigError(f"manifest {args.manifest} not found")
        code, _ = reproduce(args.manifest, args.out, threads=threads)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except ResourceLimit as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
    except HadamardGFFError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
