"""Command-line entry point: ``bkuq <scenario> [options]``."""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
from pathlib import Path
import shutil
import sys
import tempfile
import time
import warnings

from .config import ConfigError, load_config
from .output import write_csv, write_manifest, write_plot_script

log = logging.getLogger("bkuq")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--no-plots", action="store_true", help="write CSVs only")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="bkuq", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "gap-certify", "gpc-converge", "validate"):
        sub.add_parser(name, parents=[common])
    d = sub.add_parser("decay", parents=[common])
    d.add_argument("--init", choices=("macro", "micro"))
    d.add_argument("--orders", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated derivative orders, e.g. 0,1")
    c = sub.add_parser("cache", parents=[common])
    c.add_argument("action", choices=("build", "verify", "purge"))
    return p


@contextlib.contextmanager
def thread_limit(n):
    """Cap BLAS and numba threads; None means all available cores."""
    from threadpoolctl import threadpool_limits
    import numba
    n = n or os.cpu_count() or 1
    old = numba.get_num_threads()
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    try:
        with threadpool_limits(limits=n):
            yield n
    finally:
        numba.set_num_threads(old)


def run_scenario(cfg, scenario, out, plots=True, **kw):
    """Run into a scratch directory and move the files into ``out`` on success."""
    from .scenarios import RUNNERS
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        try:
            tables, summary, ok = RUNNERS[scenario](cfg, **kw)
        except Exception as e:
            raise RuntimeError(f"scenario {scenario!r} failed: {e}") from e
        files = []
        for name, (header, rows, n_keys) in tables.items():
            write_csv(tmp / name, header, rows, n_keys)
            files.append(name)
        if plots:
            files.append(write_plot_script(tmp, scenario).name)
        files.append("manifest.json")
        echo = dict(cfg, experiment=dict(cfg["experiment"], scenario=scenario))
        write_manifest(tmp / "manifest.json", echo, scenario,
                       round(time.perf_counter() - t0, 3), files, summary)
        for name in files:
            os.replace(tmp / name, out / name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return ok, summary, [out / f for f in files]


def _cache_command(cfg, action):
    from .scenarios import cache_build, cache_purge, cache_verify
    if not cfg["experiment"]["cache_dir"]:
        raise ConfigError("cache commands need experiment.cache_dir in the config")
    if action == "build":
        for p in cache_build(cfg):
            print(p)
        return EXIT_OK
    if action == "purge":
        print(f"removed {cache_purge(cfg)} entries")
        return EXIT_OK
    ok, report = cache_verify(cfg)
    for name, msg in report:
        print(f"{name}: {msg}")
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None):
    args = _parser().parse_args(argv)
    warnings.filterwarnings("ignore", message=".*TBB threading layer")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_ERROR
    threads = args.threads or cfg["experiment"]["threads"]
    try:
        with thread_limit(threads):
            if args.command == "cache":
                return _cache_command(cfg, args.action)
            kw = {}
            if args.command == "decay":
                kw = {"init": args.init, "orders": args.orders}
                if args.orders and max(args.orders) > cfg["model"]["alpha"]:
                    raise ConfigError(f"decay orders must lie in 0..alpha={cfg['model']['alpha']}")
            out = args.out or Path(cfg["experiment"]["output_dir"])
            ok, summary, files = run_scenario(cfg, args.command, out, not args.no_plots, **kw)
    except Exception as e:
        from ..velocity_ops.cache import CacheCorrupt
        if isinstance(e, CacheCorrupt) or isinstance(e.__cause__, CacheCorrupt):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_FAIL
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    for f in files:
        print(f)
    if not ok:
        print(f"validation failed: {', '.join(summary.get('failed', []))}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
