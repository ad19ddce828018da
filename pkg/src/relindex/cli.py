"""Command line entry point: ``relindex --config run.cfg --out results``.

Output directory precedence: ``--out`` flag, then the ``RELINDEX_OUT_DIR``
environment variable, then ``out_dir`` from the config.  The exit code is
0 when every report row passes, otherwise the number of failing rows
(capped at 255); configuration errors exit with 2.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import parse_config
from .errors import ConfigError
from .experiments import emit_plot_data, run_experiment, write_report

ENV_OUT_DIR = "RELINDEX_OUT_DIR"
log = logging.getLogger("relindex")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relindex", description="Relative index experiments and report generation.")
    p.add_argument("--config", required=True, type=Path, help="flat key: value experiment file")
    p.add_argument("--out", type=Path, default=None, help=f"output directory (overrides ${ENV_OUT_DIR} and out_dir)")
    p.add_argument("--seed", type=_u64, default=None, help="override the config seed")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads for independent cases")
    p.add_argument("--verbose", action="store_true", help="log per-case progress to stderr")
    return p


def resolve_out_dir(flag: Path | None, cfg_value: str) -> Path:
    if flag is not None:
        return flag
    env = os.environ.get(ENV_OUT_DIR)
    if env:
        return Path(env)
    return Path(cfg_value)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"relindex: {args.config}: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    out = resolve_out_dir(args.out, cfg.out_dir)
    cfg = cfg.replace(out_dir=str(out))

    report = run_experiment(cfg, threads=args.threads, log=log.info)
    paths = write_report(report, out)
    emit_plot_data(report, out / "plot_data.csv")
    if cfg.plots:
        from .plotting import render_figures

        for p in render_figures(report, out / "figures"):
            log.info("figure %s", p)
    for e in report.errors:
        log.warning("%s: %s", e["case_id"], e["message"])
    status = "PASS" if report.passed else "FAIL"
    print(f"{cfg.kind}: {report.n_pass}/{len(report.rows)} rows pass [{status}] -> {paths['report']}")
    return min(report.n_fail, 255)


if __name__ == "__main__":
    sys.exit(main())
