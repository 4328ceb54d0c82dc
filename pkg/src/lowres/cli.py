"""Command-line entry point.

    lowres compare-criteria --config exp.ini --seed 0 --out results/
    lowres fogip-compare --set fogip.n=10 -R 30
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments, reports
from .config import ConfigError, dump_config, load_config

log = logging.getLogger("lowres")

COMMANDS = {
    "compare-criteria": experiments.compare_criteria,
    "fogip-compare": experiments.fogip_compare,
    "hyper-grid": experiments.hyper_grid,
    "stop-analysis": experiments.stop_point_analysis,
    "size-sweep": experiments.size_sweep,
    "pe-estimate": experiments.pe_estimate,
    "train": experiments.train_runs,
}

EXIT_CODES = {"config": 2, "data": 3, "run": 4, "write": 5}


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage} stage failed: {exc}")
        self.stage = stage


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    s = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", default=s, help="INI config file")
    p.add_argument("--seed", type=int, default=s, help="base seed; repetition r uses seed + r")
    p.add_argument("--jobs", type=int, default=s, help="parallel worker processes")
    p.add_argument("--out", metavar="DIR", default=s, help="output directory")
    p.add_argument("-R", "--repetitions", type=int, default=s)
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=s,
                   help="override a config entry, e.g. --set optim.learning_rate=0.02")
    p.add_argument("-v", "--verbose", action="store_true", default=s)
    return p


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(prog="lowres", parents=[flags],
                                     description="Validation-free training experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[flags])
    return parser


def _overrides(ns) -> dict:
    pairs = {}
    for item in getattr(ns, "set", []) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    for flag in ("seed", "jobs", "out", "repetitions"):
        if hasattr(ns, flag):
            pairs[flag] = str(getattr(ns, flag))
    return pairs


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # noqa: BLE001 - reported with the stage name
        raise StageError(name, exc) from exc


def run(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _stage("config", lambda: load_config(getattr(ns, "config", None), _overrides(ns)))
        _stage("data", experiments.base_dataset, cfg.data, cfg.seed)
        result = _stage("run", COMMANDS[ns.command], cfg)

        def write():
            out = Path(cfg.out)
            if ns.command == "pe-estimate":
                paths = reports.write_pe(result, out)
            else:
                paths = reports.write_table(result, out)
            (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
            return paths

        paths = _stage("write", write)
    except StageError as err:
        print(f"lowres {ns.command}: {err}", file=sys.stderr)
        return EXIT_CODES[err.stage]
    for p in paths[:2]:
        print(p)
    if ns.command != "pe-estimate":
        header, rows = reports.summary_rows(result)
        print(",".join(header))
        for row in rows:
            print(",".join(str(c) for c in row))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
