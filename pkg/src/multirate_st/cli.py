"""Command-line driver: ``multirate-st <experiment> [options]``.

Examples::

    multirate-st heatwave1d --dg 0 --coarse 25 --ratio 1:1 --sweep 4
    multirate-st mandel --coarse 1250 --ratio 1:16 --output mandel.csv
    multirate-st appendix_b_check

Options may also come from a ``key = value`` file (``--config``) whose
keys are the :class:`RunConfig` field names; command-line flags win.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import EXPERIMENTS, ConfigError, RunConfig, appendix_b_check, sweep, to_csv
from .slab import SlabError

APPENDIX_B_TOL = 1e-12

_KEYS = {"experiment": str, "dg": int, "coarse": int, "ratio": str, "refine": int, "output": str,
         "reference": float, "sweep": int}


def parse_ratio(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratio must look like 1:4, got {text!r}") from None


def read_config_file(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _KEYS[key](value)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multirate-st", description="Multirate space-time FEM experiments.")
    p.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    p.add_argument("--dg", type=int, help="temporal order (0 or 1)")
    p.add_argument("--coarse", type=int, help="number of coarse temporal elements (slabs)")
    p.add_argument("--ratio", type=parse_ratio, help="refinement of field 1 : field 2, e.g. 1:4")
    p.add_argument("--refine", type=int, help="spatial refinement level (1D heat-wave)")
    p.add_argument("--sweep", type=int, help="number of coarse-step halvings after the first row")
    p.add_argument("--reference", type=float, help="override the reference goal-functional value")
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        values = read_config_file(args.config) if args.config else {}
        for key in _KEYS:
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = flag
        if "experiment" not in values:
            parser.error("an experiment is required (positional or in --config)")
        if isinstance(values.get("ratio"), str):
            values["ratio"] = parse_ratio(values["ratio"])
        refinements = values.pop("sweep", 0)
        cfg = RunConfig(**values).resolved()
        if cfg.experiment == "appendix_b_check":
            diff = appendix_b_check()
            ok = diff <= APPENDIX_B_TOL
            print(f"{'PASS' if ok else 'FAIL'} appendix_b_check max relative difference {diff:.3e}")
            return 0 if ok else 1
        text = to_csv(cfg, sweep(cfg, refinements))
    except (ConfigError, argparse.ArgumentTypeError) as exc:
        parser.error(str(exc))
    except SlabError as exc:
        print(f"error: solver failed at {exc}", file=sys.stderr)
        return 1
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
