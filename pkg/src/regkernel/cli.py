"""Command-line interface.

Subcommands:

* ``run <config>``      — execute an experiment config; exit status is 0 on
  success, 1 when a deterministic invariant failed, 2 on config errors.
* ``validate <config>`` — parse and window-check a config without running.
* ``enumerate <n> <d>`` — print every matrix of the class, one per line.
* ``decompose <vector.csv> <k> <d>`` — print the level-set decomposition of
  the lattice approximation of a vector.
"""

from __future__ import annotations

import argparse
import json
import sys

from .ell_decomp import decompose, k_approx
from .harness import ConfigError, parse_config, run, validate, worker_count
from .sampler import enumerate_all
from .taxonomy import read_vector_csv

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regkernel",
        description="Experiment runner for sparse regular 0/1 matrix kernels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config file")
    p_run.add_argument("config", help="path to a flat key=value config file")

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config", help="path to a flat key=value config file")

    p_enum = sub.add_parser("enumerate", help="list all n-by-n 0/1 matrices with row/column sums d")
    p_enum.add_argument("n", type=int)
    p_enum.add_argument("d", type=int)

    p_dec = sub.add_parser("decompose", help="level-set decomposition of a vector's k-approximation")
    p_dec.add_argument("vector", help="CSV file with one coordinate per line (re[,im])")
    p_dec.add_argument("k", type=int, help="lattice scale (coordinates snap to Z^2/k)")
    p_dec.add_argument("d", type=int, help="degree; spread separation threshold is d/k")
    return parser


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    return run(cfg)


def _cmd_validate(args) -> int:
    cfg = parse_config(args.config)
    derived = validate(cfg)
    print(f"config ok: kind={cfg.kind} n={cfg.n} d={cfg.d} trials={cfg.trials} seed={cfg.seed}")
    print(f"output directory: {cfg.out_dir}")
    print(f"workers: {worker_count()}")
    if derived:
        print(json.dumps(derived, sort_keys=True, indent=2, default=str))
    return 0


def _cmd_enumerate(args) -> int:
    matrices = enumerate_all(args.n, args.d)
    for M in matrices:
        print(";".join(",".join(str(int(c)) for c in row) for row in M.row_supports))
    print(f"{len(matrices)} matrices with n={args.n}, d={args.d}", file=sys.stderr)
    return 0


def _cmd_decompose(args) -> int:
    x = read_vector_csv(args.vector)
    dec = decompose(k_approx(x, args.k), args.d)
    print(f"n={dec.n} k={dec.k} d={dec.d} parts={dec.m} spread_total={dec.spread_total}")
    print("part,kind,order,height,size")
    for q in range(dec.m):
        kind = "spread" if dec.part_is_spread[q] else "regular"
        print(f"{q},{kind},{dec.part_order[q]},{dec.part_heights[q]},{dec.part_sizes[q]}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "enumerate": _cmd_enumerate,
        "decompose": _cmd_decompose,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
