"""``vfefl`` command line: DVFE benchmarks, experiment runs and a demo transcript."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import bench, demo
from .errors import ConfigError, DatasetError, VfeflError
from .flsim import CSV_COLUMNS, ExperimentConfig, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError("dimensions must be positive integers")
    return dims


def _writer(path):
    if path is None or str(path) == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_bench(args) -> int:
    spec = bench.BenchSpec(args.dims, args.clients, args.reps, args.profile, args.seed)
    fh, close = _writer(args.out)
    try:
        w = csv.DictWriter(fh, fieldnames=bench.BENCH_COLUMNS)
        w.writeheader()
        for row in bench.run_bench(spec):
            w.writerow({**row, "mean_s": f"{row['mean_s']:.6f}", "median_s": f"{row['median_s']:.6f}"})
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_yaml(args.config)
    if args.mode:
        cfg = cfg.replace(mode=args.mode)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    result = run_experiment(cfg)
    fh, close = _writer(args.out)
    try:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for rec in result.records:
            w.writerow(rec.csv_row())
    finally:
        if close:
            fh.close()
    total = sum(msg.nbytes for msg in result.messages)
    print(
        f"rounds={len(result.records)} final_accuracy={result.final_accuracy:.4f} "
        f"final_asr={result.final_asr:.4f} message_bytes={total}",
        file=sys.stderr if fh is sys.stdout else sys.stdout,
    )
    return EXIT_OK


def cmd_demo(args) -> int:
    if args.corrupt_client is not None and not 1 <= args.corrupt_client <= 3:
        raise ConfigError("--corrupt-client must be 1, 2 or 3")
    sys.stdout.write(demo.render(demo.transcript(seed=args.seed, corrupt_client=args.corrupt_client)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vfefl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bench-dvfe", help="time every DVFE operation over a grid of dimensions")
    b.add_argument("--dims", type=_dims, default=bench.DEFAULT_DIMS, help="comma-separated, e.g. 10,50,100")
    b.add_argument("--clients", type=int, default=3)
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--profile", choices=("test", "benchmark"), default="test")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", type=Path, default=None, help="CSV path (default stdout)")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("run", help="run a federated-learning experiment from a YAML config")
    r.add_argument("--config", type=Path, required=True)
    r.add_argument("--mode", choices=("plaintext-oracle", "full-crypto"), default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", type=Path, default=None, help="per-round CSV path (default stdout)")
    r.set_defaults(func=cmd_run)

    for name in ("demo", "keygen-demo"):
        d = sub.add_parser(name, help="print a transcript of one DVFE round (n=3, m=4)")
        d.add_argument("--seed", type=int, default=0)
        d.add_argument("--corrupt-client", type=int, default=None, metavar="ID")
        d.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetError, ValueError) as exc:
        print(f"vfefl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VfeflError, RuntimeError, OSError) as exc:
        print(f"vfefl: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
