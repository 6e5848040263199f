"""Command-line launcher: ``qmpi -n <ranks> --program <name> [options]``."""
from __future__ import annotations

import argparse
import sys

from .errors import QmpiError, RankPanic
from .runtime import LaunchSpec, registered_programs, run_shots
from .scheduling import DEFAULT_TIMEOUT, SCHEDULERS


def _positive(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmpi", description="Run an SPMD quantum program on N simulated ranks.")
    p.add_argument("-n", dest="ranks", type=_positive, required=True, help="number of ranks")
    p.add_argument("--program", required=True, help="registered program name")
    p.add_argument("--config", help="network config file (key=value lines)")
    p.add_argument("--seed", type=int, default=None, help="base RNG seed (shot k uses seed+k)")
    p.add_argument("--scheduler", choices=sorted(SCHEDULERS), default="round-robin-deterministic")
    p.add_argument("--trace", help="write the first shot's operation trace here")
    p.add_argument("--shots", type=_positive, default=1, help="repeat the launch and tally results")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="deadlock timeout in seconds")
    p.add_argument("--asm", help="assembly file for rank 0 (nqasm-run)")
    p.add_argument("--peer-asm", help="assembly file for rank 1 (nqasm-run)")
    return p


def format_counts(counts, shots: int) -> list[str]:
    lines = [f"shots: {shots}"]
    for bits, n in sorted(counts.items()):
        lines.append(f"{bits}: {n} ({n / shots:.4f})")
    return lines


def main(argv=None) -> int:
    parser = build_parser()
    opts = parser.parse_args(argv)
    args = {k: v for k, v in (("asm", opts.asm), ("peer_asm", opts.peer_asm)) if v}
    spec = LaunchSpec(
        program_name=opts.program,
        num_ranks=opts.ranks,
        config_path=opts.config,
        seed=opts.seed,
        scheduler=opts.scheduler,
        trace_path=opts.trace,
        timeout=opts.timeout,
        args=args,
    )
    if opts.program not in registered_programs():
        parser.error(f"unknown program {opts.program!r}; choose from {', '.join(registered_programs())}")
    try:
        counts, first = run_shots(spec, opts.shots)
    except RankPanic as exc:
        print(f"error: rank {exc.rank} failed: {type(exc.cause).__name__}: {exc.cause}", file=sys.stderr)
        return 1
    except (QmpiError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for rank, line in first.outputs:
        print(f"rank={rank}: {line}")
    if any(first.results.values()):
        for line in format_counts(counts, opts.shots):
            print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
