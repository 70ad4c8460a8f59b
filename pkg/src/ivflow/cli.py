"""Command line interface.

Subcommands: ``run``, ``resume``, ``check``, ``kato-survey``,
``commutator-survey``.  Exit codes for runs: 0 completed, 2 resolution
lost, 3 non-finite fields, 4 configuration errors.
"""

import argparse
import sys
import time

from .config import ConfigError, parse_config
from .driver import EXIT_CONFIG_ERROR, resume, run
from .io_utils import CheckpointError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ivflow",
        description="Periodic-box ideal viscoelastic flow solver with "
                    "blowup-criterion diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation from a config file")
    p_run.add_argument("--config", required=True)

    p_resume = sub.add_parser("resume", help="continue from a checkpoint")
    p_resume.add_argument("--checkpoint", required=True)
    p_resume.add_argument("--config", required=True)

    p_check = sub.add_parser("check", help="run the built-in verification suite")
    p_check.add_argument("--n", type=int, default=32)

    p_kato = sub.add_parser("kato-survey",
                            help="fit the gradient-bound constant on random fields")
    p_comm = sub.add_parser("commutator-survey",
                            help="fit the derivative-commutator constant")
    for p in (p_kato, p_comm):
        p.add_argument("--n", type=int, default=32)
        p.add_argument("--ensemble", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)

    if args.command == "run":
        return _cmd_run(args.config, None)
    if args.command == "resume":
        return _cmd_run(args.config, args.checkpoint)
    if args.command == "check":
        return _cmd_check(args.n)
    if args.command == "kato-survey":
        return _cmd_kato(args.n, args.ensemble, args.seed)
    if args.command == "commutator-survey":
        return _cmd_commutator(args.n, args.ensemble, args.seed)
    return 2  # pragma: no cover


def _cmd_run(config_path, checkpoint_path) -> int:
    try:
        config = parse_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        if checkpoint_path is None:
            result = run(config, quiet=False)
        else:
            result = resume(checkpoint_path, config, quiet=False)
    except (CheckpointError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    for key, value in result.summary.items():
        print(f"{key} = {value}")
    return result.exit_code


def _cmd_check(n: int) -> int:
    from .checks import run_check_suite

    start = time.perf_counter()
    results, _ = run_check_suite(n=n)
    for res in results:
        print(res.line())
    elapsed = time.perf_counter() - start
    print(f"check suite finished in {elapsed:.1f} s")
    return 0 if all(r.passed for r in results) else 1


def _cmd_kato(n: int, ensemble: int, seed: int) -> int:
    from .diagnostics import kato_survey
    from .spectral import Grid

    print(kato_survey(ensemble, seed, Grid(n)).as_text(), end="")
    return 0


def _cmd_commutator(n: int, ensemble: int, seed: int) -> int:
    from .curl_system import moser_ratio_survey
    from .spectral import Grid

    print(moser_ratio_survey(ensemble, seed, Grid(n)).as_text(), end="")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
