"""Command line entry point: ``klsp4 {compute,sweep,verify,oracle-diff,table}``."""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .bounds import BoundKind
from .engine import Sp4Engine
from .exceptions import BudgetExceeded, ConfigurationException, IdentityViolation, InvalidInput
from .harness import render_rows_text, rows_to_csv, rows_to_jsonl
from .models import EngineConfig, SweepConfig
from .structure import CellParams, CharacterPair, WeylWord
from .welldefined import render_table_markdown

logger = logging.getLogger("klsp4.cli")

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_INVALID_INPUT = 2
EXIT_BUDGET_EXCEEDED = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--budget-terms", type=int, default=None, help="maximum number of summed terms")
    parser.add_argument("--out", default=None, help="write output to PATH instead of stdout")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def _add_cell(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--prime", type=int, required=required)
    parser.add_argument("--weyl", required=required, help="id, sa, sb, sasb, sbsa, sasbsa, sbsasb or w0")
    parser.add_argument("--r", type=int, default=0)
    parser.add_argument("--s", type=int, default=0)
    for name in ("m1", "m2", "n1", "n2"):
        parser.add_argument(f"--{name}", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="klsp4", description="Exact Kloosterman sums on Sp(4)")
    sub = ap.add_subparsers(dest="command", required=True)

    compute = sub.add_parser("compute", help="evaluate one cell")
    _add_cell(compute)
    compute.add_argument("--bound", choices=[kind.value for kind in BoundKind], default=None)
    compute.add_argument("--format", choices=["json", "csv", "text"], default="json")
    _add_common(compute)

    sweep = sub.add_parser("sweep", help="evaluate a grid of cells from a TOML config")
    sweep.add_argument("--config", required=True, help="TOML file mirroring SweepConfig")
    sweep.add_argument("--format", choices=["json", "csv", "text"], default="json")
    _add_common(sweep)

    verify = sub.add_parser("verify", help="run the identity suite")
    _add_cell(verify, required=False)
    verify.add_argument("--hat-offset", type=int, default=0, help="perturb hat congruences (fault injection)")
    _add_common(verify)

    diff = sub.add_parser("oracle-diff", help="compare the closed form with enumeration")
    _add_cell(diff)
    _add_common(diff)

    table = sub.add_parser("table", help="emit the well-definedness table")
    table.add_argument("--format", choices=["json", "md"], default="json")
    _add_common(table)
    return ap


def _configure_logging(verbose: int, config: EngineConfig) -> None:
    level = {0: config.log_level, 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _cell_from(args: argparse.Namespace) -> CellParams:
    return CellParams(WeylWord.parse(args.weyl), args.prime, args.r, args.s)


def _chars_from(args: argparse.Namespace) -> CharacterPair:
    return CharacterPair(m1=args.m1, m2=args.m2, n1=args.n1, n2=args.n2)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"wrote {out}")
    else:
        sys.stdout.write(text)


def _dump(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _render_rows(rows, fmt: str) -> str:
    if fmt == "csv":
        return rows_to_csv(rows)
    if fmt == "text":
        return render_rows_text(rows)
    return rows_to_jsonl(rows)


def _run(args: argparse.Namespace) -> int:
    config = EngineConfig.from_env()
    if args.budget_terms is not None:
        config = EngineConfig(budget_terms=args.budget_terms, default_cap=config.default_cap, log_level=config.log_level)
    _configure_logging(args.verbose, config)
    engine = Sp4Engine(config)

    if args.command == "compute":
        bound = BoundKind(args.bound) if args.bound else None
        row = engine.compute(_cell_from(args), _chars_from(args), bound)
        _emit(_render_rows([row], args.format), args.out)
        return EXIT_OK

    if args.command == "sweep":
        cfg = SweepConfig.from_toml(args.config)
        if args.budget_terms is not None or os.getenv("KLSP4_BUDGET"):
            cfg.budget_terms = config.budget_terms
        rows = engine.sweep(cfg)
        _emit(_render_rows(rows, args.format), args.out)
        return EXIT_OK

    if args.command == "verify":
        grid = None
        if args.weyl is not None or args.prime is not None:
            if args.weyl is None or args.prime is None:
                raise InvalidInput("verify needs both --prime and --weyl, or neither")
            grid = [(_cell_from(args), _chars_from(args))]
        summary = engine.verify(grid, hat_offset=args.hat_offset)
        _emit(_dump(summary.as_dict()), args.out)
        return EXIT_OK if summary.passed else EXIT_VERIFICATION_FAILED

    if args.command == "oracle-diff":
        diff = engine.oracle_diff(_cell_from(args), _chars_from(args))
        _emit(_dump(diff.as_dict()), args.out)
        return EXIT_OK if diff.equal else EXIT_VERIFICATION_FAILED

    rows = engine.table()
    _emit(render_table_markdown(rows) if args.format == "md" else _dump(rows), args.out)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except BudgetExceeded as e:
        logger.error(str(e))
        return EXIT_BUDGET_EXCEEDED
    except (InvalidInput, ConfigurationException) as e:
        logger.error(str(e))
        return EXIT_INVALID_INPUT
    except IdentityViolation as e:
        logger.error(str(e))
        return EXIT_VERIFICATION_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
