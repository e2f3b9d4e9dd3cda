"""Command line entry point.

Exit codes: 0 on success, 2 when a bounded search is inconclusive, 1 on usage or data errors.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import logfire
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from codingtrees.amalgamation import audit_dap, audit_fap, audit_sdap, audit_sfap, replay
from codingtrees.brd import big_ramsey_degree, enumerate_shapes, ordered_copies
from codingtrees.catalogue import ClassSpec, ConvexEquivOrder, EnumeratedLimit, parse_class
from codingtrees.config import config
from codingtrees.diagonal import check_diagonal, check_labels, construct_diagonal, label_qq
from codingtrees.errors import BudgetExhausted, CodingTreesError, SpecParseError
from codingtrees.export import brd_payload, dumps, shape_to_dot, structure_payload, to_dot, to_json
from codingtrees.history import RunHistory, RunReport, RunStatus
from codingtrees.indivisibility import run_seeds, to_jsonl
from codingtrees.structures import FinStructure
from codingtrees.typetree import build
from codingtrees.utils import save_artifact, save_report

_CONSOLE_LEVELS = {"WARNING": "warn", "WARN": "warn"}


class UsageError(CodingTreesError):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def status_callback(status: RunStatus):
    """Show progress on stderr with rich."""
    console = Console(stderr=True)
    status_text = f"[bold cyan]{status.task_name}[/bold cyan]: {status.status}"
    if status.progress is not None:
        status_text += f" ([bold green]{status.progress:.1f}%[/bold green])"
    console.print(" " * 80, end="\r")
    console.print(status_text, end="\r")


def load_structure(path: Path | str, spec: ClassSpec) -> FinStructure:
    """Read a FinStructure JSON file; a file without ``lang`` is read over the class language."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SpecParseError(f"Cannot read structure file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise SpecParseError(f"Structure file {path} must hold a JSON object")
    raw.pop("schema_version", None)
    try:
        if "lang" in raw:
            return FinStructure.model_validate(raw)
        return FinStructure.build(spec.language(), int(raw.get("size", 0)), raw.get("tuples", {}))
    except (ValidationError, TypeError, ValueError) as e:
        raise SpecParseError(f"Malformed structure in {path}: {e}") from e


def _formats(args: argparse.Namespace, allowed: Sequence[str], default: str) -> str:
    fmt = args.format or default
    if fmt not in allowed:
        raise UsageError(f"'{args.command}' writes {', '.join(allowed)}, not {fmt}")
    return fmt


def _violation_table(title: str, rows: List[Tuple[str, str]]) -> Table:
    table = Table(title=title)
    table.add_column("rule", style="cyan")
    table.add_column("message")
    for rule, message in rows:
        table.add_row(rule, message)
    return table


class CodingTreesRunner:
    """Dispatches one parsed command line and keeps a report per run."""

    def __init__(
        self, persist: bool = False, max_history: int = 50, callback: Optional[Callable[[RunStatus], None]] = None
    ):
        self.persist = persist
        self.callback = callback
        self.history = RunHistory(max_items=max_history)
        self.console = Console(stderr=True)

    @save_report()
    def run(self, args: argparse.Namespace) -> int:
        params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and v is not None}
        self.history.append(RunReport(subcommand=args.command, parameters={k: str(v) for k, v in params.items()}))
        try:
            with logfire.span("cli {command}", command=args.command):
                text, outcome, stats = args.func(self, args)
        except BudgetExhausted as e:
            self.history.set_outcome("inconclusive", {"explored": e.explored})
            self.console.print(f"[bold yellow]Inconclusive:[/bold yellow] {e}")
            return 2
        except (CodingTreesError, ValidationError) as e:
            self.history.set_outcome("error", {"message": str(e)})
            self.console.print(f"[bold red]Error:[/bold red] {e}")
            return 1
        if args.output:
            path = save_artifact(args.output, text)
            self.history.get_current_item().artifacts.append(str(path))
        else:
            sys.stdout.write(text)
        self.history.set_outcome(outcome, stats)
        return {"ok": 0, "inconclusive": 2}.get(outcome, 1)

    def tree_build(self, args: argparse.Namespace) -> Tuple[str, str, Dict[str, Any]]:
        fmt = _formats(args, ("dot", "json"), "json")
        limit = EnumeratedLimit(parse_class(args.cls), salt=args.seed)
        tree = build(limit, args.depth, args.mode)
        text = to_dot(tree) if fmt == "dot" else to_json(tree)
        return text, "ok", {"nodes": tree.node_count()}

    def _diagonal(self, args: argparse.Namespace):
        spec = parse_class(args.cls)
        return spec, construct_diagonal(EnumeratedLimit(spec, salt=args.seed), args.depth, args.mode, self.callback)

    def diag_build(self, args: argparse.Namespace) -> Tuple[str, str, Dict[str, Any]]:
        fmt = _formats(args, ("dot", "json"), "json")
        spec, T = self._diagonal(args)
        tree = label_qq(T) if args.labeled else T
        text = to_dot(tree) if fmt == "dot" else to_json(tree)
        return text, "ok", {"levels": len(T.levels), "critical": T.depth}

    def diag_check(self, args: argparse.Namespace) -> Tuple[str, str, Dict[str, Any]]:
        _formats(args, ("json",), "json")
        spec, T = self._diagonal(args)
        violations = check_diagonal(T)
        if isinstance(spec, ConvexEquivOrder):
            violations += check_labels(label_qq(T))
        if violations:
            self.console.print(_violation_table("violations", [(v.rule, v.message) for v in violations]))
        payload = {
            "schema_version": config.schema_version,
            "spec": spec.label,
            "depth": T.depth,
            "violations": [v.model_dump() for v in violations],
        }
        return dumps(payload), "ok" if not violations else "error", {"violations": len(violations)}

    def brd(self, args: argparse.Namespace) -> Tuple[str, str, Dict[str, Any]]:
        spec = parse_class(args.cls)
        A = load_structure(args.structure, spec)
        if args.list_shapes:
            shapes = [shape for _, B in ordered_copies(A) for shape in enumerate_shapes(B, spec)]
            if args.list_shapes == "dot":
                return "".join(shape_to_dot(s) for s in shapes), "ok", {"shapes": len(shapes)}
            payload = {"schema_version": config.schema_version, "shapes": [s.model_dump(mode="json") for s in shapes]}
            return dumps(payload), "ok", {"shapes": len(shapes)}
        _formats(args, ("json",), "json")
        report = big_ramsey_degree(A, spec, self.callback)
        self.console.print(f"[bold]T(A, K)[/bold] = {report.total}")
        return dumps(brd_payload(report)), "ok", {"total": report.total}

    def amalg(self, args: argparse.Namespace) -> Tuple[str, str, Dict[str, Any]]:
        _formats(args, ("json",), "json")
        spec = parse_class(args.cls)
        prop = args.property.upper()
        if prop == "FAP":
            verdict = audit_fap(spec, args.bound2, self.callback)
        elif prop == "DAP":
            verdict = audit_dap(spec, args.bound2, self.callback)
        elif prop == "SFAP":
            verdict = audit_sfap(spec, args.bound2, self.callback)
        else:
            verdict = audit_sdap(spec, args.bound1, args.bound2, self.callback)
        payload = {
            "schema_version": config.schema_version,
            **json.loads(verdict.model_dump_json()),
            "replayed": replay(verdict, spec) if verdict.outcome == "fails" else None,
        }
        outcome = "inconclusive" if verdict.outcome == "inconclusive" else "ok"
        self.console.print(f"[bold]{prop}[/bold] {spec.label}: {verdict.outcome}")
        return dumps(payload), outcome, {"cases": verdict.cases, "verdict": verdict.outcome}

    def indiv(self, args: argparse.Namespace) -> Tuple[str, str, Dict[str, Any]]:
        _formats(args, ("jsonl",), "jsonl")
        spec = parse_class(args.cls)
        seeds = range(args.seed, args.seed + args.seeds)
        reports = list(run_seeds(spec, args.target, args.depth, seeds, args.colors, args.source, self.callback))
        found = sum(r.found for r in reports)
        self.console.print(f"[bold]found[/bold] {found}/{len(reports)}")
        outcome = "ok" if found == len(reports) else "inconclusive"
        return to_jsonl(reports), outcome, {"found": found, "seeds": len(reports)}

    def prefix(self, args: argparse.Namespace) -> Tuple[str, str, Dict[str, Any]]:
        _formats(args, ("json",), "json")
        limit = EnumeratedLimit(parse_class(args.cls), salt=args.seed)
        K = limit.ensure(args.size).prefix(args.size)
        return dumps(structure_payload(K)), "ok", {"size": K.size}


def _common(p: argparse.ArgumentParser, needs_class: bool = True) -> None:
    if needs_class:
        p.add_argument("--class", dest="cls", required=True, help="Class spec, e.g. q, rado, hypergraph:3")
    p.add_argument("--format", choices=("json", "dot", "jsonl"), default=None)
    p.add_argument("--output", type=Path, default=None, help="Write here instead of stdout")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="codingtrees", description="Coding trees of 1-types for enumerated Fraisse limits")
    parser.add_argument("--record", action="store_true", help=f"Append a run report under {config.output_path}")
    parser.add_argument("--verbose", action="store_true", help="Print logfire records to the console")
    sub = parser.add_subparsers(dest="command", required=True)

    tree = sub.add_parser("tree").add_subparsers(dest="action", required=True)
    p = tree.add_parser("build")
    _common(p)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--mode", choices=("S", "U"), default=None)
    p.set_defaults(func=CodingTreesRunner.tree_build)

    diag = sub.add_parser("diag").add_subparsers(dest="action", required=True)
    for action, func in (("build", CodingTreesRunner.diag_build), ("check", CodingTreesRunner.diag_check)):
        p = diag.add_parser(action)
        _common(p)
        p.add_argument("--depth", type=int, required=True, help="Number of critical levels")
        p.add_argument("--mode", choices=("S", "U"), default=None)
        if action == "build":
            p.add_argument("--labeled", action="store_true", help="Attach splitting-node labels (qq only)")
        p.set_defaults(func=func)

    p = sub.add_parser("brd")
    _common(p)
    p.add_argument("--structure", type=Path, required=True, help="FinStructure JSON file")
    p.add_argument("--list-shapes", choices=("dot", "json"), default=None)
    p.set_defaults(func=CodingTreesRunner.brd)

    p = sub.add_parser("amalg")
    _common(p)
    p.add_argument("--property", choices=("fap", "dap", "sfap", "sdap"), default="sdap")
    p.add_argument("--bound1", type=int, default=config.sdap_bound1)
    p.add_argument("--bound2", type=int, default=config.sdap_bound2)
    p.set_defaults(func=CodingTreesRunner.amalg)

    p = sub.add_parser("indiv")
    _common(p)
    p.add_argument("--depth", type=int, default=200, help="Prefix size N searched")
    p.add_argument("--target", type=int, default=5, help="Size m of the target prefix")
    p.add_argument("--colors", type=int, default=2)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--source", choices=("random", "parity", "interval"), default="random")
    p.set_defaults(func=CodingTreesRunner.indiv)

    p = sub.add_parser("prefix")
    _common(p)
    p.add_argument("--size", type=int, required=True)
    p.set_defaults(func=CodingTreesRunner.prefix)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    console = Console(stderr=True)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        console.print(f"[bold red]Usage:[/bold red] {e}")
        return 1
    level = _CONSOLE_LEVELS.get(config.log_level, config.log_level.lower())
    logfire.configure(
        send_to_logfire="if-token-present",
        console=logfire.ConsoleOptions(min_log_level=level) if args.verbose else False,
    )
    runner = CodingTreesRunner(persist=args.record, callback=status_callback if args.verbose else None)
    return runner.run(args)


if __name__ == "__main__":
    sys.exit(main())
