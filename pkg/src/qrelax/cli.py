"""Command-line front end and REPL.

Loads a data directory (schema.cfg + one CSV per relation), an optional
similarity bindings file, and an optional rules file; then answers queries,
reports failing ones, and enumerates ranked relaxations.

Exit codes: 0 for a successful command, 1 for a failing query, 2 for usage
or data errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable

from .algebra import AnswerTable, SPJQuery, canonical_key, evaluate, translate
from .datastore import Database, load_database
from .errors import QRelaxError
from .querylang import RuleBase, format_query, format_rule, parse_query, parse_rules_text
from .relaxation import RelaxationStep, describe_step, relax_one_step
from .similarity import SimilarityConfig, load_similarity_config
from .values import Degree, format_degree, parse_rational
from .weighting import (
    Agg,
    DcMode,
    WeightingPolicy,
    combine_step_degrees,
    filter_threshold,
    score_table,
    weight_candidate,
)

OK, FAILING, ERROR = 0, 1, 2


@dataclass
class SessionConfig:
    data_dir: Path
    sim_path: Path | None = None
    rules_path: Path | None = None
    policy: WeightingPolicy = field(default_factory=WeightingPolicy)
    ops: tuple[str, ...] = ("DC", "AI", "GR")
    top_k: int | None = None
    max_steps: int = 1
    fmt: str = "text"
    force: bool = False


class Session:
    """Loaded state shared by all commands of one run or REPL session."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.db: Database = load_database(config.data_dir)
        if config.sim_path is not None:
            self.sim_cfg = load_similarity_config(config.sim_path, self.db.schemas)
        else:
            self.sim_cfg = SimilarityConfig()
        if config.rules_path is not None:
            self.rules = parse_rules_text(Path(config.rules_path).read_text())
        else:
            self.rules = RuleBase(())


def _render_table(table: AnswerTable, fmt: str) -> str:
    return table.to_csv().rstrip("\n") if fmt == "csv" else table.to_text()


def _status(table: AnswerTable) -> str:
    return "FAILING" if table.is_empty else f"OK({len(table.rows)} rows)"


def cmd_query(session: Session, query_text: str, out: IO[str] | None = None) -> int:
    """Evaluate one query and print its table plus a status line."""
    out = out if out is not None else sys.stdout
    q = parse_query(query_text)
    spj = translate(q, session.db.schemas)
    table = evaluate(spj, session.db)
    print(_render_table(table, session.config.fmt), file=out)
    print(_status(table), file=out)
    return FAILING if table.is_empty else OK


@dataclass
class RelaxedAnswer:
    """One node of the breadth-first relaxation expansion."""

    query: SPJQuery
    steps: tuple[RelaxationStep, ...]
    table: AnswerTable
    score: Degree
    order_key: tuple


def expand_relaxations(session: Session, spj: SPJQuery) -> list[RelaxedAnswer]:
    """All candidates up to `max_steps`, weighted, filtered, and scored.

    Depth-one candidates are reported exactly as enumerated; deeper levels
    skip queries structurally equal to one already produced. Degrees across
    steps combine multiplicatively, a deeper candidate inheriting its
    parent's table score as the previous-step degree.
    """
    policy = session.config.policy
    results: list[RelaxedAnswer] = []
    seen = {canonical_key(spj)}
    frontier: list[tuple[SPJQuery, tuple, tuple, Degree]] = [(spj, (), (), Fraction(1))]
    for depth in range(1, session.config.max_steps + 1):
        next_frontier = []
        for parent, steps, okey, prior in frontier:
            for cand in relax_one_step(parent, session.db, session.rules, session.config.ops):
                key = canonical_key(cand.query)
                if depth > 1 and key in seen:
                    continue
                weighted = weight_candidate(cand, parent, session.sim_cfg, policy)
                if prior != 1:
                    combined = {
                        row: combine_step_degrees(prior, d)
                        for row, d in weighted.degrees.items()
                    }
                    weighted = replace(weighted, degrees=combined)
                filtered = filter_threshold(weighted, policy.min_sim)
                score = score_table(filtered, policy.table_agg)
                node = RelaxedAnswer(
                    cand.query, steps + (cand.step,), filtered, score, okey + cand.order_key
                )
                results.append(node)
                seen.add(key)
                next_frontier.append((cand.query, node.steps, node.order_key, score))
        frontier = next_frontier
    results.sort(key=lambda n: (-n.score, n.order_key))
    if session.config.top_k is not None:
        results = results[: session.config.top_k]
    return results


def cmd_relax(session: Session, query_text: str, out: IO[str] | None = None) -> int:
    """Report ranked relaxations of a query.

    A non-failing query is only relaxed when the session is forced, since
    informative answers are usually wanted for empty results.
    """
    out = out if out is not None else sys.stdout
    q = parse_query(query_text)
    spj = translate(q, session.db.schemas)
    original = evaluate(spj, session.db)
    fmt = session.config.fmt
    print(f"original: {_status(original)}", file=out)
    if not original.is_empty and not session.config.force:
        print(_render_table(original, fmt), file=out)
        print("query is not failing; use --force to relax it anyway", file=out)
        return OK
    for i, node in enumerate(expand_relaxations(session, spj), start=1):
        steps = "; ".join(describe_step(s) for s in node.steps)
        print("", file=out)
        if fmt == "csv":
            print(f"# [{i}] {steps} score={format_degree(node.score)}", file=out)
            print(_render_table(node.table, fmt), file=out)
        else:
            print(f"[{i}] {steps}", file=out)
            print(_render_table(node.table, fmt), file=out)
            print(f"score={format_degree(node.score)}", file=out)
    return OK


# --- REPL ----------------------------------------------------------------

_HELP = """\
commands:
  \\q <query>      evaluate a query
  \\relax <query>  enumerate and rank relaxations of a query
  \\set <k> <v>    set agg|tuple_agg|dc_mode|min_sim|ops|top|steps|format|force
  \\rules          list loaded rules
  \\quit           leave the session"""


def set_option(session: Session, key: str, value: str) -> str:
    """Apply one `\\set` assignment; returns a confirmation line."""
    cfg, policy = session.config, session.config.policy
    if key in ("agg", "table_agg"):
        policy.table_agg = Agg(value)
    elif key == "tuple_agg":
        policy.tuple_agg = Agg(value)
    elif key == "dc_mode":
        policy.dc_mode = DcMode(value)
    elif key == "min_sim":
        degree = parse_rational(value)
        if not 0 <= degree <= 1:
            raise ValueError("min_sim must lie in [0,1]")
        policy.min_sim = degree
    elif key == "ops":
        ops = tuple(part.strip().upper() for part in value.split(",") if part.strip())
        unknown = set(ops) - {"DC", "AI", "GR"}
        if unknown:
            raise ValueError(f"unknown operator(s): {sorted(unknown)}")
        cfg.ops = ops
    elif key == "top":
        cfg.top_k = None if value in ("none", "0") else int(value)
    elif key == "steps":
        steps = int(value)
        if steps < 1:
            raise ValueError("steps must be >= 1")
        cfg.max_steps = steps
    elif key == "format":
        if value not in ("text", "csv"):
            raise ValueError("format must be text or csv")
        cfg.fmt = value
    elif key == "force":
        cfg.force = value.lower() in ("1", "true", "yes", "on")
    else:
        raise ValueError(f"unknown setting {key!r}")
    return f"set {key} = {value}"


def repl(session: Session, stdin: IO[str] | None = None, out: IO[str] | None = None) -> int:
    """Interactive loop; per-command errors are reported and the loop
    continues."""
    stdin = stdin if stdin is not None else sys.stdin
    out = out if out is not None else sys.stdout
    print("qrelax session; \\quit to leave, anything else for help", file=out)
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        try:
            if line == "\\quit":
                break
            elif line.startswith("\\q "):
                code = cmd_query(session, line[3:], out=out)
                if code == FAILING:
                    print(f"hint: try \\relax {line[3:].strip()}", file=out)
            elif line.startswith("\\relax "):
                cmd_relax(session, line[7:], out=out)
            elif line.startswith("\\set "):
                parts = line.split(maxsplit=2)
                if len(parts) != 3:
                    raise ValueError("usage: \\set <key> <value>")
                print(set_option(session, parts[1], parts[2]), file=out)
            elif line == "\\rules":
                if not session.rules.rules:
                    print("no rules loaded", file=out)
                for i, rule in enumerate(session.rules.rules, start=1):
                    print(f"rule#{i}: {format_rule(rule)}", file=out)
            else:
                print(_HELP, file=out)
        except (QRelaxError, ValueError) as exc:
            print(f"error: {exc}", file=out)
    return OK


# --- entry point ----------------------------------------------------------


def _degree_arg(text: str) -> Fraction:
    try:
        value = parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("threshold must lie in [0,1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qrelax",
        description="evaluate conjunctive queries and rank relaxations of failing ones",
    )
    p.add_argument("--data", required=True, help="directory with schema.cfg and <relation>.csv files")
    p.add_argument("--sim", help="similarity bindings file")
    p.add_argument("--rules", help="rules file (one rule per line)")
    p.add_argument("--ops", default="dc,ai,gr", help="comma-separated subset of dc,ai,gr")
    p.add_argument("--agg", choices=["avg", "max"], default="avg", help="table aggregation")
    p.add_argument("--tuple-agg", choices=["avg", "max"], default="avg", help="within-tuple aggregation")
    p.add_argument(
        "--dc-mode", choices=["syntactic", "conditions", "semantic"], default="semantic"
    )
    p.add_argument("--min-sim", type=_degree_arg, default=Fraction(0), help="withhold rows below this degree")
    p.add_argument("--top", type=int, help="report only the top K candidates")
    p.add_argument("--steps", type=int, default=1, help="maximum relaxation depth")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--force", action="store_true", help="relax even non-failing queries")
    p.add_argument("--repl", action="store_true", help="start an interactive session")
    p.add_argument("command", nargs="?", choices=["query", "relax"])
    p.add_argument("text", nargs="?", help="query text")
    return p


def config_from_args(args: argparse.Namespace) -> SessionConfig:
    ops = tuple(part.strip().upper() for part in args.ops.split(",") if part.strip())
    unknown = set(ops) - {"DC", "AI", "GR"}
    if unknown:
        raise QRelaxError(f"unknown operator(s): {sorted(unknown)}")
    policy = WeightingPolicy(
        dc_mode=DcMode(args.dc_mode),
        tuple_agg=Agg(args.tuple_agg),
        table_agg=Agg(args.agg),
        min_sim=args.min_sim,
    )
    return SessionConfig(
        data_dir=Path(args.data),
        sim_path=Path(args.sim) if args.sim else None,
        rules_path=Path(args.rules) if args.rules else None,
        policy=policy,
        ops=ops,
        top_k=args.top,
        max_steps=max(1, args.steps),
        fmt=args.format,
        force=args.force,
    )


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(list(argv) if argv is not None else None)
    if not args.repl and (args.command is None or args.text is None):
        parser.print_usage(sys.stderr)
        print("qrelax: give a command with query text, or --repl", file=sys.stderr)
        return ERROR
    try:
        session = Session(config_from_args(args))
        if args.repl:
            return repl(session)
        if args.command == "query":
            return cmd_query(session, args.text)
        return cmd_relax(session, args.text)
    except QRelaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
