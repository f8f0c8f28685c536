"""Command line front end: ``drnla rewrite | validate | difftest | bench``.

Exit codes: 0 success (all exact / safe / no mismatches), 1 a negative
answer (partial site, counterexample, mismatching runs), 2 usage, parse
or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import constraints as C
from . import lang
from .interp import InputBox, diff_test
from .polylib import BudgetExceeded
from .refine import KeepVars, ProgramResult, RefineConfig, RefineResult, refine_program, rewrite
from .validate import Counterexample, Mode, export_smtlib, validate

log = logging.getLogger("drnla")

EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2

BENCH_COLUMNS = ("Program", "Loc", "Status", "It", "Ref. Stages", "Time (s)", "Mismatches",
                 "Step ratio", "Pos", "Neg")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ parsing


def parse_box(values: Optional[Sequence[str]], default: tuple[int, int]):
    """``LO:HI`` sets the range of every input; ``NAME=LO:HI`` overrides one."""
    rng, overrides = default, []
    for v in values or ():
        name, _, span = v.rpartition("=")
        lo_s, sep, hi_s = span.partition(":")
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise UsageError(f"bad box {v!r}; expected LO:HI or NAME=LO:HI") from None
        if not sep or lo > hi:
            raise UsageError(f"bad box {v!r}; expected LO:HI with LO <= HI")
        if name:
            overrides.append((name, lo, hi))
        else:
            rng = (lo, hi)
    return rng, tuple(overrides)


def config_from_args(args) -> RefineConfig:
    base = RefineConfig()
    sample_range, sample_over = parse_box(args.sample_box, base.sample_range)
    scope_range, scope_over = parse_box(args.scope_box, base.scope_range)
    try:
        return replace(
            base,
            seed=args.seed,
            max_iters=args.max_iters,
            models_per_cex=args.models,
            sample_runs=args.runs,
            sample_range=sample_range,
            sample_overrides=sample_over,
            scope_range=scope_range,
            scope_overrides=scope_over,
            loop_bound=args.loop_bound,
            mode=Mode(args.mode),
            keep_vars=KeepVars(args.keep_vars),
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def read_program(path: str) -> lang.Program:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    try:
        return lang.parse(text)
    except lang.ParseError as e:
        raise UsageError(f"{path}: {e}") from None


# ------------------------------------------------------------ map documents


@dataclass(frozen=True)
class MapDocument:
    source: str
    tool_version: str
    seed: int
    scope: str
    entries: tuple[dict, ...]

    @classmethod
    def of(cls, source: str, cfg: RefineConfig, pr: ProgramResult) -> "MapDocument":
        scope = cfg.scope(pr.program).describe()
        return cls(source, __version__, cfg.seed, scope, tuple(map_entry(r) for r in pr.results))

    def to_json(self) -> str:
        doc = {
            "source": self.source,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "scope": self.scope,
            "entries": list(self.entries),
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MapDocument":
        raw = json.loads(text)
        return cls(raw["source"], raw["tool_version"], raw["seed"], raw["scope"],
                   tuple(raw["entries"]))

    def replacement_map(self) -> dict[str, tuple[C.Blia, C.Blia]]:
        return {e["loc"]: (C.parse_blia(e["pos"]), C.parse_blia(e["neg"])) for e in self.entries}


def map_entry(r: RefineResult) -> dict:
    return {
        "loc": r.loc,
        "nla": lang.pretty_bexpr(r.nla),
        "pos": C.to_text(r.b_pos),
        "neg": C.to_text(r.b_neg),
        "status": r.status.value,
        "iterations": r.iterations,
        "stages": ",".join(r.stages),
    }


def load_map(path: str) -> MapDocument:
    try:
        return MapDocument.from_json(Path(path).read_text())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"{path}: malformed map ({e})") from None


# ---------------------------------------------------------------- commands


def _sites(args) -> Optional[list[str]]:
    if not args.sites:
        return None
    return [s.strip() for s in args.sites.split(",") if s.strip()]


def run_rewrite(path: str, cfg: RefineConfig, out_dir: Path, allow_partial: bool,
                sites: Optional[list[str]] = None) -> tuple[ProgramResult, lang.Program, Path, Path]:
    """Refine one file and write its rewritten program and map."""
    prog = read_program(path)
    if cfg.mode is Mode.SMT_EXPORT:
        raise UsageError("rewrite needs --mode exhaustive or random")
    try:
        pr = refine_program(prog, cfg, sites=sites, allow_partial=allow_partial)
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None
    chosen = [r for r in pr.results if r.exact or allow_partial]
    rewritten = lang.fold_loops(rewrite(pr.program, chosen, allow_partial=allow_partial))
    stem = Path(path).stem
    out_dir.mkdir(parents=True, exist_ok=True)
    imp_path = out_dir / f"{stem}.rewritten.imp"
    map_path = out_dir / f"{stem}.map.json"
    imp_path.write_text(lang.pretty(rewritten))
    map_path.write_text(MapDocument.of(Path(path).name, cfg, pr).to_json())
    return pr, rewritten, imp_path, map_path


def cmd_rewrite(args) -> int:
    cfg = config_from_args(args)
    out_dir = Path(args.out) if args.out else Path(args.file).parent
    pr, _, imp_path, map_path = run_rewrite(args.file, cfg, out_dir, args.allow_partial,
                                            _sites(args))
    for r in pr.results:
        print(f"{r.loc}: {r.status.value} after {r.iterations} validation(s) "
              f"[{','.join(r.stages)}]  pos {C.to_text(r.b_pos)}")
        if r.note:
            print(f"{r.loc}: {r.note}")
    if not pr.results:
        print("no nonlinear condition sites")
    print(f"wrote {imp_path} and {map_path}")
    return EXIT_OK if pr.all_exact else EXIT_NEGATIVE


def cmd_validate(args) -> int:
    if not args.map:
        raise UsageError("validate needs --map")
    cfg = config_from_args(args)
    prog = lang.normalize(read_program(args.file))
    doc = load_map(args.map)
    try:
        m = doc.replacement_map()
    except (lang.ParseError, C.NotLinear) as e:
        raise UsageError(f"{args.map}: {e}") from None
    known = {l for l, _ in lang.condition_sites(prog)}
    for loc in m:
        if loc not in known:
            raise UsageError(f"{args.map}: unknown location {loc}")
    scope = replace(cfg.scope(prog), runs=args.runs)
    if scope.mode is Mode.SMT_EXPORT:
        out_dir = Path(args.out) if args.out else Path(args.file).parent
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.file).stem
        scripts = export_smtlib(prog, m, unroll=scope.loop_bound, box=scope.box)
        for (loc, case), text in scripts.items():
            (out_dir / f"{stem}.{loc}.{case}.smt2").write_text(text)
        print(f"wrote {len(scripts)} script(s) to {out_dir}")
        return EXIT_OK
    try:
        verdict = validate(prog, m, scope)
    except BudgetExceeded as e:
        raise UsageError(f"budget exceeded: {e}") from None
    if isinstance(verdict, Counterexample):
        print(f"counterexample: {verdict.describe()}")
        return EXIT_NEGATIVE
    print(f"safe ({scope.describe()})")
    return EXIT_OK


def cmd_difftest(args) -> int:
    a, b = read_program(args.file_a), read_program(args.file_b)
    (lo, hi), over = parse_box(args.scope_box, RefineConfig().scope_range)
    box = InputBox.for_program(a, lo, hi, {n: (l, h) for n, l, h in over})
    try:
        rep = diff_test(a, b, args.runs, box, args.seed, args.loop_bound, args.exhaustive)
    except ValueError as e:
        raise UsageError(str(e)) from None
    print(f"runs {rep.runs}, mismatches {rep.mismatches}, median step ratio {rep.median_ratio:.3f}")
    for inp in rep.mismatch_inputs[:5]:
        print("  mismatch on " + (", ".join(f"{k}={v}" for k, v in inp.items()) or "(no inputs)"))
    return EXIT_OK if rep.mismatches == 0 else EXIT_NEGATIVE


def bundled_corpus() -> list[tuple[str, str]]:
    root = resources.files("drnla") / "corpus"
    items = [(p.name, p) for p in root.iterdir() if p.name.endswith(".imp")]
    return sorted((name, str(p)) for name, p in items)


def cmd_bench(args) -> int:
    cfg = config_from_args(args)
    if args.corpus is None:
        files = bundled_corpus()
    else:
        d = Path(args.corpus)
        if not d.is_dir():
            raise UsageError(f"{d} is not a directory")
        files = sorted((p.name, str(p)) for p in d.glob("*.imp"))
    out_dir = Path(args.out) if args.out else Path("bench-out")
    rows = []
    bad = 0
    for name, path in files:
        t0 = time.perf_counter()
        try:
            pr, rewritten, _, _ = run_rewrite(path, cfg, out_dir, args.allow_partial)
            rep = diff_test(pr.program, rewritten, args.diff_runs, cfg.scope(pr.program).box,
                            cfg.seed, cfg.loop_bound)
        except (UsageError, BudgetExceeded) as e:
            rows.append((name, "-", "error", "", "", f"{time.perf_counter() - t0:.2f}", "", "",
                         str(e), ""))
            continue
        elapsed = f"{time.perf_counter() - t0:.2f}"
        if pr.all_exact and rep.mismatches:
            bad += 1
        if not pr.results:
            rows.append((name, "-", "no sites", 0, "", elapsed, rep.mismatches,
                         f"{rep.median_ratio:.3f}", "", ""))
        for r in pr.results:
            rows.append((name, r.loc, r.status.value, r.iterations, ",".join(r.stages), elapsed,
                         rep.mismatches, f"{rep.median_ratio:.3f}", C.to_text(r.b_pos),
                         C.to_text(r.b_neg)))
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    w.writerows(rows)
    (out_dir / "bench.csv").write_text(buf.getvalue())
    table = format_table(rows)
    (out_dir / "bench.txt").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK if bad == 0 else EXIT_NEGATIVE


def format_table(rows, width: int = 48) -> str:
    """Fixed-width table; long condition texts are cut to ``width`` characters."""
    def cell(v):
        s = str(v)
        return s if len(s) <= width else s[: width - 3] + "..."

    body = [[cell(v) for v in r] for r in rows]
    widths = [max([len(h)] + [len(r[i]) for r in body]) for i, h in enumerate(BENCH_COLUMNS)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(BENCH_COLUMNS, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in body]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- main


def _refine_flags(p: argparse.ArgumentParser) -> None:
    d = RefineConfig()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--max-iters", type=int, default=d.max_iters)
    p.add_argument("--models", type=int, default=d.models_per_cex, help="models per counterexample")
    p.add_argument("--runs", type=int, default=d.sample_runs,
                   help="sampling runs (random-probe runs for validate)")
    p.add_argument("--sample-box", action="append", metavar="[NAME=]LO:HI",
                   help="sampling range, default %d:%d; use --sample-box=-5:5 for negative bounds"
                   % d.sample_range)
    p.add_argument("--scope-box", action="append", metavar="[NAME=]LO:HI",
                   help="validation range, default %d:%d" % d.scope_range)
    p.add_argument("--loop-bound", type=int, default=d.loop_bound)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=d.mode.value)
    p.add_argument("--allow-partial", action="store_true")
    p.add_argument("--keep-vars", choices=[k.value for k in KeepVars], default=d.keep_vars.value)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drnla", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"drnla {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rewrite", help="synthesize linear replacements and rewrite a program")
    p.add_argument("file")
    _refine_flags(p)
    p.add_argument("--sites", help="comma-separated locations to refine instead of the NLA sites")
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("validate", help="check a replacement map against a program")
    p.add_argument("file")
    p.add_argument("--map", required=False)
    _refine_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("difftest", help="run two programs on the same inputs")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scope-box", action="append", metavar="[NAME=]LO:HI")
    p.add_argument("--loop-bound", type=int, default=RefineConfig().loop_bound)
    p.add_argument("--exhaustive", action="store_true", help="enumerate the whole box")
    p.set_defaults(func=cmd_difftest)

    p = sub.add_parser("bench", help="rewrite and difftest every program in a corpus")
    p.add_argument("corpus", nargs="?", help="directory of .imp files (default: bundled corpus)")
    _refine_flags(p)
    p.add_argument("--diff-runs", type=int, default=50)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"drnla: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
