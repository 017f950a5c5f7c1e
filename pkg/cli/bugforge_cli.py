#!/usr/bin/env python3
"""
BugForge CLI - analyse C corpora and insert taint-style bugs with ground truth.

Commands:
    analyze     find sources, sinks, data-flow paths and guards; write report.json
    list        print sinks, sources, pairs and guard sites with their verdicts
    insert      write instrumented corpus variants under out/<seed+i>/
    verify      build original and variant and compare them on input files
    preprocess  expand C files with a compiler's preprocessor

Exit codes: 0 success, 2 empty corpus, 3 summary-file parse failure,
4 no bugdoorable site, 5 verification build failure, 1 anything else.
"""

import sys
import os
import argparse
import logging
import subprocess
from typing import Any, Dict, List, Optional

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

# Add the project root to Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

# Try importing colorama, if not available, use simple colors
try:
    from colorama import Fore, Style, init
    init(autoreset=True)
    HAS_COLORAMA = True
except ImportError:
    HAS_COLORAMA = False

    class Fore:
        RED = '\033[31m'
        GREEN = '\033[32m'
        YELLOW = '\033[33m'
        CYAN = '\033[36m'
        WHITE = '\033[37m'

    class Style:
        RESET_ALL = '\033[0m'

    def init(**kwargs):
        pass

from core.cpg.graph import dump_cpg
from core.instrument.bugdoor import applicable_instrumentations, is_bugdoorable
from core.pipeline import AnalysisResult, analyze, insert, insertion_targets, write_report
from core.report.writer import dumps
from core.utils.config import AnalysisConfig, load_config, parse_sink_classes
from core.utils.errors import (BugForgeError, BuildFailure, EmptyCorpus, NoBugdoorableSite,
                               SummaryParseError)
from core.verify.harness import find_compiler, verify_variant

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_EMPTY_CORPUS = 2
EXIT_SUMMARY_PARSE = 3
EXIT_NO_BUGDOORABLE = 4
EXIT_BUILD_FAILURE = 5


class BugForgeCLI:
    """Command dispatcher for BugForge."""

    def __init__(self, config_path: Optional[str] = None, json_only: bool = False):
        self.json_only = json_only
        self.config = self._load_config(config_path)

    def _load_config(self, config_path: Optional[str]) -> Dict[str, Any]:
        config = load_config(config_path)
        config["theme"] = {
            "system_color": Fore.CYAN,
            "error_color": Fore.RED,
            "success_color": Fore.GREEN,
            "warning_color": Fore.YELLOW,
        }
        return config

    def _print_colored(self, text: str, color_type: str = "system"):
        """Print colored text based on type; silent in JSON-only mode except errors."""
        if self.json_only and color_type != "error":
            return
        theme = self.config.get("theme", {})
        color_map = {
            "system": theme.get("system_color", Fore.CYAN),
            "error": theme.get("error_color", Fore.RED),
            "success": theme.get("success_color", Fore.GREEN),
            "warning": theme.get("warning_color", Fore.YELLOW),
        }
        color = color_map.get(color_type, Fore.WHITE)
        stream = sys.stderr if color_type == "error" or self.json_only else sys.stdout
        print(f"{color}{text}{Style.RESET_ALL}", file=stream)

    def analysis_config(self, args: argparse.Namespace) -> AnalysisConfig:
        """Config file values overridden by command-line flags."""
        config = AnalysisConfig.from_config(self.config)
        if getattr(args, "summaries", None):
            config.summary_files = list(config.summary_files) + list(args.summaries)
        if getattr(args, "max_depth", None) is not None:
            config.max_depth = args.max_depth
        if getattr(args, "max_paths", None) is not None:
            config.max_paths = args.max_paths
        if getattr(args, "sink_classes", None):
            config.sink_classes = parse_sink_classes(args.sink_classes)
        return config

    def seed(self, args: argparse.Namespace) -> int:
        if getattr(args, "seed", None) is not None:
            return args.seed
        return int(self.config.get("seed") or 0)

    def _analyze(self, args: argparse.Namespace) -> AnalysisResult:
        self._print_colored(f"Analyzing {args.corpus_dir} ...", "system")
        return analyze(args.corpus_dir, self.analysis_config(args))

    # -- commands ----------------------------------------------------------------
    def cmd_analyze(self, args: argparse.Namespace) -> int:
        result = self._analyze(args)
        config = self.analysis_config(args)
        out_dir = args.out or self.config.get("output_dir", "out")
        written = write_report(result, out_dir, config.include_timings)
        if args.dump_cpg:
            with open(args.dump_cpg, 'w', encoding='utf-8') as f:
                f.write(dump_cpg(result.graph))
            self._print_colored(f"Graph dump written to {args.dump_cpg}", "system")

        if self.json_only:
            print(dumps(result.report.to_dict(config.include_timings)), end="")
            return EXIT_OK
        report = result.report
        self._print_colored(f"Lines of code:        {report.lines_of_code}", "system")
        self._print_colored(f"Sources / sinks:      {report.sources_found} / {report.sinks_found}", "system")
        self._print_colored(f"Unique pairs:         {report.unique_pairs}", "success")
        self._print_colored(f"Data-flow paths:      {report.dataflow_paths}", "success")
        self._print_colored(f"Guard sites:          {len(result.guards)}", "system")
        for name, seconds in report.timings.items():
            self._print_colored(f"  {name:<16} {seconds:.3f}s", "system")
        for flag in report.truncation_flags:
            self._print_colored(f"Truncated: {flag}", "warning")
        for path in written:
            self._print_colored(f"Wrote {path}", "system")
        return EXIT_OK

    def cmd_list(self, args: argparse.Namespace) -> int:
        result = self._analyze(args)
        graph = result.graph
        self._print_colored("Sinks:", "system")
        for sink in result.sinks:
            self._print_colored(f"  {sink.callee}[{sink.sensitive_arg_index}] {sink.vuln_class.value} "
                                f"at {sink.span.location()}", "system")
        self._print_colored("Sources:", "system")
        for source in result.sources:
            self._print_colored(f"  {source.callee} {source.source_kind.value} at {source.span.location()}", "system")
        self._print_colored("Pairs:", "system")
        for pair in result.pairs:
            self._print_colored(f"  {pair.source.callee}@{pair.source.span.location()} -> "
                                f"{pair.sink.callee}@{pair.sink.span.location()} "
                                f"({len(pair.paths)} paths, {pair.confidence})", "success")
        self._print_colored("Guard sites:", "system")
        targets = {id(t.site): t for t in insertion_targets(result, self.analysis_config(args))[0]}
        for site in result.guards:
            decision = is_bugdoorable(site, graph)
            target = targets.get(id(site))
            classes = [f"{cls.value}x{n}" for cls, n in (target.candidates if target else [])]
            line = (f"  {site.span.location()} {site.classification.value} {site.polarity.value} "
                    f"-> {decision.reason}")
            self._print_colored(line + (f" [{', '.join(classes)}]" if classes else ""),
                                "success" if decision else "warning")
        for sink in {p.sink.key: p.sink for p in result.pairs}.values():
            candidates = applicable_instrumentations(sink, graph)
            if candidates:
                self._print_colored(f"  {sink.span.location()} format string pass-through "
                                    f"[{candidates[0][0].value}]", "success")
        return EXIT_OK

    def cmd_insert(self, args: argparse.Namespace) -> int:
        if args.count <= 0:
            self._print_colored("Nothing to insert (count 0)", "system")
            return EXIT_OK
        result = self._analyze(args)
        out_dir = args.out or self.config.get("output_dir", "out")
        seed = self.seed(args)
        written = insert(result, seed, args.count, out_dir, self.analysis_config(args))
        for directory, record in written:
            self._print_colored(f"{directory}: {record.plan.instrumentation.value} "
                                f"({record.plan.description}) at {record.plan.target.span.location()}", "success")
        if self.json_only:
            print(dumps({"variants": [d for d, _ in written]}), end="")
        return EXIT_OK

    def cmd_verify(self, args: argparse.Namespace) -> int:
        verify = self.config.get("verify", {})
        compiler = args.compiler or verify.get("compiler") or "cc"
        if find_compiler(compiler) is None:
            raise BuildFailure(f"C compiler '{compiler}' not found")
        verdicts = verify_variant(args.original, args.variant_dir, args.inputs_dir,
                                  harness_files=args.harness or [], compiler=compiler,
                                  cflags=verify.get("cflags", ["-O0", "-g", "-w"]),
                                  run_timeout=int(verify.get("run_timeout", 10)))
        if self.json_only:
            print(dumps({"verdicts": [v.to_dict() for v in verdicts]}), end="")
            return EXIT_OK
        for v in verdicts:
            kind = "success" if v.verdict.value != "DivergenceDetected" else "warning"
            self._print_colored(f"{v.input_name}: {v.verdict.value}", kind)
        return EXIT_OK

    def cmd_preprocess(self, args: argparse.Namespace) -> int:
        compiler = args.compiler or self.config.get("verify", {}).get("compiler") or "cc"
        if find_compiler(compiler) is None:
            raise BuildFailure(f"C compiler '{compiler}' not found")
        sources = []
        for root, _, files in os.walk(args.source_dir):
            sources.extend(os.path.join(root, f) for f in sorted(files) if f.endswith(".c"))
        for source in sorted(sources):
            rel = os.path.relpath(source, args.source_dir)
            target = os.path.join(args.out_dir, os.path.splitext(rel)[0] + ".i")
            os.makedirs(os.path.dirname(target), exist_ok=True)
            command = [compiler, "-E", *[f"-I{d}" for d in args.include or []], source, "-o", target]
            result = subprocess.run(command, capture_output=True, text=True, timeout=120)
            if result.returncode != 0:
                raise BuildFailure(f"preprocessing {rel} failed", result.stderr)
            self._print_colored(f"{rel} -> {target}", "system")
        return EXIT_OK

    def run(self, args: argparse.Namespace) -> int:
        handlers = {
            "analyze": self.cmd_analyze,
            "list": self.cmd_list,
            "insert": self.cmd_insert,
            "verify": self.cmd_verify,
            "preprocess": self.cmd_preprocess,
        }
        try:
            return handlers[args.command](args)
        except EmptyCorpus as e:
            self._print_colored(f"Empty corpus: {e}", "error")
            return EXIT_EMPTY_CORPUS
        except SummaryParseError as e:
            self._print_colored(f"Summary file error: {e}", "error")
            return EXIT_SUMMARY_PARSE
        except NoBugdoorableSite as e:
            self._print_colored(str(e), "error")
            return EXIT_NO_BUGDOORABLE
        except BuildFailure as e:
            self._print_colored(f"Build failure: {e}", "error")
            if e.output:
                self._print_colored(e.output, "error")
            return EXIT_BUILD_FAILURE
        except BugForgeError as e:
            self._print_colored(f"Error: {e}", "error")
            return EXIT_INTERNAL
        except Exception as e:
            logger.exception("unexpected error")
            self._print_colored(f"Unexpected error: {e}", "error")
            return EXIT_INTERNAL


def _analysis_flags(parser: argparse.ArgumentParser):
    parser.add_argument("corpus_dir", help="Directory of preprocessed .c/.i files")
    parser.add_argument("--summaries", action="append", metavar="FILE",
                        help="Extra summary file (repeatable, later files override earlier)")
    parser.add_argument("--max-depth", type=int, help="Maximum hops per data-flow path")
    parser.add_argument("--max-paths", type=int, help="Maximum paths per sink")
    parser.add_argument("--sink-classes", help="Comma-separated sink classes, e.g. BufferLength,AllocSize")
    parser.add_argument("--out", help="Output directory (default from config: out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bugforge",
                                     description="BugForge - taint-style bug insertion with ground truth")
    parser.add_argument("--config", help="YAML config file (default ~/.bugforge/config.yaml)")
    parser.add_argument("--json-only", action="store_true", help="Print machine-readable JSON only")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze_p = sub.add_parser("analyze", help="Analyse a corpus and write report.json")
    _analysis_flags(analyze_p)
    analyze_p.add_argument("--dump-cpg", metavar="FILE", help="Write the code property graph dump")

    list_p = sub.add_parser("list", help="List sinks, sources, pairs and guard sites")
    _analysis_flags(list_p)

    insert_p = sub.add_parser("insert", help="Write instrumented corpus variants")
    _analysis_flags(insert_p)
    insert_p.add_argument("--seed", type=int, help="Base seed (default: config, then BUGFORGE_SEED, then 0)")
    insert_p.add_argument("--count", type=int, default=1, help="Number of variants (default: 1)")

    verify_p = sub.add_parser("verify", help="Differentially execute original and variant")
    verify_p.add_argument("variant_dir")
    verify_p.add_argument("inputs_dir")
    verify_p.add_argument("--original", required=True, help="The corpus the variant was made from")
    verify_p.add_argument("--harness", action="append", metavar="FILE", help="Extra C file linked into both builds")
    verify_p.add_argument("--compiler", help="C compiler (default: BUGFORGE_CC, CC, then cc)")

    pre_p = sub.add_parser("preprocess", help="Run the C preprocessor over a source tree")
    pre_p.add_argument("source_dir")
    pre_p.add_argument("out_dir")
    pre_p.add_argument("--include", "-I", action="append", metavar="DIR")
    pre_p.add_argument("--compiler")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI."""
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    cli = BugForgeCLI(args.config, json_only=args.json_only)
    return cli.run(args)


if __name__ == "__main__":
    sys.exit(main())
