"""
命令行入口
Subcommands: render, dataset, verify, bench.
"""

import argparse
import sys
from dataclasses import replace
from typing import List, Optional

from rich.console import Console
from rich.panel import Panel

from .verify import SUITES, display_results, run_suites
from ..analysis.benchmark import run_sweep
from ..core.audio_io import save_render
from ..core.config import AUDIO_FORMATS, AppConfig, load_config, setup_logging
from ..core.config_files import load_distribution, load_simulation_config, load_sweep
from ..core.engine import SynthesisEngine
from ..core.errors import SynthError
from ..core.workflow import DatasetWorkflow

console = Console()
error_console = Console(stderr=True)

EXIT_OK = 0
EXIT_FAILURE = 1


def build_parser(app_config: AppConfig) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stiff-string-synth", description="Nonlinear stiff string synthesizer")
    parser.add_argument("--env-file", default=None, help="dotenv file with SYNTH_* defaults")
    parser.add_argument("-v", "--verbose", action="store_true", default=app_config.verbose)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one configuration to a wave file")
    p.add_argument("--config", required=True, help="KEY=VALUE simulation config")
    p.add_argument("--out", required=True, help="output .wav path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--sample-rate", type=float, default=None)
    p.add_argument("--dump-fields", action="store_true", help="write u and zeta histories as text")
    p.add_argument("--dump-spectrum", action="store_true", help="write the log-magnitude spectrum as text")
    p.add_argument("--format", choices=AUDIO_FORMATS, default=app_config.audio_format)

    p = sub.add_parser("dataset", help="render n samples drawn from a distribution")
    p.add_argument("--config", required=True, help="KEY=VALUE distribution file")
    p.add_argument("-n", "--count", type=int, required=True)
    p.add_argument("--out", default=app_config.output_dir, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--workers", type=int, default=app_config.workers)
    p.add_argument("--format", choices=AUDIO_FORMATS, default=app_config.audio_format)

    p = sub.add_parser("verify", help="run acceptance suites")
    p.add_argument("suites", nargs="*", metavar="SUITE",
                   help=f"any of: {', '.join(SUITES)} (default: all)")

    p = sub.add_parser("bench", help="time renders over a sweep")
    p.add_argument("--config", required=True, help="KEY=VALUE sweep file")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", default=None, help="output table (.tsv or .json); stdout when omitted")
    return parser


class SynthApp:
    """Runs one parsed command and maps its outcome to an exit status."""

    def __init__(self, app_config: AppConfig, verbose: bool = False):
        self.app_config = app_config
        self.verbose = verbose

    def fail(self, message: str) -> int:
        error_console.print(f"[bold red]❌ {message}[/bold red]")
        return EXIT_FAILURE

    def cmd_render(self, args: argparse.Namespace) -> int:
        try:
            config = load_simulation_config(args.config, args.sample_rate or self.app_config.sample_rate)
            changes = {}
            if args.sample_rate is not None:
                changes["sample_rate"] = args.sample_rate
            if args.duration is not None:
                changes["duration"] = args.duration
            if args.seed is not None:
                changes["seed"] = args.seed
            config = config.updated(**changes)
        except SynthError as e:
            return self.fail(f"配置无效: {e}")

        engine = SynthesisEngine(self.app_config, verbose=self.verbose)
        outcome = engine.render_safe(config, dump_fields=args.dump_fields)
        if not outcome["success"]:
            step = outcome.get("step")
            where = f" at step {step}" if step is not None else ""
            return self.fail(f"{outcome['error_type']}{where}: {outcome['error']}")
        try:
            paths = save_render(outcome["result"], args.out, args.format, args.dump_fields, args.dump_spectrum)
        except (OSError, SynthError) as e:
            return self.fail(f"写入失败: {e}")
        console.print(Panel(
            "\n".join(f"[cyan]{name}:[/cyan] {path}" for name, path in paths.items()),
            title="✅ 渲染完成",
            border_style="green",
        ))
        return EXIT_OK

    def cmd_dataset(self, args: argparse.Namespace) -> int:
        try:
            dist = load_distribution(args.config)
        except SynthError as e:
            return self.fail(f"分布无效: {e}")
        if args.seed is not None:
            dist = replace(dist, seed=args.seed)
        workflow_config = replace(self.app_config, audio_format=args.format)
        summary = DatasetWorkflow(workflow_config, verbose=True).generate(dist, args.count, args.out, args.workers)
        if not summary["success"]:
            return self.fail(summary["error"])
        return EXIT_OK

    def cmd_verify(self, args: argparse.Namespace) -> int:
        results = run_suites(args.suites or None)
        display_results(results)
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE

    def cmd_bench(self, args: argparse.Namespace) -> int:
        if args.repeats < 1:
            return self.fail(f"--repeats must be ≥ 1 (got {args.repeats})")
        try:
            sweep = load_sweep(args.config)
            table = run_sweep(sweep, args.repeats)
        except SynthError as e:
            return self.fail(f"基准测试失败: {e}")
        if args.out:
            try:
                path = table.save(args.out)
            except OSError as e:
                return self.fail(f"写入失败: {e}")
            console.print(f"[green]✅ 计时表已写入 {path}[/green]")
        else:
            sys.stdout.write(table.to_text())
        return EXIT_OK

    def run(self, args: argparse.Namespace) -> int:
        handler = getattr(self, f"cmd_{args.command}")
        return handler(args)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        app_config = load_config()
    except SynthError as e:
        error_console.print(f"[bold red]❌ 环境配置无效: {e}[/bold red]")
        return EXIT_FAILURE
    args = build_parser(app_config).parse_args(argv)
    if args.env_file:
        try:
            app_config = load_config(args.env_file)
        except SynthError as e:
            error_console.print(f"[bold red]❌ 环境配置无效: {e}[/bold red]")
            return EXIT_FAILURE
    setup_logging(app_config.log_level)
    return SynthApp(app_config, verbose=args.verbose).run(args)
