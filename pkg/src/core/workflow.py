"""
数据集生成工作流
Parallel dataset generation from a parameter distribution, with a line-delimited JSON manifest.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from .audio_io import build_sidecar, file_sha256, normalize_peak, sidecar_path, write_audio, write_json
from .config import AppConfig
from .engine import render
from .errors import SynthError
from .params import ParamDistribution, draw, sample_seed

logger = logging.getLogger(__name__)
console = Console()

MANIFEST_NAME = "manifest.jsonl"
TIMING_FIELDS = ("render_seconds", "created_at")


def sample_name(index: int) -> str:
    return f"sample_{index:06d}.wav"


def generate_sample(dist: ParamDistribution, index: int, out_dir: str, audio_format: str) -> Dict[str, Any]:
    """
    Draw, render and write sample ``index``. Never raises for a failed render:
    the record carries ``"success": False`` and the cause.
    """
    seed = sample_seed(dist.seed, index)
    record: Dict[str, Any] = {"index": index, "seed": seed, "success": False}
    try:
        config = draw(dist, index)
        record["config"] = config.to_dict()
        result = render(config)
        scaled, scale = normalize_peak(result.samples)
        audio_path = write_audio(Path(out_dir) / sample_name(index), scaled, result.sample_rate, audio_format)
        write_json(sidecar_path(audio_path), build_sidecar(result, scale, audio_format))
        diagnostics = result.diagnostics.summary()
        record.update(
            success=True,
            path=audio_path.name,
            sha256=file_sha256(audio_path),
            raw_scale=scale,
            diagnostics={k: v for k, v in diagnostics.items() if k != "render_seconds"},
            render_seconds=diagnostics["render_seconds"],
        )
    except SynthError as e:
        logger.warning(f"sample {index} skipped: {type(e).__name__}: {e}")
        record.update(error=str(e), error_type=type(e).__name__, step=getattr(e, "step", None))
    record["created_at"] = datetime.now().isoformat()
    return record


def _generate_star(args) -> Dict[str, Any]:
    return generate_sample(*args)


class DatasetWorkflow:
    """
    数据集工作流 - 按分布批量渲染
    Records are appended to the manifest in index order, whatever the worker count.
    """

    def __init__(self, app_config: Optional[AppConfig] = None, verbose: bool = True):
        self.app_config = app_config or AppConfig()
        self.verbose = verbose
        self.workflow_stats = {
            "total_runs": 0,
            "total_samples": 0,
            "failed_samples": 0,
            "session_start": datetime.now().isoformat(),
        }

    def _records(self, dist: ParamDistribution, n: int, out_dir: Path, workers: int) -> Iterator[Dict[str, Any]]:
        jobs = [(dist, index, str(out_dir), self.app_config.audio_format) for index in range(n)]
        if workers <= 1:
            for job in jobs:
                yield _generate_star(job)
            return
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map yields in submission order
            yield from pool.map(_generate_star, jobs)

    def generate(
        self,
        dist: ParamDistribution,
        n: int,
        out_dir: Union[str, Path],
        workers: Optional[int] = None,
    ) -> Dict[str, Any]:
        """Generate ``n`` samples into ``out_dir``; returns a summary dict with ``success`` and the manifest path."""
        workers = workers or self.app_config.workers
        out_dir = Path(out_dir)
        issues = dist.validate()
        if n < 0:
            issues.append(f"sample count must be ≥ 0 (got {n})")
        if issues:
            return {"success": False, "error": "; ".join(issues)}
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            manifest_path = out_dir / MANIFEST_NAME
            manifest = open(manifest_path, "w", encoding="utf-8")
        except OSError as e:
            error_msg = f"输出目录不可写: {out_dir} ({e})"
            if self.verbose:
                console.print(f"[bold red]❌ {error_msg}[/bold red]")
            return {"success": False, "error": error_msg}

        if self.verbose:
            console.print(Panel(
                f"[bold magenta]🚀 开始生成数据集[/bold magenta]\n"
                f"[cyan]样本数:[/cyan] {n}  [cyan]进程数:[/cyan] {workers}  [cyan]种子:[/cyan] {dist.seed}\n"
                f"[cyan]输出目录:[/cyan] {out_dir}",
                title="Dataset 工作流",
                border_style="magenta",
            ))

        started = datetime.now()
        failures: List[Dict[str, Any]] = []
        with manifest, Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TimeElapsedColumn(),
            console=console,
            disable=not self.verbose,
        ) as bar:
            task = bar.add_task("渲染样本", total=max(n, 1))
            for record in self._records(dist, n, out_dir, workers):
                manifest.write(json.dumps(record, sort_keys=True) + "\n")
                manifest.flush()
                if not record["success"]:
                    failures.append(record)
                bar.advance(task)

        summary = {
            "success": True,
            "manifest": str(manifest_path),
            "generated": n - len(failures),
            "failed": len(failures),
            "failures": [{"index": r["index"], "error": r.get("error")} for r in failures],
            "duration_seconds": (datetime.now() - started).total_seconds(),
        }
        self.workflow_stats["total_runs"] += 1
        self.workflow_stats["total_samples"] += n
        self.workflow_stats["failed_samples"] += len(failures)
        if self.verbose:
            self._log_summary(summary)
        return summary

    def _log_summary(self, summary: Dict[str, Any]):
        table = Table(title="🎯 数据集生成总结", style="cyan")
        table.add_column("指标", style="yellow")
        table.add_column("值", style="green")
        table.add_row("成功样本", str(summary["generated"]))
        table.add_row("跳过样本", str(summary["failed"]))
        table.add_row("总耗时", f"{summary['duration_seconds']:.2f} 秒")
        table.add_row("清单文件", summary["manifest"])
        console.print(table)
        for failure in summary["failures"]:
            console.print(f"[yellow]⚠️  样本 {failure['index']}: {failure['error']}[/yellow]")

    def get_workflow_stats(self) -> Dict[str, Any]:
        return self.workflow_stats.copy()


def read_manifest(path: Union[str, Path]) -> List[Dict[str, Any]]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def strip_timing(record: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in record.items() if k not in TIMING_FIELDS}


def verify_manifest(path: Union[str, Path]) -> Dict[str, Any]:
    """Check that every successful record's file exists once and matches its checksum."""
    path = Path(path)
    try:
        records = read_manifest(path)
    except (OSError, json.JSONDecodeError) as e:
        return {"success": False, "error": f"cannot read manifest {path}: {e}"}
    missing, mismatched, duplicates, seen = [], [], [], set()
    for record in records:
        if not record.get("success"):
            continue
        name = record["path"]
        if name in seen:
            duplicates.append(name)
        seen.add(name)
        audio = path.parent / name
        if not os.path.exists(audio):
            missing.append(name)
        elif file_sha256(audio) != record["sha256"]:
            mismatched.append(name)
    ok = not (missing or mismatched or duplicates)
    result = {
        "success": ok,
        "records": len(records),
        "checked": len(seen),
        "missing": missing,
        "mismatched": mismatched,
        "duplicates": duplicates,
    }
    if not ok:
        result["error"] = f"{len(missing)} missing, {len(mismatched)} mismatched, {len(duplicates)} duplicate files"
    return result
