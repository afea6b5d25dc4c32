"""
性能基准
Wall-clock timing of renders across sweeps of sample count, grid size, batch size and worker count.
"""

import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy

from ..core.engine import ENGINE_VERSION, render
from ..core.params import SimulationConfig
from ..numerics.grid_ops import compute_grid

logger = logging.getLogger(__name__)

DEFAULT_WORKER_BATCH = 8


@dataclass(frozen=True)
class BenchmarkCase:
    axis: str
    value: float
    config: SimulationConfig
    batch: int = 1
    workers: int = 1


@dataclass(frozen=True)
class BenchmarkSweep:
    """One axis is varied at a time, every other setting comes from ``base``."""

    base: SimulationConfig
    n_steps: Tuple[int, ...] = ()
    f0: Tuple[float, ...] = ()
    batch: Tuple[int, ...] = ()
    workers: Tuple[int, ...] = ()

    def cases(self) -> List[BenchmarkCase]:
        base = self.base
        fs = base.sample_rate
        cases = [BenchmarkCase("n_steps", n, base.updated(duration=n / fs)) for n in self.n_steps]
        cases += [
            BenchmarkCase("f0", f, base.updated(string=replace(base.string, gamma=2.0 * f))) for f in self.f0
        ]
        cases += [BenchmarkCase("batch", b, base, batch=b) for b in self.batch]
        worker_batch = max((*self.batch, DEFAULT_WORKER_BATCH))
        cases += [BenchmarkCase("workers", w, base, batch=worker_batch, workers=w) for w in self.workers]
        return cases


@dataclass
class BenchmarkRow:
    axis: str
    value: float
    n_steps: int
    n_t: int
    n_l: int
    batch: int
    workers: int
    repeats: int
    median: float
    iqr: Optional[float]
    minimum: float
    maximum: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "axis": self.axis,
            "value": self.value,
            "n_steps": self.n_steps,
            "n_t": self.n_t,
            "n_l": self.n_l,
            "batch": self.batch,
            "workers": self.workers,
            "repeats": self.repeats,
            "median_seconds": self.median,
            "iqr_seconds": self.iqr,
            "min_seconds": self.minimum,
            "max_seconds": self.maximum,
        }


COLUMNS = (
    "axis", "value", "n_steps", "n_t", "n_l", "batch", "workers", "repeats",
    "median_seconds", "iqr_seconds", "min_seconds", "max_seconds",
)


@dataclass
class TimingTable:
    rows: List[BenchmarkRow] = field(default_factory=list)
    environment: Dict[str, Any] = field(default_factory=dict)

    def to_text(self) -> str:
        """Tab-separated table; environment as leading ``#`` comments, empty cells for missing dispersion."""
        lines = [f"# {key}: {value}" for key, value in self.environment.items()]
        lines.append("\t".join(COLUMNS))
        for row in self.rows:
            record = row.to_dict()
            lines.append("\t".join("" if record[c] is None else f"{record[c]:g}" if isinstance(record[c], float)
                                   else str(record[c]) for c in COLUMNS))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> Dict[str, Any]:
        return {"environment": self.environment, "rows": [row.to_dict() for row in self.rows]}

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        else:
            path.write_text(self.to_text(), encoding="utf-8")
        return path


def environment() -> Dict[str, Any]:
    return {
        "engine_version": ENGINE_VERSION,
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "timestamp": datetime.now().isoformat(),
    }


def _render_once(config: SimulationConfig) -> int:
    return len(render(config).samples)


def _noop(_: int) -> int:
    return 0


def time_case(case: BenchmarkCase, repeats: int) -> List[float]:
    """Wall-clock seconds of ``repeats`` runs of one batch."""
    batch = [case.config] * case.batch
    timings = []
    if case.workers <= 1:
        for _ in range(repeats):
            started = time.perf_counter()
            for config in batch:
                _render_once(config)
            timings.append(time.perf_counter() - started)
        return timings
    with ProcessPoolExecutor(max_workers=case.workers) as pool:
        # start every worker process before timing
        list(pool.map(_noop, range(case.workers)))
        for _ in range(repeats):
            started = time.perf_counter()
            list(pool.map(_render_once, batch))
            timings.append(time.perf_counter() - started)
    return timings


def summarize(case: BenchmarkCase, timings: Sequence[float]) -> BenchmarkRow:
    grid = compute_grid(case.config.string, case.config.sample_rate)
    t = np.asarray(timings)
    iqr = float(np.subtract(*np.percentile(t, [75, 25]))) if t.size > 1 else None
    return BenchmarkRow(
        axis=case.axis,
        value=case.value,
        n_steps=case.config.n_steps,
        n_t=grid.n_t,
        n_l=grid.n_l,
        batch=case.batch,
        workers=case.workers,
        repeats=t.size,
        median=float(np.median(t)),
        iqr=iqr,
        minimum=float(t.min()),
        maximum=float(t.max()),
    )


def benchmark(configs: Sequence[Union[SimulationConfig, BenchmarkCase]], repeats: int = 5) -> TimingTable:
    """Time each config (or prepared case) ``repeats`` times; the table reports median and IQR."""
    if repeats < 1:
        raise ValueError(f"repeats must be ≥ 1 (got {repeats})")
    table = TimingTable(environment=environment())
    for index, item in enumerate(configs):
        case = item if isinstance(item, BenchmarkCase) else BenchmarkCase("config", index, item)
        row = summarize(case, time_case(case, repeats))
        logger.info(f"benchmark {case.axis}={case.value:g}: median {row.median:.4f} s over {repeats} runs")
        table.rows.append(row)
    return table


def run_sweep(sweep: BenchmarkSweep, repeats: int = 5) -> TimingTable:
    return benchmark(sweep.cases(), repeats)
