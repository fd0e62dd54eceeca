"""JSON reports and atomic file output."""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import UndefinedErrorMetric
from .geometry import estimate_error
from .network import Box, SampleSet
from .partition import AnalysisResult, AnalyzerConfig


@contextmanager
def atomic_path(path, suffix=""):
    """Yield a temporary sibling path; rename it onto ``path`` only on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=suffix, dir=path.parent or ".")
    os.close(fd)
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp, 0o666 & ~umask)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path, text: str) -> None:
    with atomic_path(path) as tmp:
        with open(tmp, "w") as fh:
            fh.write(text)


@dataclass
class Report:
    config: dict
    input_box: list
    estimate: dict
    error: Optional[float]
    error_status: str
    propagator_calls: int
    partitions: int
    wall_time_ms: float
    seeds: dict
    cells: list = field(default_factory=list)
    network: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))

    def write(self, path) -> None:
        write_text_atomic(path, self.to_json())


def build_report(cfg: AnalyzerConfig, box: Box, result: AnalysisResult, truth: SampleSet,
                 network: Optional[dict] = None) -> Report:
    try:
        error, status = estimate_error(result.estimate, truth, cfg.shape), "ok"
    except UndefinedErrorMetric:
        error, status = None, "undefined"
    cells = [
        {"region": c.region.to_list(), "output": c.output.to_list(), "depth": c.depth}
        for c in result.cells
    ]
    return Report(
        config=cfg.resolved(box).to_dict(),
        input_box=box.to_list(),
        estimate=result.estimate.to_dict(),
        error=error,
        error_status=status,
        propagator_calls=result.propagator_calls,
        partitions=result.partitions,
        wall_time_ms=result.wall_time_ms,
        seeds={"sample_seed": cfg.sample_seed, "truth_seed": truth.seed},
        cells=cells,
        network=network or {},
    )
