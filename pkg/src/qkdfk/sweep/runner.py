"""Sweep runner: builds instances across a grid and evaluates them concurrently.

Usage::

    config = SweepConfig.load("configs/bb84_finite.toml")
    report = await SweepRunner(config).run()
    print(report.table())
"""

from __future__ import annotations

import asyncio
import csv
import functools
import io
import json
import logging
import math
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from tabulate import tabulate

from qkdfk.finitekey import EntropyPath, KeyRateResult
from qkdfk.pipeline import PathEvaluation, PipelineSettings, PointStatus, evaluate_path
from qkdfk.protocols.base import PLOB, ProtocolInstance
from qkdfk.protocols.catalog import ProtocolCatalog, default_catalog
from qkdfk.protocols.twin_field import CharlieOutcome, loss_db_to_eta, plob
from qkdfk.sweep.config import SweepConfig
from qkdfk.sweep.optimize import brent_minimize

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "protocol",
    "N",
    "loss_db",
    "q_param",
    "theta_deg",
    "Q",
    "p_dark",
    "p_pass",
    "path",
    "entropy_term",
    "ell",
    "rate",
    "plob",
    "status",
)
EXTRA_COLUMNS = ("best", "certified", "reason")
TIMING_COLUMN = "wall_time_s"

ProgressCallback = Callable[..., None]


@dataclass
class ResultRow:
    """One path at one grid point."""

    index: int
    """Grid position; rows are written in this order."""

    protocol: str
    N: float
    path: str
    Q: float
    p_pass: float
    entropy_term: float
    ell: int | None
    rate: float
    status: str
    certified: bool
    loss_db: float | None = None
    q_param: float | None = None
    theta_deg: float | None = None
    p_dark: float | None = None
    plob: float | None = None
    best: float = 0.0
    """Larger of the certified rates of every path at this grid point."""

    reason: str = ""
    wall_time_s: float = 0.0
    parameters: dict[str, Any] = field(default_factory=dict)

    def record(self, timing: bool = True) -> dict[str, Any]:
        """Flat mapping in column order, as written to CSV."""
        columns = CSV_COLUMNS + EXTRA_COLUMNS + ((TIMING_COLUMN,) if timing else ())
        return {c: _cell(getattr(self, c)) for c in columns}

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        out = asdict(self)
        if not timing:
            out.pop(TIMING_COLUMN)
        return out


@dataclass
class SweepReport:
    """All rows of a sweep, ordered by grid index."""

    protocol: str
    rows: list[ResultRow] = field(default_factory=list)
    total_time_s: float = 0.0

    @property
    def failures(self) -> list[ResultRow]:
        return [r for r in self.rows if not r.certified]

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        columns = CSV_COLUMNS + EXTRA_COLUMNS + ((TIMING_COLUMN,) if timing else ())
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row.record(timing))
        return buf.getvalue()

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "protocol": self.protocol,
            "rows": [r.to_dict(timing) for r in self.rows],
            "failures": len(self.failures),
        }
        if timing:
            out["total_time_s"] = self.total_time_s
        return out

    def to_json(self, timing: bool = True, indent: int = 2) -> str:
        return json.dumps(_jsonable(self.to_dict(timing)), indent=indent, ensure_ascii=False)

    def table(self) -> str:
        headers = ["N", "path", "Q", "p_pass", "entropy", "ell", "rate", "best", "status"]
        body = [
            [
                _cell(r.N),
                r.path,
                r.Q,
                r.p_pass,
                r.entropy_term,
                "" if r.ell is None else r.ell,
                r.rate,
                r.best,
                r.status,
            ]
            for r in self.rows
        ]
        return tabulate(body, headers=headers, floatfmt=".6g")

    def write(self, path: str | Path, fmt: str = "csv", timing: bool = True) -> Path:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        text = self.to_json(timing) if fmt == "json" else self.to_csv(timing)
        out.write_text(text, encoding="utf-8")
        logger.info("Wrote %d rows to %s", len(self.rows), out)
        return out


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def protocol_parameters(
    config: SweepConfig, axes: dict[str, float], catalog: ProtocolCatalog | None = None
) -> dict[str, Any]:
    """Builder arguments for one grid point, with the ``Q`` and ``loss_db`` axes resolved.

    ``Q`` goes through the protocol's own :meth:`~Protocol.noise_for_error_rate`.
    """
    params: dict[str, Any] = dict(config.fixed)
    for key, value in axes.items():
        if key == "Q":
            protocol = (catalog or default_catalog()).get(config.protocol)
            params.update(protocol.noise_for_error_rate(value))
        elif key == "loss_db":
            params["sqrt_eta"] = math.sqrt(loss_db_to_eta(value))
        else:
            params[key] = value
    return params


@dataclass(frozen=True)
class _Point:
    index: int
    axes: dict[str, float]
    N: float


class SweepRunner:
    """Evaluates every grid point of a :class:`SweepConfig` with bounded concurrency."""

    def __init__(
        self,
        config: SweepConfig,
        catalog: ProtocolCatalog | None = None,
        settings: PipelineSettings | None = None,
        workers: int | None = None,
    ) -> None:
        self.config = config
        self.catalog = catalog or default_catalog()
        self.settings = settings or config.pipeline_settings()
        self.workers = workers or config.solver.workers

    # ------------------------------------------------------------------
    # Instances
    # ------------------------------------------------------------------

    def instances(self, params: dict[str, Any]) -> list[ProtocolInstance]:
        """The instance for ``params``; both herald branches with ``tf_both_heralds``."""
        if self.config.tf_both_heralds:
            return [
                self.catalog.build(self.config.protocol, **{**params, "charlie_outcome": o.value})
                for o in CharlieOutcome
            ]
        return [self.catalog.build(self.config.protocol, **params)]

    def _evaluate(
        self, params: dict[str, Any], N: float, path: EntropyPath
    ) -> tuple[list[ProtocolInstance], PathEvaluation]:
        instances = self.instances(params)
        evaluations = [evaluate_path(inst, N, path, self.settings) for inst in instances]
        if len(evaluations) == 1:
            return instances, evaluations[0]
        return instances, _combine(instances, evaluations)

    def _optimize(self, params: dict[str, Any], N: float) -> dict[str, Any]:
        spec = self.config.optimize
        if spec is None:
            return params
        path = spec.path or self.config.paths[0]

        def objective(x: float) -> float:
            try:
                _, ev = self._evaluate({**params, spec.parameter: x}, N, path)
            except ValueError:
                return 0.0
            return -ev.result.rate if ev.certified else 0.0

        x_star, f_star = brent_minimize(objective, (spec.lower, spec.upper), tol=spec.tol)
        logger.info("optimized %s = %.6g (rate %.6g) at N=%s", spec.parameter, x_star, -f_star, N)
        return {**params, spec.parameter: x_star}

    def evaluate_point(self, index: int, axes: dict[str, float], N: float) -> list[ResultRow]:
        """Rows for every configured path at one grid point; never raises."""
        start = time.perf_counter()
        params = protocol_parameters(self.config, axes, self.catalog)
        try:
            params = self._optimize(params, N)
            results = [self._evaluate(params, N, path) for path in self.config.paths]
        except Exception as exc:
            logger.exception("Sweep: point %d (%s, N=%s) failed", index, axes, N)
            return [
                self._error_row(index, axes, params, N, path, exc, time.perf_counter() - start)
                for path in self.config.paths
            ]
        best = max((ev.result.rate for _, ev in results if ev.certified), default=0.0)
        elapsed = time.perf_counter() - start
        return [
            self._row(index, axes, params, N, instances, ev, best, elapsed)
            for instances, ev in results
        ]

    def _describe(
        self, axes: dict[str, float], params: dict[str, Any]
    ) -> dict[str, float | None]:
        name = self.config.protocol
        theta = params.get("theta") if name == "b92" else None
        sqrt_eta = params.get("sqrt_eta") if name == "twin_field" else None
        eta = None if sqrt_eta is None else sqrt_eta**2
        return {
            "loss_db": axes.get("loss_db"),
            "q_param": params.get("q") if name == "twin_field" else None,
            "theta_deg": None if theta is None else math.degrees(theta),
            "p_dark": params.get("p_dark") if name == "twin_field" else None,
            "plob": plob(eta) if eta is not None and eta < 1.0 else None,
        }

    def _row(
        self,
        index: int,
        axes: dict[str, float],
        params: dict[str, Any],
        N: float,
        instances: list[ProtocolInstance],
        ev: PathEvaluation,
        best: float,
        elapsed: float,
    ) -> ResultRow:
        described = self._describe(axes, params)
        reference = instances[0].reference
        if described["plob"] is None and PLOB in reference:
            described["plob"] = reference.evaluate(PLOB)
        return ResultRow(
            index=index,
            protocol=self.config.protocol,
            N=N,
            path=ev.path.value,
            Q=instances[0].key_error_q,
            p_pass=sum(inst.p_pass for inst in instances),
            entropy_term=ev.entropy_term,
            ell=ev.result.ell,
            rate=ev.result.rate,
            status=ev.status.value,
            certified=ev.certified,
            best=best,
            reason=ev.reason,
            wall_time_s=elapsed,
            parameters=dict(params),
            **described,
        )

    def _error_row(
        self,
        index: int,
        axes: dict[str, float],
        params: dict[str, Any],
        N: float,
        path: EntropyPath,
        exc: Exception,
        elapsed: float,
    ) -> ResultRow:
        return ResultRow(
            index=index,
            protocol=self.config.protocol,
            N=N,
            path=path.value,
            Q=math.nan,
            p_pass=0.0,
            entropy_term=0.0,
            ell=None if math.isinf(N) else 0,
            rate=0.0,
            status=PointStatus.ERROR.value,
            certified=False,
            reason=f"{type(exc).__name__}: {exc}",
            wall_time_s=elapsed,
            parameters=dict(params),
            **self._describe(axes, params),
        )

    # ------------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------------

    def points(self) -> list[_Point]:
        return [_Point(i, axes, n) for i, (axes, n) in enumerate(self.config.grid())]

    async def run(self, on_progress: ProgressCallback | None = None) -> SweepReport:
        """Evaluate every grid point; per-point failures are recorded, never raised.

        ``on_progress`` is called after each point with
        ``(current, total, index, status)`` keywords.
        """
        start = time.perf_counter()
        points = self.points()
        semaphore = asyncio.Semaphore(self.workers)
        loop = asyncio.get_running_loop()
        done = 0
        logger.info(
            "Sweep %s: %d points x %d paths, %d workers",
            self.config.protocol, len(points), len(self.config.paths), self.workers,
        )

        async def _run_one(point: _Point) -> list[ResultRow]:
            nonlocal done
            async with semaphore:
                rows = await loop.run_in_executor(
                    None,
                    functools.partial(self.evaluate_point, point.index, point.axes, point.N),
                )
            done += 1
            if on_progress:
                on_progress(
                    current=done,
                    total=len(points),
                    index=point.index,
                    status="failed" if any(not r.certified for r in rows) else "completed",
                )
            return rows

        chunks = await asyncio.gather(*(_run_one(p) for p in points))
        rows = sorted((r for chunk in chunks for r in chunk), key=lambda r: r.index)
        report = SweepReport(
            protocol=self.config.protocol,
            rows=rows,
            total_time_s=time.perf_counter() - start,
        )
        logger.info(
            "Sweep %s finished: %d rows, %d failures in %.1fs",
            self.config.protocol, len(rows), len(report.failures), report.total_time_s,
        )
        return report


def _combine(
    instances: list[ProtocolInstance], evaluations: list[PathEvaluation]
) -> PathEvaluation:
    """Sum of the herald branches; the entropy term is weighted by ``p_pass``."""
    total_pass = sum(inst.p_pass for inst in instances)
    entropy = sum(inst.p_pass * ev.entropy_term for inst, ev in zip(instances, evaluations))
    worst = next((ev for ev in evaluations if not ev.certified), None)
    first = evaluations[0]
    if first.result.ell is None:
        ell = None
    elif worst is None:
        ell = sum(ev.result.ell or 0 for ev in evaluations)
    else:
        ell = 0
    result = KeyRateResult(
        ell=ell,
        rate=sum(ev.result.rate for ev in evaluations) if worst is None else 0.0,
        path=first.result.path,
        attack_model=first.result.attack_model,
        N=first.result.N,
        n=sum(ev.result.n for ev in evaluations),
        components={"branches": float(len(evaluations))},
        eps_sec=first.result.eps_sec,
    )
    return PathEvaluation(
        result=result,
        entropy_term=entropy / total_pass if total_pass > 0 else 0.0,
        status=worst.status if worst else first.status,
        reason="; ".join(ev.reason for ev in evaluations if ev.reason),
        elapsed_s=sum(ev.elapsed_s for ev in evaluations),
    )


async def run_sweep(
    config: SweepConfig,
    out: str | Path | None = None,
    fmt: str | None = None,
    settings: PipelineSettings | None = None,
    on_progress: ProgressCallback | None = None,
) -> SweepReport:
    """Run ``config`` and write the report to ``out`` (or the config's output path)."""
    report = await SweepRunner(config, settings=settings).run(on_progress=on_progress)
    target = out or config.output_path
    if target is not None:
        report.write(target, fmt or config.output_format, timing=config.timing)
    return report
