"""Sweep configuration: TOML files, environment defaults and validation.

A config file has the sections ``[protocol]``, ``[sweep]``, ``[security]``,
``[solver]`` and ``[output]``::

    [protocol]
    name = "bb84"
    p_z = 0.5

    [sweep]
    N = { start = 1e6, stop = 1e12, num = 7 }
    Q = [0.01, 0.02, 0.05]

    [security]
    paths = ["vn", "min"]

Values in the file override the environment; CLI flags override the file.
"""

from __future__ import annotations

import itertools
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from qkdfk.finitekey import (
    DEFAULT_ALPHA_PE,
    DEFAULT_EPS_COR,
    DEFAULT_EPS_SEC,
    DEFAULT_F_EC,
    AttackModel,
    EntropyPath,
)
from qkdfk.pipeline import PipelineSettings
from qkdfk.protocols.catalog import ProtocolCatalog, default_catalog
from qkdfk.relent import QreApproxConfig, StepOneMethod
from qkdfk.sdp.solver import DEFAULT_MAX_ITER, DEFAULT_TOL

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PATH_ALIASES = {
    "vn": EntropyPath.VON_NEUMANN,
    "von-neumann": EntropyPath.VON_NEUMANN,
    "min": EntropyPath.MIN_ENTROPY,
    "min-entropy": EntropyPath.MIN_ENTROPY,
}
OUTPUT_FORMATS = ("csv", "json")
SECTIONS = ("protocol", "sweep", "security", "solver", "output")


class ConfigError(ValueError):
    """A sweep config that cannot be run; the message names section and field."""


def _fail(section: str, key: str, message: str) -> ConfigError:
    return ConfigError(f"[{section}] {key}: {message}")


# ---------------------------------------------------------------------------
# Solver settings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverSettings:
    """Numerical settings shared by every point of a sweep.

    Defaults can be set via environment variables:

    - ``QKDFK_SOLVER_TOL``
    - ``QKDFK_SOLVER_MAX_ITER``
    - ``QKDFK_QRE_M``
    - ``QKDFK_QRE_K``
    - ``QKDFK_EPS_PERT``
    - ``QKDFK_WORKERS``
    - ``QKDFK_STEP_ONE`` (``auto``, ``sdp`` or ``frank-wolfe``)
    """

    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    qre_m: int = 4
    """Gauss-Legendre nodes of the relative-entropy approximation."""

    qre_k: int = 4
    """Square-root levels of the relative-entropy approximation."""

    eps_pert: float = 1e-10
    workers: int = 4
    """Sweep points evaluated concurrently."""

    step_one: StepOneMethod = StepOneMethod.AUTO

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ConfigError(f"[solver] tol: must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"[solver] max_iter: must be >= 1, got {self.max_iter}")
        if self.workers < 1:
            raise ConfigError(f"[solver] workers: must be >= 1, got {self.workers}")
        try:
            object.__setattr__(self, "step_one", StepOneMethod(self.step_one))
        except ValueError:
            choices = [m.value for m in StepOneMethod]
            raise ConfigError(
                f"[solver] step_one: expected one of {choices}, got {self.step_one!r}"
            ) from None

    @classmethod
    def from_env(cls) -> SolverSettings:
        """Create settings from environment variables, falling back to defaults."""
        defaults = cls()
        try:
            return cls(
                tol=float(os.environ.get("QKDFK_SOLVER_TOL", defaults.tol)),
                max_iter=int(os.environ.get("QKDFK_SOLVER_MAX_ITER", defaults.max_iter)),
                qre_m=int(os.environ.get("QKDFK_QRE_M", defaults.qre_m)),
                qre_k=int(os.environ.get("QKDFK_QRE_K", defaults.qre_k)),
                eps_pert=float(os.environ.get("QKDFK_EPS_PERT", defaults.eps_pert)),
                workers=int(os.environ.get("QKDFK_WORKERS", defaults.workers)),
                step_one=os.environ.get("QKDFK_STEP_ONE", defaults.step_one.value),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"environment: {exc}") from None

    def qre_config(self) -> QreApproxConfig:
        try:
            return QreApproxConfig(
                m=self.qre_m,
                k=self.qre_k,
                eps_pert=self.eps_pert,
                step_one=self.step_one,
                solver_tol=self.tol,
                solver_max_iter=self.max_iter,
            )
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None


# ---------------------------------------------------------------------------
# Sweep config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizeSpec:
    """Inner maximization of the rate over one protocol parameter."""

    parameter: str
    lower: float
    upper: float
    tol: float = 1e-4
    path: EntropyPath | None = None
    """Path whose rate is maximized; ``None`` uses the first configured path."""


@dataclass(frozen=True)
class SweepConfig:
    protocol: str
    fixed: dict[str, Any] = field(default_factory=dict)
    """Protocol parameters and options held constant."""

    axes: dict[str, tuple[float, ...]] = field(default_factory=dict)
    """Swept parameters other than ``N``, in file order."""

    n_grid: tuple[float, ...] = (math.inf,)
    optimize: OptimizeSpec | None = None
    eps_sec: float = DEFAULT_EPS_SEC
    eps_cor: float = DEFAULT_EPS_COR
    alpha_pe: float = DEFAULT_ALPHA_PE
    f_ec: float = DEFAULT_F_EC
    paths: tuple[EntropyPath, ...] = (EntropyPath.VON_NEUMANN, EntropyPath.MIN_ENTROPY)
    attack_model: AttackModel = AttackModel.COLLECTIVE
    tf_both_heralds: bool = False
    solver: SolverSettings = field(default_factory=SolverSettings)
    output_path: Path | None = None
    output_format: str = "csv"
    timing: bool = True

    def __post_init__(self) -> None:
        if not self.n_grid:
            raise _fail("sweep", "N", "grid is empty")
        for name, values in self.axes.items():
            if not values:
                raise _fail("sweep", name, "grid is empty")
        for key in ("eps_sec", "eps_cor"):
            if not 0.0 < getattr(self, key) < 1.0:
                raise _fail("security", key, f"must lie in (0, 1), got {getattr(self, key)}")
        if not 0.0 <= self.alpha_pe < 1.0:
            raise _fail("security", "alpha_pe", f"must lie in [0, 1), got {self.alpha_pe}")
        if self.f_ec < 1.0:
            raise _fail("security", "f_ec", f"must be >= 1, got {self.f_ec}")
        if not self.paths:
            raise _fail("security", "paths", "no entropy path selected")
        if self.output_format not in OUTPUT_FORMATS:
            raise _fail("output", "format", f"expected one of {OUTPUT_FORMATS}")

    def pipeline_settings(self, dump_dir: Path | None = None) -> PipelineSettings:
        try:
            return PipelineSettings(
                eps_sec=self.eps_sec,
                eps_cor=self.eps_cor,
                alpha_pe=self.alpha_pe,
                f_ec=self.f_ec,
                attack_model=self.attack_model,
                qre=self.solver.qre_config(),
                dump_dir=dump_dir,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[security] {exc}") from None

    def grid(self) -> list[tuple[dict[str, float], float]]:
        """Every ``(axis values, N)`` pair; ``N`` varies fastest."""
        names = list(self.axes)
        points = []
        for combo in itertools.product(*(self.axes[n] for n in names)):
            for n in self.n_grid:
                points.append((dict(zip(names, combo)), n))
        return points

    def with_overrides(self, **changes: Any) -> SweepConfig:
        """Copy with CLI-level overrides; ``None`` values are ignored."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    # ------------------------------------------------------------------
    # Loading
    # ------------------------------------------------------------------

    @classmethod
    def load(cls, path: str | Path, catalog: ProtocolCatalog | None = None) -> SweepConfig:
        source = Path(path)
        try:
            text = source.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{source}: cannot read config: {exc.strerror}") from None
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: invalid TOML: {exc}") from None
        return cls.from_dict(data, catalog=catalog, base_dir=source.parent)

    @classmethod
    def from_dict(
        cls,
        data: dict[str, Any],
        catalog: ProtocolCatalog | None = None,
        base_dir: Path | None = None,
    ) -> SweepConfig:
        catalog = catalog or default_catalog()
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown section(s) {sorted(unknown)}; expected {list(SECTIONS)}")

        proto = dict(_section(data, "protocol"))
        name = proto.pop("name", None)
        if not isinstance(name, str):
            raise _fail("protocol", "name", "missing or not a string")
        try:
            protocol = catalog.get(name)
        except ValueError as exc:
            raise _fail("protocol", "name", str(exc)) from None
        tf_both = bool(proto.pop("tf_both_heralds", False))
        known = {p.name for p in protocol.parameters} | set(protocol.options)
        specs = {p.name: p for p in protocol.parameters}
        for key, value in proto.items():
            if key not in known:
                raise _fail("protocol", key, f"not a parameter of {name}; expected {sorted(known)}")
            if key in specs:
                try:
                    specs[key].check(value)
                except (TypeError, ValueError) as exc:
                    raise _fail("protocol", key, str(exc)) from None
        if tf_both and name != "twin_field":
            raise _fail("protocol", "tf_both_heralds", "only applies to twin_field")

        sweep = dict(_section(data, "sweep"))
        n_grid = _parse_n_grid(sweep.pop("N", ["inf"]))
        optimize = _parse_optimize(sweep.pop("optimize", None), known)
        axes: dict[str, tuple[float, ...]] = {}
        for key, raw in sweep.items():
            if key == "Q" and not protocol.has_error_rate_axis:
                with_q = sorted(p.name for p in catalog if p.has_error_rate_axis)
                raise _fail("sweep", "Q", f"the Q axis needs one of {with_q}")
            if key == "loss_db" and name != "twin_field":
                raise _fail("sweep", "loss_db", "the loss axis only applies to twin_field")
            if key not in known and key not in ("Q", "loss_db"):
                raise _fail("sweep", key, f"not a parameter of {name}")
            axes[key] = _parse_axis("sweep", key, raw)
        if optimize is not None and optimize.parameter in axes:
            raise _fail("sweep", optimize.parameter, "is both swept and optimized")

        security = dict(_section(data, "security"))
        solver_table = dict(_section(data, "solver"))
        output = dict(_section(data, "output"))
        solver = _parse_solver(solver_table)

        out_path = output.get("path")
        if out_path is not None:
            out_path = Path(out_path)
            if base_dir is not None and not out_path.is_absolute():
                out_path = base_dir / out_path

        try:
            return cls(
                protocol=name,
                fixed=proto,
                axes=axes,
                n_grid=n_grid,
                optimize=optimize,
                eps_sec=_number("security", "eps_sec", security.get("eps_sec", DEFAULT_EPS_SEC)),
                eps_cor=_number("security", "eps_cor", security.get("eps_cor", DEFAULT_EPS_COR)),
                alpha_pe=_number(
                    "security", "alpha_pe", security.get("alpha_pe", DEFAULT_ALPHA_PE)
                ),
                f_ec=_number("security", "f_ec", security.get("f_ec", DEFAULT_F_EC)),
                paths=parse_paths(security.get("paths", ["vn", "min"])),
                attack_model=_enum(
                    "security",
                    "attack_model",
                    AttackModel,
                    security.get("attack_model", AttackModel.COLLECTIVE.value),
                ),
                tf_both_heralds=tf_both,
                solver=solver,
                output_path=out_path,
                output_format=str(output.get("format", "csv")),
                timing=bool(output.get("timing", True)),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# Field parsers
# ---------------------------------------------------------------------------


def _section(data: dict[str, Any], name: str) -> dict[str, Any]:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(section, key, f"expected a number, got {value!r}")
    return float(value)


def _enum(section: str, key: str, kind: Any, value: Any) -> Any:
    try:
        return kind(value)
    except ValueError:
        raise _fail(section, key, f"expected one of {[m.value for m in kind]}") from None


def _parse_axis(section: str, key: str, raw: Any) -> tuple[float, ...]:
    if isinstance(raw, dict):
        return _parse_range(section, key, raw)
    if not isinstance(raw, list):
        raw = [raw]
    if not raw:
        raise _fail(section, key, "grid is empty")
    return tuple(_number(section, key, v) for v in raw)


def _parse_range(section: str, key: str, raw: dict[str, Any]) -> tuple[float, ...]:
    """``{start, stop, num}``, linear unless ``log = true`` (log-spaced)."""
    try:
        start = _number(section, key, raw["start"])
        stop = _number(section, key, raw["stop"])
        num = int(raw["num"])
    except KeyError as exc:
        raise _fail(section, key, f"range needs start, stop and num (missing {exc})") from None
    if num < 1:
        raise _fail(section, key, "grid is empty")
    if raw.get("log", False):
        if start <= 0 or stop <= 0:
            raise _fail(section, key, "log-spaced range needs positive endpoints")
        values = np.logspace(math.log10(start), math.log10(stop), num)
    else:
        values = np.linspace(start, stop, num)
    return tuple(float(v) for v in values)


def _parse_n_grid(raw: Any) -> tuple[float, ...]:
    """``N`` values; ranges are log-spaced and ``"inf"`` selects the asymptotic limit."""
    if isinstance(raw, dict):
        raw = {"log": True, **raw}
    values = _parse_axis("sweep", "N", raw)
    for v in values:
        if not v >= 1:
            raise _fail("sweep", "N", f"transmissions must be >= 1, got {v}")
    return tuple(v if math.isinf(v) else float(round(v)) for v in values)


def _parse_optimize(raw: Any, known: set[str]) -> OptimizeSpec | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise _fail("sweep", "optimize", "must be a table")
    parameter = raw.get("parameter")
    if parameter not in known:
        raise _fail("sweep.optimize", "parameter", f"expected one of {sorted(known)}")
    bounds = raw.get("bounds")
    if not isinstance(bounds, list) or len(bounds) != 2:
        raise _fail("sweep.optimize", "bounds", "expected [lower, upper]")
    lower = _number("sweep.optimize", "bounds", bounds[0])
    upper = _number("sweep.optimize", "bounds", bounds[1])
    if not lower < upper:
        raise _fail("sweep.optimize", "bounds", f"empty interval [{lower}, {upper}]")
    path = raw.get("path")
    return OptimizeSpec(
        parameter=parameter,
        lower=lower,
        upper=upper,
        tol=_number("sweep.optimize", "tol", raw.get("tol", 1e-4)),
        path=parse_paths([path])[0] if path is not None else None,
    )


def _parse_solver(table: dict[str, Any]) -> SolverSettings:
    base = SolverSettings.from_env()
    ints = {"max_iter", "qre_m", "qre_k", "workers"}
    floats = {"tol", "eps_pert"}
    changes: dict[str, Any] = {}
    for key, value in table.items():
        if key in ints:
            if isinstance(value, bool) or not isinstance(value, int):
                raise _fail("solver", key, f"expected an integer, got {value!r}")
            changes[key] = value
        elif key in floats:
            changes[key] = _number("solver", key, value)
        elif key == "step_one":
            changes[key] = value
        else:
            raise _fail("solver", key, f"unknown field; expected {sorted(ints | floats)}")
    return replace(base, **changes)


def parse_paths(raw: Any) -> tuple[EntropyPath, ...]:
    """``["vn", "min"]``, ``"both"`` or a comma-separated string."""
    if isinstance(raw, str):
        raw = ["vn", "min"] if raw.strip() == "both" else raw.split(",")
    paths: list[EntropyPath] = []
    for item in raw:
        key = str(item).strip().lower()
        if key not in PATH_ALIASES:
            raise _fail("security", "paths", f"unknown path {item!r}; expected vn, min or both")
        if PATH_ALIASES[key] not in paths:
            paths.append(PATH_ALIASES[key])
    if not paths:
        raise _fail("security", "paths", "no entropy path selected")
    return tuple(paths)
