"""Experiment sweeps, config ingestion and tidy CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analytic import evaluate
from .core import AllocationDistribution, NetworkConfig, SetupCatalog, default_catalog
from .optimizer import (
    DEFAULT_STEP,
    Objective,
    QuantizedAlpha,
    grid_divisions,
    optimize,
    optimize_quantized,
    optimize_two_setup,
    two_setup_distribution,
)
from .simulator import simulate

SCHEMA_VERSION = 1
MODES = ("analytic", "simulate", "optimize", "quantize-sweep")
CSV_COLUMNS = (
    "M",
    "l",
    "mode",
    "delta",
    "Ps_analytic",
    "G_analytic",
    "E_analytic",
    "Ps_sim_mean",
    "Ps_sim_stderr",
    "G_sim_mean",
    "E_sim_mean",
    "seeds",
)
FLOAT_COLUMNS = CSV_COLUMNS[4:11]
DEFAULT_DEVICE_GRID = tuple(range(20000, 200001, 20000))
DEFAULT_SEEDS = tuple(range(1, 11))
SCENARIO_KEYS = tuple(
    f.name for f in fields(NetworkConfig) if f.name not in ("devices", "payload_bytes")
)


class SpecError(ValueError):
    """Invalid experiment specification; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message

    def to_dict(self) -> dict:
        return {"error": "invalid_spec", "field": self.field, "message": self.message}


@dataclass(frozen=True)
class ExperimentSpec:
    """What to sweep and how.

    ``policies`` lists the row labels evaluated at every grid point:

    * ``DR8``, ``DR9`` or ``S<k>``: one-point distributions;
    * an explicit distribution such as ``1:0.35+6:0.65``;
    * ``opt-goodput`` / ``opt-energy_efficiency``: the grid optimum;
    * ``two-setup-<objective>``: best S1/S6 mix on a 0.01 grid;
    * ``q<b>-<objective>``: best S1/S6 mix with a ``b``-bit alpha.

    When empty, the policies follow from ``mode``.
    """

    mode: str = "analytic"
    scenario: dict = field(default_factory=dict)
    device_grid: tuple[int, ...] = DEFAULT_DEVICE_GRID
    payload_grid: tuple[int, ...] = (10,)
    policies: tuple[str, ...] = ()
    objectives: tuple[str, ...] = ("goodput",)
    step: Fraction = DEFAULT_STEP
    bits: tuple[int, ...] = (1, 2, 3, 4)
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    allow_repeats: bool = False
    jobs: int = 1

    @property
    def simulates(self) -> bool:
        return self.mode == "simulate"

    def resolved_policies(self) -> tuple[str, ...]:
        if self.policies:
            return tuple(self.policies)
        objs = [Objective.parse(o).value for o in self.objectives]
        if self.mode in ("analytic", "simulate"):
            return ("DR8", "DR9")
        if self.mode == "optimize":
            return ("DR8", "DR9", *(f"opt-{o}" for o in objs))
        out: list[str] = []
        for o in objs:
            out += [f"opt-{o}", f"two-setup-{o}", *(f"q{b}-{o}" for b in self.bits)]
        return tuple(out)

    def base_config(self) -> NetworkConfig:
        return NetworkConfig(**self.scenario)

    def validate(self, catalog: SetupCatalog | None = None) -> None:
        catalog = catalog or default_catalog()
        if self.mode not in MODES:
            raise SpecError("mode", f"must be one of {', '.join(MODES)}, got {self.mode!r}")
        unknown = set(self.scenario) - set(SCENARIO_KEYS)
        if unknown:
            raise SpecError(f"scenario.{sorted(unknown)[0]}", "unknown scenario key")
        try:
            self.base_config()
        except (TypeError, ValueError) as exc:
            raise SpecError("scenario", str(exc)) from None
        for name in ("device_grid", "payload_grid"):
            grid = getattr(self, name)
            if not grid:
                raise SpecError(name, "must not be empty")
            for i, v in enumerate(grid):
                if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                    raise SpecError(f"{name}[{i}]", f"must be a positive integer, got {v!r}")
        if not self.objectives:
            raise SpecError("objectives", "must not be empty")
        for i, o in enumerate(self.objectives):
            try:
                Objective.parse(o)
            except ValueError as exc:
                raise SpecError(f"objectives[{i}]", str(exc)) from None
        try:
            grid_divisions(self.step)
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise SpecError("step", str(exc)) from None
        for i, b in enumerate(self.bits):
            if isinstance(b, bool) or not isinstance(b, int) or not 1 <= b <= 8:
                raise SpecError(f"bits[{i}]", f"must be an integer in 1..8, got {b!r}")
        if self.simulates and not self.seeds:
            raise SpecError("seeds", "must not be empty when simulating")
        for i, s in enumerate(self.seeds):
            if isinstance(s, bool) or not isinstance(s, int) or s < 0:
                raise SpecError(f"seeds[{i}]", f"must be a non-negative integer, got {s!r}")
        if isinstance(self.jobs, bool) or not isinstance(self.jobs, int) or self.jobs < 1:
            raise SpecError("jobs", f"must be a positive integer, got {self.jobs!r}")
        for i, p in enumerate(self.resolved_policies()):
            try:
                _parse_policy(p, catalog)
            except (KeyError, ValueError, IndexError, TypeError) as exc:
                raise SpecError(f"policies[{i}]", str(exc).strip("'\"")) from None


_Q_RE = re.compile(r"^q(\d+)-(.+)$")


def _parse_policy(label: str, catalog: SetupCatalog):
    """Return ``(kind, payload)`` for a policy label."""
    text = label.strip()
    if text.startswith("opt-") or text.startswith("optimize-"):
        return "opt", Objective.parse(text.split("-", 1)[1])
    if text.startswith("two-setup-"):
        return "two", Objective.parse(text[len("two-setup-") :])
    m = _Q_RE.match(text)
    if m:
        bits = int(m.group(1))
        if not 1 <= bits <= 8:
            raise ValueError(f"quantizer bits must be in 1..8, got {bits}")
        return "quant", (bits, Objective.parse(m.group(2)))
    if ":" in text:
        return "fixed", AllocationDistribution.parse(text, len(catalog))
    return "fixed", AllocationDistribution.point(len(catalog), catalog.resolve(text))


def _canonical_label(label: str) -> str:
    text = label.strip()
    if text.startswith("optimize-"):
        return "opt-" + Objective.parse(text[len("optimize-") :]).value
    return text


@dataclass(frozen=True)
class SweepRow:
    M: int
    l: int
    mode: str
    delta: str
    Ps_analytic: float
    G_analytic: float
    E_analytic: float
    Ps_sim_mean: float = math.nan
    Ps_sim_stderr: float = math.nan
    G_sim_mean: float = math.nan
    E_sim_mean: float = math.nan
    seeds: int = 0

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


def _resolve_delta(kind, payload, cfg: NetworkConfig, catalog: SetupCatalog, step) -> AllocationDistribution:
    if kind == "fixed":
        return payload
    if kind == "opt":
        return optimize(cfg, catalog, payload, step).best_delta
    if kind == "two":
        alpha, _ = optimize_two_setup(cfg, catalog, payload)
        return two_setup_distribution(catalog, alpha)
    bits, objective = payload
    return optimize_quantized(cfg, catalog, objective, bits).distribution(catalog)


def _stderr(values: np.ndarray) -> float:
    values = values[~np.isnan(values)]
    if len(values) < 2:
        return math.nan
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _nanmean(values: np.ndarray) -> float:
    values = values[~np.isnan(values)]
    return float(values.mean()) if len(values) else math.nan


def _grid_point(args) -> list[SweepRow]:
    spec, catalog, M, l = args
    cfg = spec.base_config().replace(devices=M, payload_bytes=l)
    rows = []
    for label in spec.resolved_policies():
        kind, payload = _parse_policy(label, catalog)
        delta = _resolve_delta(kind, payload, cfg, catalog, spec.step)
        rep = evaluate(cfg, catalog, delta)
        row = dict(
            M=M,
            l=l,
            mode=_canonical_label(label),
            delta=delta.format(),
            Ps_analytic=rep.packet_success,
            G_analytic=rep.goodput_Bps,
            E_analytic=rep.energy_eff_BpJ,
        )
        if spec.simulates:
            sims = [simulate(cfg, catalog, delta, s, spec.allow_repeats) for s in spec.seeds]
            ps = np.array([r.empirical_Ps for r in sims], dtype=float)
            row.update(
                Ps_sim_mean=_nanmean(ps),
                Ps_sim_stderr=_stderr(ps),
                G_sim_mean=float(np.mean([r.empirical_goodput_Bps for r in sims])),
                E_sim_mean=_nanmean(np.array([r.empirical_energy_eff_BpJ for r in sims])),
                seeds=len(sims),
            )
        rows.append(SweepRow(**row))
    return rows


def run_experiment(spec: ExperimentSpec, catalog: SetupCatalog | None = None) -> list[SweepRow]:
    """Evaluate every (payload, device count) grid point; rows come back in grid order."""
    catalog = catalog or default_catalog()
    spec.validate(catalog)
    points = [(spec, catalog, M, l) for l in spec.payload_grid for M in spec.device_grid]
    if spec.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            chunks = list(pool.map(_grid_point, points))
    else:
        chunks = [_grid_point(p) for p in points]
    return [row for chunk in chunks for row in chunk]


def quantized_downlinks(spec: ExperimentSpec, catalog: SetupCatalog | None = None) -> list[dict]:
    """Chosen alpha code and downlink octet for each grid point, objective and bit width."""
    from .optimizer import encode_downlink

    catalog = catalog or default_catalog()
    spec.validate(catalog)
    out = []
    for l in spec.payload_grid:
        for M in spec.device_grid:
            cfg = spec.base_config().replace(devices=M, payload_bytes=l)
            for o in spec.objectives:
                for b in spec.bits:
                    q: QuantizedAlpha = optimize_quantized(cfg, catalog, o, b)
                    out.append(
                        {
                            "M": M,
                            "l": l,
                            "objective": Objective.parse(o).value,
                            "bits": b,
                            "code": q.code,
                            "alpha": float(q.alpha),
                            "octet": encode_downlink(q).hex(),
                        }
                    )
    return out


# -- serialization ---------------------------------------------------------


def _fmt(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.12g}"


def rows_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(
            [r.M, r.l, r.mode, r.delta, *(_fmt(getattr(r, c)) for c in FLOAT_COLUMNS), r.seeds]
        )
    return buf.getvalue()


def rows_to_json(rows: Iterable[SweepRow]) -> str:
    out = []
    for r in rows:
        d = r.as_dict()
        for c in FLOAT_COLUMNS:
            d[c] = None if math.isnan(d[c]) else float(_fmt(d[c]))
        out.append(d)
    return json.dumps(out, indent=2) + "\n"


def _row_from_mapping(d: dict) -> SweepRow:
    def num(v):
        return math.nan if v in ("", None) else float(v)

    return SweepRow(
        M=int(d["M"]),
        l=int(d["l"]),
        mode=str(d["mode"]),
        delta=str(d["delta"]),
        **{c: num(d[c]) for c in FLOAT_COLUMNS},
        seeds=int(d["seeds"]),
    )


def parse_csv(text: str) -> list[SweepRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return [_row_from_mapping(d) for d in reader]


def parse_json(text: str) -> list[SweepRow]:
    return [_row_from_mapping(d) for d in json.loads(text)]


def emit(rows: Sequence[SweepRow], fmt: str = "csv", path: str | Path | None = None) -> str:
    """Serialize rows; write to ``path`` when given. Returns the text."""
    if fmt == "csv":
        text = rows_to_csv(rows)
    elif fmt == "json":
        text = rows_to_json(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}, expected csv or json")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


def rows_equal(a: Sequence[SweepRow], b: Sequence[SweepRow]) -> bool:
    """Row equality at 12 significant digits, with NaN equal to NaN."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        for c in CSV_COLUMNS:
            u, v = getattr(x, c), getattr(y, c)
            if c in FLOAT_COLUMNS:
                if _fmt(u) != _fmt(v):
                    return False
            elif u != v:
                return False
    return True


def delta_table(rows: Sequence[SweepRow], size: int, mode: str) -> str:
    """Text table of optimal weights in percent, one line per (l, M)."""
    picked = [r for r in rows if r.mode == mode]
    header = ["l", "M", *(f"d{k}" for k in range(1, size + 1))]
    lines = ["  ".join(f"{h:>7}" for h in header)]
    for r in picked:
        w = AllocationDistribution.parse(r.delta, size).as_array() if r.delta else np.zeros(size)
        cells = [f"{round(100 * x):d}%" if x > 0 else "-" for x in w]
        lines.append("  ".join(f"{c:>7}" for c in [str(r.l), str(r.M), *cells]))
    return "\n".join(lines) + "\n"


# -- config files ----------------------------------------------------------

_LIST_KEYS = {"devices": "device_grid", "payload": "payload_grid", "policies": "policies",
              "objectives": "objectives", "bits": "bits", "seeds": "seeds"}
_SCALAR_KEYS = {"mode", "step", "allow_repeats", "jobs"}


def spec_from_mapping(data: dict) -> ExperimentSpec:
    """Build a spec from a flat key/value mapping (the config-file schema)."""
    if not isinstance(data, dict):
        raise SpecError("<root>", "config must be a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise SpecError("schema_version", f"must be {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    kwargs: dict = {}
    scenario: dict = {}
    for key, value in data.items():
        if key == "schema_version":
            continue
        if key in _LIST_KEYS:
            items = value if isinstance(value, list) else [value]
            if any(isinstance(v, (list, dict)) for v in items):
                raise SpecError(key, "must be a scalar or a flat list")
            kwargs[_LIST_KEYS[key]] = tuple(items)
        elif key in _SCALAR_KEYS:
            if isinstance(value, (list, dict)):
                raise SpecError(key, "must be a scalar")
            kwargs[key] = value
        elif key in SCENARIO_KEYS:
            if isinstance(value, (list, dict)) or isinstance(value, bool):
                raise SpecError(key, "must be a number")
            scenario[key] = value
        else:
            raise SpecError(key, "unknown key")
    if "step" in kwargs:
        try:
            kwargs["step"] = Fraction(str(kwargs["step"]))
        except (ValueError, ZeroDivisionError):
            raise SpecError("step", f"not a number: {kwargs['step']!r}") from None
    spec = ExperimentSpec(scenario=scenario, **kwargs)
    spec.validate()
    return spec


def load_spec(path: str | Path) -> ExperimentSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError("<file>", f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("<file>", f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return spec_from_mapping(data)


# -- named experiment suites ----------------------------------------------

SUITES = {
    "table3": dict(mode="optimize", payload_grid=(10,), policies=("opt-goodput",)),
    "table4": dict(mode="optimize", payload_grid=(10,), policies=("opt-energy_efficiency",)),
    "table5": dict(mode="optimize", payload_grid=(30, 50), policies=("opt-goodput",)),
    "table6": dict(mode="optimize", payload_grid=(30, 50), policies=("opt-energy_efficiency",)),
    "fig4": dict(mode="analytic", payload_grid=(10,), policies=("DR8", "DR9", "opt-goodput")),
    "fig5": dict(mode="analytic", payload_grid=(10,),
                 policies=("DR8", "DR9", "opt-goodput", "opt-energy_efficiency")),
    "fig6": dict(mode="analytic", payload_grid=(10,),
                 policies=("DR8", "DR9", "opt-goodput", "opt-energy_efficiency")),
    "fig7": dict(mode="analytic", payload_grid=(30, 50),
                 policies=("DR8", "DR9", "opt-goodput", "opt-energy_efficiency")),
    "fig8": dict(mode="quantize-sweep", payload_grid=(10,), objectives=("goodput",)),
    "fig9": dict(mode="quantize-sweep", payload_grid=(10,), objectives=("energy_efficiency",)),
}


def suite_spec(name: str, simulate: bool = False, **overrides) -> ExperimentSpec:
    """Spec for one named table or figure suite; ``simulate`` adds seeded runs to every row."""
    if name not in SUITES:
        raise SpecError("suite", f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    params = dict(SUITES[name])
    if simulate:
        spec = ExperimentSpec(**params)
        params["policies"] = spec.resolved_policies()
        params["mode"] = "simulate"
    params.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**params)
