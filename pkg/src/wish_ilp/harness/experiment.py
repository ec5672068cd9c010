"""Experiment runs, persistence of per-query rows, anytime traces and sweeps."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import os
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..gf2 import EnumerationCapError, ParitySystem, greedy_sparsify, rref
from ..hashing import Family, SeededRng, parse_family, sample_toeplitz
from ..map_solvers import Budget, branch_and_bound, build_ilp
from ..model import FactorGraph, GridSpec, build_ising_grid, exact_log_partition, parse_model
from ..wish import Mode, WishConfig, assemble_estimate, median_aggregate, wish_run

log = logging.getLogger(__name__)

CSV_HEADER = ["level", "trial", "seed", "lower", "upper", "status", "nodes", "runtime_ms"]


@dataclass
class ExperimentConfig:
    """Everything needed to replay a run; also the flat key-value config schema."""

    grid: int = 4
    field: float = 1.0
    coupling: float = 3.0
    model_seed: int = 0
    model_file: str | None = None
    mode: str = "exact"
    delta: float = 0.1
    alpha: float = 0.125
    T: int | None = None
    family: str = "toeplitz"
    solver: str = "brute"
    encoding: str = "auto"
    preprocess: str = "rref"
    budget_seconds: float | None = None
    budget_nodes: int | None = None
    workers: int = 0
    seed: int = 0
    repetitions: int = 1
    out: str | None = None

    def build_model(self) -> FactorGraph:
        if self.model_file:
            return parse_model(Path(self.model_file).read_text())
        return build_ising_grid(GridSpec(self.grid, self.field, self.coupling, self.model_seed))

    def wish_config(self, seed: int | None = None) -> WishConfig:
        family, k = parse_family(self.family)
        return WishConfig(
            delta=self.delta,
            alpha=self.alpha,
            T_override=self.T,
            family=family,
            k=k,
            mode=Mode(self.mode),
            solver=self.solver,
            encoding=self.encoding,
            budget_seconds=self.budget_seconds,
            budget_nodes=self.budget_nodes,
            seed=self.seed if seed is None else seed,
            workers=self.worker_count,
            preprocess=self.preprocess,
        )

    @property
    def worker_count(self) -> int:
        """``workers = 0`` means one worker per available core."""
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if value is None else value}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in kinds:
        raise KeyError(f"unknown config key {name!r}")
    raw = raw.strip()
    kind = kinds[name]
    if raw == "" or raw.lower() == "none":
        if "None" not in kind:
            raise ValueError(f"config key {name!r} needs a value")
        return None
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = _coerce(key.replace("-", "_"), raw)
    return values


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the config file, then explicit overrides (``None`` = not given)."""
    values = parse_config_text(Path(path).read_text()) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return ExperimentConfig(**values)


@dataclass
class QueryRow:
    level: int
    trial: int
    seed: int
    lower: float
    upper: float
    status: str
    nodes: int
    runtime_ms: float


@dataclass
class RunSummary:
    seed: int
    log_estimate: float
    guarantee: str
    medians: list[float]
    T: int
    wall_time_s: float


@dataclass
class RunRecord:
    config: ExperimentConfig
    config_hash: str
    rows: list[QueryRow] = field(default_factory=list)
    summaries: list[RunSummary] = field(default_factory=list)
    exact_log_z: float | None = None
    wall_time_s: float = 0.0


def _fmt(value: float) -> str:
    return repr(float(value))


def write_query_csv(path: Path, rows: Iterable[QueryRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.level, r.trial, r.seed, _fmt(r.lower), _fmt(r.upper), r.status, r.nodes, _fmt(r.runtime_ms)])


def read_query_csv(path: Path) -> list[QueryRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [
            QueryRow(int(d["level"]), int(d["trial"]), int(d["seed"]), float(d["lower"]), float(d["upper"]),
                     d["status"], int(d["nodes"]), float(d["runtime_ms"]))
            for d in reader
        ]


def recompute_estimates(rows: Sequence[QueryRow], mode: str) -> dict[int, float]:
    """Per master seed, the estimate implied by the stored rows."""
    use_upper = Mode(mode) is Mode.UPPER
    by_seed: dict[int, dict[int, list[float]]] = {}
    for r in rows:
        by_seed.setdefault(r.seed, {}).setdefault(r.level, []).append(r.upper if use_upper else r.lower)
    out = {}
    for seed, levels in by_seed.items():
        medians = [median_aggregate(levels[i]) for i in range(len(levels))]
        out[seed] = assemble_estimate(medians)
    return out


def write_summary(path: Path, record: RunRecord) -> None:
    lines = [f"config_hash = {record.config_hash}"]
    lines += [f"config.{ln}" for ln in record.config.to_text().splitlines()]
    lines.append(f"exact_log_z = {'unavailable' if record.exact_log_z is None else _fmt(record.exact_log_z)}")
    lines.append(f"wall_time_s = {record.wall_time_s:.3f}")
    lines.append(f"runs = {len(record.summaries)}")
    for s in record.summaries:
        p = f"run.{s.seed}"
        lines.append(f"{p}.log_estimate = {_fmt(s.log_estimate)}")
        lines.append(f"{p}.guarantee = {s.guarantee}")
        lines.append(f"{p}.T = {s.T}")
        lines.append(f"{p}.medians = {' '.join(_fmt(m) for m in s.medians)}")
        if record.exact_log_z is not None:
            lines.append(f"{p}.abs_error = {_fmt(abs(s.log_estimate - record.exact_log_z))}")
        lines.append(f"{p}.wall_time_s = {s.wall_time_s:.3f}")
    path.write_text("\n".join(lines) + "\n")


def read_summary(path: Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


def run_experiment(config: ExperimentConfig) -> RunRecord:
    """Build the model, run WISH once per master seed, persist rows and summary."""
    start = time.perf_counter()
    record = RunRecord(config, config.digest())
    if config.repetitions <= 0:
        warnings.warn("zero repetitions requested; nothing to run", stacklevel=2)
        _persist(record)
        return record
    model = config.build_model()
    try:
        record.exact_log_z = exact_log_partition(model)
    except EnumerationCapError:
        log.warning("exact: unavailable (model beyond oracle limits)")
    for rep in range(config.repetitions):
        seed = config.seed + rep
        t0 = time.perf_counter()
        est = wish_run(model, config.wish_config(seed))
        for q in est.records:
            r = q.result
            record.rows.append(QueryRow(q.level, q.trial, seed, r.lower, r.upper, r.status, r.nodes, q.runtime_ms))
        record.summaries.append(
            RunSummary(seed, est.log_estimate, est.guarantee.value, est.medians, est.T, time.perf_counter() - t0)
        )
    record.wall_time_s = time.perf_counter() - start
    _persist(record)
    return record


def _persist(record: RunRecord) -> None:
    if not record.config.out:
        return
    out = Path(record.config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(record.config.to_text())
    write_query_csv(out / "queries.csv", record.rows)
    write_summary(out / "summary.txt", record)


# -- anytime traces and sparsification sweeps --------------------------------


def emit_anytime_trace(
    model: FactorGraph,
    system: ParitySystem,
    budget: Budget,
    path: str | Path | None = None,
    encoding: str = "auto",
) -> list[tuple[float, float, float]]:
    """Branch and bound with every bound improvement logged.

    Returns ``(elapsed_ms, upper, lower)`` rows; ``path`` receives the
    two-column plot data ``elapsed_ms upper``.
    """
    result = branch_and_bound(build_ilp(model, system, encoding), budget)
    trace = list(result.trace)
    if path is not None:
        with open(path, "w") as fh:
            fh.write("# elapsed_ms upper\n")
            for elapsed, upper, _ in trace:
                fh.write(f"{elapsed:.3f} {_fmt(upper)}\n")
    return trace


def read_trace(path: str | Path) -> list[tuple[float, float]]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        a, b = line.split()
        rows.append((float(a), float(b)))
    return rows


@dataclass
class SweepRow:
    m: int
    preprocessor: str
    runs: int
    feasible_rate: float
    median_lower: float
    median_upper: float
    mean_norm1: float


def preprocess_system(system: ParitySystem, preprocessor: str, depth: int = 4) -> ParitySystem:
    if preprocessor == "none":
        return system
    reduced = rref(system)
    if preprocessor == "rref":
        return reduced
    if preprocessor == "rref+greedy":
        return greedy_sparsify(reduced, depth)
    raise ValueError(f"unknown preprocessor {preprocessor!r}")


def sparsification_sweep(
    model: FactorGraph,
    m_range: Sequence[int],
    budget: Budget,
    repetitions: int = 3,
    seed: int = 0,
    preprocessors: Sequence[str] = ("none", "rref", "rref+greedy"),
    incumbent_rounding: str = "round",
    path: str | Path | None = None,
) -> list[SweepRow]:
    """Bounds with and without sparsification over Toeplitz systems of growing size.

    The same sampled system (label ``(m, rep)``) is fed to every
    preprocessor.  ``incumbent_rounding="round"`` counts only integer points
    the search reaches on its own, without projection.
    """
    table = []
    for m in m_range:
        systems = [sample_toeplitz(model.n, m, SeededRng(seed, (m, rep))) for rep in range(repetitions)]
        for pre in preprocessors:
            lowers, uppers, norms = [], [], []
            for system in systems:
                reduced = preprocess_system(system, pre)
                norms.append(reduced.norm1())
                res = branch_and_bound(build_ilp(model, reduced), budget, incumbent_rounding=incumbent_rounding)
                lowers.append(res.lower)
                uppers.append(res.upper)
            feasible = sum(1 for v in lowers if v > -math.inf)
            table.append(
                SweepRow(m, pre, len(systems), feasible / max(len(systems), 1), float(np.median(lowers)),
                         float(np.median(uppers)), float(np.mean(norms)))
            )
            log.info("sweep m=%d %s: feasible %d/%d", m, pre, feasible, len(systems))
    if path is not None:
        write_sweep(path, table)
    return table


def write_sweep(path: str | Path, table: Sequence[SweepRow]) -> None:
    with open(path, "w") as fh:
        fh.write("# m preprocessor runs feasible_rate median_lower median_upper mean_norm1\n")
        for r in table:
            fh.write(f"{r.m} {r.preprocessor} {r.runs} {r.feasible_rate!r} {_fmt(r.median_lower)} "
                     f"{_fmt(r.median_upper)} {r.mean_norm1!r}\n")


def read_sweep(path: str | Path) -> list[SweepRow]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        m, pre, runs, rate, lo, up, norm = line.split()
        out.append(SweepRow(int(m), pre, int(runs), float(rate), float(lo), float(up), float(norm)))
    return out


def summary_as_dict(record: RunRecord) -> dict:
    return {
        "config_hash": record.config_hash,
        "exact_log_z": record.exact_log_z,
        "runs": [asdict(s) for s in record.summaries],
    }


# -- lower/upper sandwich from one set of queries -----------------------------


@dataclass
class Sandwich:
    seed: int
    T: int
    lower_estimate: float
    upper_estimate: float
    lower_medians: list[float]
    upper_medians: list[float]
    closed_fraction: float
    wall_time_s: float


def run_sandwich(model: FactorGraph, config: WishConfig) -> Sandwich:
    """Lower- and upper-mode WISH estimates from a single branch-and-bound run per query.

    Each query's incumbent value feeds the lower estimate and its final
    relaxation bound feeds the upper one, so the two share sampled systems.
    """
    start = time.perf_counter()
    cfg = replace(config, mode=Mode.LOWER, solver="bnb")
    est = wish_run(model, cfg)
    by_level: dict[int, list[float]] = {}
    for q in est.records:
        by_level.setdefault(q.level, []).append(q.result.upper)
    upper_medians = [median_aggregate(by_level[i]) for i in range(model.n + 1)]
    closed = sum(q.result.closed for q in est.records) / len(est.records)
    return Sandwich(cfg.seed, est.T, est.log_estimate, assemble_estimate(upper_medians), est.medians, upper_medians,
                    closed, time.perf_counter() - start)
