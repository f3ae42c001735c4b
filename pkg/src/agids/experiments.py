"""Sweep experiments over the AG/IDS couplings, with CSV and SVG reports."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import zlib
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Protocol as TypingProtocol

import numpy as np

from agids.errors import AgidsError, InvalidFraction, UsageError
from agids.flows import ClassLabel, Dataset, split
from agids.graph import (
    DEFAULT_L_MAX,
    AgStats,
    AttackGraph,
    combine,
    default_endpoints,
    enumerate_paths,
    generate_classical,
    generate_from_alerts,
    inject_noise,
    subset,
    victim_risk,
)
from agids.ids.anova import Direction, anova_f, select_features
from agids.ids.tree import TreeHyperparams
from agids.integration import gain, train_baseline, train_ids_ag
from agids.svg import grouped_bars
from agids.threat import NetworkInventory, SignatureRule, limit_alerts, match_rules

log = logging.getLogger(__name__)

METRICS = ("accuracy", "f1_macro", "fpr")
VARIANTS = ("scrape", "et", "sub-et", "scrape+et", "scrape+sub-et")
DEFAULT_SUB_FRACTION = 0.5

DEFAULT_GRIDS: dict[str, list] = {
    "NoiseP": [0.0, 0.05, 0.1, 0.2],
    "AgVariant": list(VARIANTS),
    "TrainFraction": [0.2, 0.4, 0.6, 0.8],
    "WorstK": [10, 20, 40, 60, 80],
    "BestK": [10, 20, 40, 60, 80],
    "TreeHyperparams": [
        {"max_depth": d, "min_samples_split": s, "min_samples_leaf": leaf}
        for d in (5, 10, 20)
        for s in (2, 10)
        for leaf in (1, 5)
    ],
    "AgGenCompare": [1.0],
    "VictimRisk": [0.5, 1.0],
}


class Sweep(str, Enum):
    NOISE_P = "NoiseP"
    AG_VARIANT = "AgVariant"
    TRAIN_FRACTION = "TrainFraction"
    WORST_K = "WorstK"
    BEST_K = "BestK"
    TREE_HYPERPARAMS = "TreeHyperparams"
    AG_GEN_COMPARE = "AgGenCompare"
    VICTIM_RISK = "VictimRisk"


class Mode(str, Enum):
    IDS_AG = "IdsAg"
    IDS_TO_AG = "IdsToAg"

    @classmethod
    def parse(cls, text: str | Mode) -> Mode:
        if isinstance(text, Mode):
            return text
        aliases = {"ids-ag": cls.IDS_AG, "ids-to-ag": cls.IDS_TO_AG}
        return aliases.get(str(text).lower()) or cls(text)


def format_value(value: Any) -> str:
    """Stable text form of a sweep point, used in CSVs and chart labels."""
    if isinstance(value, dict):
        return ",".join(f"{k}={value[k]}" for k in sorted(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cell_seed(seed_base: int, value: Any, repeat: int) -> int:
    key = json.dumps([format_value(value), repeat], sort_keys=True).encode()
    return seed_base + zlib.crc32(key) % 1_000_003


@dataclass(frozen=True)
class ExperimentSpec:
    """One named sweep.  Fields after ``mode`` are the fixed pipeline settings."""

    name: str
    sweep: Sweep
    values: tuple = ()
    repeats: int = 1
    seed_base: int = 0
    mode: Mode = Mode.IDS_AG
    train_fraction: float = 0.6
    k: int = 20
    variant: str = "et"
    p: float = 0.0
    hyperparams: dict = field(default_factory=dict)
    l_max: int = DEFAULT_L_MAX
    sub_fraction: float = DEFAULT_SUB_FRACTION

    def __post_init__(self):
        object.__setattr__(self, "sweep", Sweep(self.sweep))
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        values = tuple(self.values) if self.values else tuple(DEFAULT_GRIDS[self.sweep.value])
        object.__setattr__(self, "values", values)
        if self.repeats < 1:
            raise UsageError("repeats must be >= 1")
        if self.variant not in VARIANTS:
            raise UsageError(f"unknown AG variant {self.variant!r}; expected one of {VARIANTS}")
        TreeHyperparams.from_dict(self.hyperparams)
        for v in values:
            self._check_value(v)

    def _check_value(self, v) -> None:
        s = self.sweep
        if s is Sweep.NOISE_P and not 0.0 <= float(v) <= 1.0:
            raise InvalidFraction(v, "[0, 1]")
        if s is Sweep.TRAIN_FRACTION and not 0.0 < float(v) < 1.0:
            raise InvalidFraction(v)
        if s in (Sweep.AG_GEN_COMPARE, Sweep.VICTIM_RISK) and not 0.0 < float(v) <= 1.0:
            raise InvalidFraction(v, "(0, 1]")
        if s in (Sweep.WORST_K, Sweep.BEST_K) and (int(v) != v or int(v) < 1):
            raise UsageError(f"K must be a positive integer, got {v!r}")
        if s is Sweep.AG_VARIANT and v not in VARIANTS:
            raise UsageError(f"unknown AG variant {v!r}")
        if s is Sweep.TREE_HYPERPARAMS:
            if not isinstance(v, dict):
                raise UsageError("TreeHyperparams values must be objects")
            TreeHyperparams.from_dict({**self.hyperparams, **v})

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentSpec:
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class ExperimentRow:
    experiment: str
    sweep_value: str
    repeat: int
    metric_name: str
    baseline: float | None
    refined: float | None
    delta: float | None
    error: str = ""


REPORT_COLUMNS = tuple(ExperimentRow.__dataclass_fields__)


@dataclass
class ExperimentResults:
    rows: list[ExperimentRow] = field(default_factory=list)
    # (experiment, sweep_value, repeat, classical_paths, alert_paths, classical_seconds, alert_seconds)
    timings: list[tuple] = field(default_factory=list)
    # (experiment, sweep_value, repeat, victim_ip, variant, avg_risk)
    risks: list[tuple] = field(default_factory=list)

    def extend(self, other: ExperimentResults) -> None:
        self.rows.extend(other.rows)
        self.timings.extend(other.timings)
        self.risks.extend(other.risks)


class ExperimentData(TypingProtocol):
    inventory: NetworkInventory
    rules: Sequence[SignatureRule]
    flows: Dataset


def build_variant(variant: str, inv: NetworkInventory, et: AttackGraph, seed: int, sub_fraction: float) -> AttackGraph:
    """Scrape, ET, Sub(ET) and the two Scrape unions; ET edges win shared triples."""
    if variant == "scrape":
        return generate_classical(inv)
    if variant == "et":
        return et
    sub = subset(et, sub_fraction, seed)
    if variant == "sub-et":
        return sub
    if variant == "scrape+et":
        return combine(et, generate_classical(inv), "Scrape+ET")
    if variant == "scrape+sub-et":
        return combine(sub, generate_classical(inv), "Scrape+Sub(ET)")
    raise UsageError(f"unknown AG variant {variant!r}")


def _metric_rows(spec: ExperimentSpec, value, repeat: int, base, refined) -> list[ExperimentRow]:
    rows = []
    for m in METRICS:
        b, r = float(getattr(base, m)), float(getattr(refined, m))
        rows.append(ExperimentRow(spec.name, format_value(value), repeat, m, b, r, r - b))
    return rows


def _detection_cell(spec: ExperimentSpec, value, repeat: int, data: ExperimentData, seed: int) -> list[ExperimentRow]:
    s = spec.sweep
    fraction = float(value) if s is Sweep.TRAIN_FRACTION else spec.train_fraction
    p = float(value) if s is Sweep.NOISE_P else spec.p
    variant = value if s is Sweep.AG_VARIANT else spec.variant
    k = int(value) if s in (Sweep.WORST_K, Sweep.BEST_K) else spec.k
    direction = Direction.WORST_K if s is Sweep.WORST_K else Direction.BEST_K
    hp = TreeHyperparams.from_dict({**spec.hyperparams, **(value if s is Sweep.TREE_HYPERPARAMS else {})})

    if k > data.flows.n_features:
        raise UsageError(f"K={k} exceeds the {data.flows.n_features} available features")
    train, test = split(data.flows, fraction, seed)
    et = generate_from_alerts(data.inventory, match_rules(data.rules, train))
    ag = inject_noise(build_variant(variant, data.inventory, et, seed, spec.sub_fraction), p, seed)
    selection = select_features(anova_f(train.features, train.labels), k, direction)
    baseline = train_baseline(train, selection, hp, seed)
    if spec.mode is Mode.IDS_AG:
        m_base, m_new, _ = gain(baseline, train_ids_ag(train, ag, selection, hp, seed), test)
    else:
        m_base, m_new, _ = gain(baseline, None, test, ag)
    return _metric_rows(spec, value, repeat, m_base, m_new)


def run_ag_gen_compare(
    inv: NetworkInventory,
    rules: Sequence[SignatureRule],
    flows: Dataset,
    l_max: int = DEFAULT_L_MAX,
    *,
    fraction: float = 1.0,
    seed: int = 0,
) -> tuple[AgStats, AgStats]:
    """Time classical vs alert-derived generation, each including path enumeration.

    The alert-derived side also includes matching the rules against ``flows``.
    """
    sources, targets = default_endpoints(inv)
    t0 = time.perf_counter()
    classical = generate_classical(inv)
    c_paths = enumerate_paths(classical, sources, targets, l_max)
    # the alert side pays for rule matching too
    t2 = t1 = time.perf_counter()
    alerts = match_rules(rules, flows)
    if fraction < 1.0:
        alerts = limit_alerts(alerts, fraction, seed)
    et = generate_from_alerts(inv, alerts)
    e_paths = enumerate_paths(et, sources, targets, l_max)
    t3 = time.perf_counter()
    return AgStats.from_paths(c_paths, t1 - t0), AgStats.from_paths(e_paths, t3 - t2)


def victims_of(inv: NetworkInventory, flows: Dataset, alerts=()) -> tuple[str, ...]:
    """Internal hosts targeted by true attack flows or by alerts."""
    hit = {str(d) for d in flows.dst_ip[flows.labels != ClassLabel.BENIGN]}
    hit |= {a.dst_ip for a in alerts}
    internal = set(inv.internal_hosts)
    return tuple(sorted(hit & internal))


def run_victim_risk(
    inv: NetworkInventory,
    rules: Sequence[SignatureRule],
    flows: Dataset,
    fractions: Sequence[float] = (0.5, 1.0),
    *,
    seed: int = 0,
    l_max: int = DEFAULT_L_MAX,
) -> list[tuple[str, str, float]]:
    """Rows (victim_ip, variant, avg_risk) for Scrape and each alert fraction."""
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise InvalidFraction(f, "(0, 1]")
    sources, _ = default_endpoints(inv)
    alerts = match_rules(rules, flows)
    victims = victims_of(inv, flows, alerts)
    graphs = [("Scrape", generate_classical(inv))]
    for f in fractions:
        label = "AG|IDS full" if f == 1.0 else f"AG|IDS partial({f:g})"
        graphs.append((label, generate_from_alerts(inv, limit_alerts(alerts, f, seed))))
    return [(v, label, victim_risk(g, v, sources, l_max)) for v in victims for label, g in graphs]


def _ag_gen_cell(spec, value, repeat, data, seed, out: ExperimentResults) -> None:
    classical, alert_based = run_ag_gen_compare(
        data.inventory, data.rules, data.flows, spec.l_max, fraction=float(value), seed=seed
    )
    sv = format_value(value)
    for metric in ("path_count", "avg_risk"):
        b, r = float(getattr(classical, metric)), float(getattr(alert_based, metric))
        out.rows.append(ExperimentRow(spec.name, sv, repeat, metric, b, r, r - b))
    out.timings.append(
        (spec.name, sv, repeat, classical.path_count, alert_based.path_count,
         round(classical.generation_seconds, 3), round(alert_based.generation_seconds, 3))
    )  # fmt: skip


def _victim_cell(spec, value, repeat, data, seed, out: ExperimentResults) -> None:
    table = run_victim_risk(data.inventory, data.rules, data.flows, [float(value)], seed=seed, l_max=spec.l_max)
    sv = format_value(value)
    by_variant: dict[str, list[float]] = {}
    for victim, variant, risk in table:
        out.risks.append((spec.name, sv, repeat, victim, variant, risk))
        by_variant.setdefault(variant, []).append(risk)
    scrape = by_variant.pop("Scrape", [])
    (alert_risks,) = by_variant.values()
    b = math.fsum(scrape) / len(scrape) if scrape else 0.0
    r = math.fsum(alert_risks) / len(alert_risks) if alert_risks else 0.0
    out.rows.append(ExperimentRow(spec.name, sv, repeat, "mean_victim_risk", b, r, r - b))


def run_sweep(spec: ExperimentSpec, data: ExperimentData) -> ExperimentResults:
    """Run every (value, repeat) cell; failures become error rows."""
    out = ExperimentResults()
    for value in spec.values:
        for repeat in range(spec.repeats):
            seed = cell_seed(spec.seed_base, value, repeat)
            try:
                if spec.sweep is Sweep.AG_GEN_COMPARE:
                    _ag_gen_cell(spec, value, repeat, data, seed, out)
                elif spec.sweep is Sweep.VICTIM_RISK:
                    _victim_cell(spec, value, repeat, data, seed, out)
                else:
                    out.rows.extend(_detection_cell(spec, value, repeat, data, seed))
            except AgidsError as exc:
                log.warning("%s value=%s repeat=%d failed: %s", spec.name, format_value(value), repeat, exc)
                out.rows.append(
                    ExperimentRow(spec.name, format_value(value), repeat, "error", None, None, None,
                                  f"{type(exc).__name__}: {exc}")
                )  # fmt: skip
    log.info("experiment %s: %d rows", spec.name, len(out.rows))
    return out


def run_experiments(specs: Sequence[ExperimentSpec], data: ExperimentData) -> ExperimentResults:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise UsageError("experiment names must be unique")
    results = ExperimentResults()
    for spec in specs:
        results.extend(run_sweep(spec, data))
    return results


def _cell(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_report_csv(rows: Sequence[ExperimentRow], path: str | Path) -> None:
    _write_csv(Path(path), REPORT_COLUMNS, ([getattr(r, c) for c in REPORT_COLUMNS] for r in rows))


def read_report_csv(path: str | Path) -> list[ExperimentRow]:
    def num(text: str) -> float | None:
        return None if text == "" else float(text)

    with open(path, newline="", encoding="utf-8") as fh:
        return [
            ExperimentRow(
                r["experiment"], r["sweep_value"], int(r["repeat"]), r["metric_name"],
                num(r["baseline"]), num(r["refined"]), num(r["delta"]), r["error"],
            )  # fmt: skip
            for r in csv.DictReader(fh)
        ]


TIMING_COLUMNS = (
    "experiment", "sweep_value", "repeat", "classical_paths", "alert_paths", "classical_seconds", "alert_seconds",
)  # fmt: skip
RISK_COLUMNS = ("experiment", "sweep_value", "repeat", "victim_ip", "variant", "avg_risk")


def _chart(name: str, rows: Sequence[ExperimentRow]) -> str:
    values: list[str] = []
    metrics: list[str] = []
    cells: dict[tuple[str, str], list[float]] = {}
    for r in rows:
        if r.delta is None:
            continue
        if r.sweep_value not in values:
            values.append(r.sweep_value)
        if r.metric_name not in metrics:
            metrics.append(r.metric_name)
        cells.setdefault((r.sweep_value, r.metric_name), []).append(r.delta)
    series = {}
    for m in metrics:
        pts = []
        for v in values:
            ds = np.array(cells.get((v, m), [0.0]))
            pts.append((float(ds.mean()), float(ds.std())))
        series[m] = pts
    return grouped_bars(name, values, series)


def render_report(results: ExperimentResults | Sequence[ExperimentRow], out_dir: str | Path) -> list[Path]:
    """Write report.csv, auxiliary tables and one SVG chart per experiment."""
    if not isinstance(results, ExperimentResults):
        results = ExperimentResults(rows=list(results))
    if not results.rows:
        raise UsageError("nothing to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.csv"]
    write_report_csv(results.rows, written[0])
    if results.timings:
        written.append(out / "ag_generation.csv")
        _write_csv(written[-1], TIMING_COLUMNS, results.timings)
    if results.risks:
        written.append(out / "victim_risk.csv")
        _write_csv(written[-1], RISK_COLUMNS, results.risks)
    by_experiment: dict[str, list[ExperimentRow]] = {}
    for r in results.rows:
        by_experiment.setdefault(r.experiment, []).append(r)
    for name, rows in by_experiment.items():
        path = out / f"{_slug(name)}.svg"
        path.write_text(_chart(name, rows), encoding="utf-8")
        written.append(path)
    return written


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)
