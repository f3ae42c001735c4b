"""Iterative AG/IDS feedback loop.

Each step lets the currently sampled IDS flag traffic, fires signature rules
on what it flags, confirms the alerted vulnerabilities, grows a new
alert-derived attack graph, trains an AG-integrated IDS on it and finally
scores that IDS (with refinement) on a held-out slice of the batch.  Pools
only ever grow; a step builds a fresh state and never mutates its input.
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from agids.errors import EmptyPool, UsageError
from agids.flows import ClassLabel, Dataset, concat, split
from agids.graph import DEFAULT_L_MAX, AgStats, AttackGraph, EdgeProvenance, enumerate_paths, generate_from_alerts, inject_noise
from agids.ids.anova import Direction, anova_f, select_features
from agids.ids.metrics import Metrics, delta, evaluate
from agids.ids.tree import TreeHyperparams
from agids.integration import Detector, refine_predictions, train_baseline, train_ids_ag
from agids.threat import Alert, NetworkInventory, SignatureRule, VulnDatabase, confirm_vulns, match_rules

log = logging.getLogger(__name__)

VALIDATION_FRACTION = 0.2


class IdsKind(str, Enum):
    BASELINE = "Baseline"
    AG_INTEGRATED = "AgIntegrated"


class IdsStrategy(str, Enum):
    LATEST = "Latest"
    BEST_VAL_F1 = "BestValF1"


class AgStrategy(str, Enum):
    LATEST = "Latest"
    MOST_SPECIFIC = "MostSpecific"


@dataclass(frozen=True)
class AgPoolEntry:
    ag: AttackGraph
    stats: AgStats
    created_iteration: int


@dataclass(frozen=True)
class IdsPoolEntry:
    detector: Detector
    val_metrics: Metrics
    created_iteration: int
    kind: IdsKind

    @property
    def model(self):
        return self.detector.model

    @property
    def selection(self):
        return self.detector.selection


@dataclass(frozen=True)
class AgPool:
    entries: tuple[AgPoolEntry, ...] = ()

    def add(self, entry: AgPoolEntry) -> AgPool:
        return AgPool(self.entries + (entry,))

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class IdsPool:
    entries: tuple[IdsPoolEntry, ...] = ()

    def add(self, entry: IdsPoolEntry) -> IdsPool:
        return IdsPool(self.entries + (entry,))

    def __len__(self) -> int:
        return len(self.entries)


def _latest(entries):
    # max() keeps the first maximum, so scan in reverse for "last wins"
    return max(reversed(entries), key=lambda e: e.created_iteration)


def sample_ids(pool: IdsPool, strategy: IdsStrategy | str = IdsStrategy.LATEST) -> IdsPoolEntry:
    strategy = IdsStrategy(strategy)
    if not pool.entries:
        raise EmptyPool("IDS pool is empty")
    if strategy is IdsStrategy.LATEST:
        return _latest(pool.entries)
    best = max(e.val_metrics.f1_macro for e in pool.entries)
    return _latest([e for e in pool.entries if e.val_metrics.f1_macro == best])


def sample_ag(pool: AgPool, strategy: AgStrategy | str = AgStrategy.LATEST) -> AgPoolEntry:
    """Latest entry, or the non-empty graph with the fewest real edges.

    MostSpecific falls back to Latest when every pooled graph is empty.
    """
    strategy = AgStrategy(strategy)
    if not pool.entries:
        raise EmptyPool("AG pool is empty")
    if strategy is AgStrategy.LATEST:
        return _latest(pool.entries)

    def real_edges(e: AgPoolEntry) -> int:
        return e.ag.count(EdgeProvenance.ALERT_DERIVED) + e.ag.count(EdgeProvenance.SCRAPED)

    candidates = [e for e in pool.entries if e.ag.edges]
    if not candidates:
        return _latest(pool.entries)
    fewest = min(real_edges(e) for e in candidates)
    return _latest([e for e in candidates if real_edges(e) == fewest])


def _present(x) -> bool:
    if x is None:
        return False
    try:
        return len(x) > 0
    except TypeError:
        return True


def and_gate(*inputs) -> bool:
    """True when every input is available (not None and non-empty)."""
    return all(_present(x) for x in inputs)


def or_gate(*inputs) -> bool:
    """True when at least one input is available."""
    return any(_present(x) for x in inputs)


@dataclass(frozen=True)
class LifecycleConfig:
    l_max: int = DEFAULT_L_MAX
    noise_p: float = 0.0
    k: int = 20
    direction: Direction = Direction.BEST_K
    hyperparams: TreeHyperparams = field(default_factory=TreeHyperparams)
    ids_strategy: IdsStrategy = IdsStrategy.LATEST
    ag_strategy: AgStrategy = AgStrategy.LATEST
    validation_fraction: float = VALIDATION_FRACTION

    @classmethod
    def from_dict(cls, doc: dict) -> LifecycleConfig:
        doc = dict(doc)
        if "hyperparams" in doc:
            doc["hyperparams"] = TreeHyperparams.from_dict(doc["hyperparams"])
        for key, enum in (("direction", Direction), ("ids_strategy", IdsStrategy), ("ag_strategy", AgStrategy)):
            if key in doc:
                doc[key] = enum(doc[key])
        return cls(**doc)


@dataclass(frozen=True)
class HistoryRecord:
    iteration: int
    alerts: int
    confirmed_vulns: int
    alert_edges: int
    path_count: int
    accuracy: float
    f1: float
    fpr: float
    d_accuracy: float
    d_f1: float
    d_fpr: float
    flipped: int


HISTORY_COLUMNS = tuple(HistoryRecord.__dataclass_fields__)


@dataclass(frozen=True, eq=False)
class LifecycleState:
    ag_pool: AgPool
    ids_pool: IdsPool
    vuln_db: VulnDatabase
    iteration: int
    seed: int
    history: tuple[HistoryRecord, ...] = ()
    alerts: tuple[Alert, ...] = ()
    training: Dataset | None = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "seed": self.seed,
            "vuln_db": self.vuln_db.to_dict(),
            "ag_pool": [
                {"created_iteration": e.created_iteration, "stats": e.stats.to_dict(), "ag": e.ag.to_dict()}
                for e in self.ag_pool.entries
            ],
            "ids_pool": [
                {
                    "created_iteration": e.created_iteration,
                    "kind": e.kind.value,
                    "val_metrics": e.val_metrics.to_dict(),
                    "detector": e.detector.to_dict(),
                }
                for e in self.ids_pool.entries
            ],
            "history": [asdict(h) for h in self.history],
        }


def _baseline(pool: IdsPool) -> IdsPoolEntry:
    for e in pool.entries:
        if e.kind is IdsKind.BASELINE:
            return e
    raise EmptyPool("IDS pool holds no baseline model")


def _step_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([seed, iteration]).generate_state(1)[0])


def _fit_selection(train: Dataset, config: LifecycleConfig):
    return select_features(anova_f(train.features, train.labels), config.k, config.direction)


def init_state(
    initial: Dataset, inventory: NetworkInventory, config: LifecycleConfig | None = None, seed: int = 0
) -> LifecycleState:
    """Seed the IDS pool with a baseline tree trained on ``initial``."""
    config = config or LifecycleConfig()
    train, val = split(initial, 1.0 - config.validation_fraction, _step_seed(seed, 0))
    selection = _fit_selection(train, config)
    detector = train_baseline(train, selection, config.hyperparams, seed)
    metrics = evaluate(detector.predict(val), val.labels)
    entry = IdsPoolEntry(detector, metrics, 0, IdsKind.BASELINE)
    return LifecycleState(
        ag_pool=AgPool(),
        ids_pool=IdsPool((entry,)),
        vuln_db=VulnDatabase.from_inventory(inventory),
        iteration=0,
        seed=seed,
        training=train,
    )


def step(
    state: LifecycleState,
    new_flows: Dataset,
    rules: Sequence[SignatureRule],
    inventory: NetworkInventory,
    config: LifecycleConfig | None = None,
) -> LifecycleState:
    config = config or LifecycleConfig()
    it = state.iteration + 1
    seed = _step_seed(state.seed, it)
    batch, val = split(new_flows, 1.0 - config.validation_fraction, seed)

    # (1) the sampled IDS flags traffic; rules fire on flagged flows (AND port)
    current = sample_ids(state.ids_pool, config.ids_strategy)
    new_alerts: list[Alert] = []
    if and_gate(batch, rules):
        flagged = np.flatnonzero(current.detector.predict(batch) != ClassLabel.BENIGN)
        if flagged.size:
            new_alerts = match_rules(rules, batch.take(flagged))

    # (2) vulnerability database
    vuln_db = confirm_vulns(state.vuln_db, new_alerts, it)

    # (3) alert-derived AG over every alert seen so far whose vuln is confirmed (OR port)
    all_alerts = state.alerts + tuple(new_alerts)
    usable = [a for a in all_alerts if a.vuln_id in vuln_db.confirmed] if or_gate(new_alerts, state.alerts) else []
    ag = generate_from_alerts(inventory, usable)
    if config.noise_p > 0:
        ag = inject_noise(ag, config.noise_p, seed)
    paths = enumerate_paths(ag, inventory.external_hosts, inventory.internal_hosts, config.l_max)
    ag_pool = state.ag_pool.add(AgPoolEntry(ag, AgStats.from_paths(paths, 0.0), it))

    # (4) AG-integrated IDS on the accumulated training data
    training = batch if state.training is None else concat([state.training, batch])
    sampled_ag = sample_ag(ag_pool, config.ag_strategy).ag
    selection = _fit_selection(training, config)
    detector = train_ids_ag(training, sampled_ag, selection, config.hyperparams, seed)

    # (5) refinement on the held-out slice, compared with the seeded baseline so
    # deltas track cumulative progress rather than step-to-step jitter
    refined, report = refine_predictions(detector.predict(val), val, sampled_ag)
    m_new = evaluate(refined, val.labels)
    m_base = evaluate(_baseline(state.ids_pool).detector.predict(val), val.labels)
    d = delta(m_base, m_new)
    ids_pool = state.ids_pool.add(IdsPoolEntry(detector, m_new, it, IdsKind.AG_INTEGRATED))

    record = HistoryRecord(
        iteration=it,
        alerts=len(new_alerts),
        confirmed_vulns=len(vuln_db.confirmed),
        alert_edges=ag.count(EdgeProvenance.ALERT_DERIVED),
        path_count=len(paths),
        accuracy=m_new.accuracy,
        f1=m_new.f1_macro,
        fpr=m_new.fpr,
        d_accuracy=d.d_accuracy,
        d_f1=d.d_f1,
        d_fpr=d.d_fpr,
        flipped=report.flipped_count,
    )
    log.info("iteration %d: %d alerts, %d confirmed vulns, d_f1 %+.4f", it, record.alerts, record.confirmed_vulns, d.d_f1)
    return replace(
        state,
        ag_pool=ag_pool,
        ids_pool=ids_pool,
        vuln_db=vuln_db,
        iteration=it,
        history=state.history + (record,),
        alerts=all_alerts,
        training=training,
    )


def run(
    initial: LifecycleState,
    batches: Sequence[Dataset],
    rules: Sequence[SignatureRule],
    inventory: NetworkInventory,
    config: LifecycleConfig | None = None,
) -> LifecycleState:
    if not batches:
        raise UsageError("run needs at least one batch")
    state = initial
    for batch in batches:
        state = step(state, batch, rules, inventory, config)
    return state


def save_checkpoint(state: LifecycleState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state.to_dict(), indent=1) + "\n", encoding="utf-8")


def write_history_csv(history: Sequence[HistoryRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for h in history:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in asdict(h).values()])
