"""Command-line entry point: ``agids <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 path limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from agids.errors import AgidsError, DataError, UsageError
from agids.flows import Dataset, load_flows, split, write_flows
from agids.graph import DEFAULT_MAX_PATHS

log = logging.getLogger("agids")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LIMIT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class _Data:
    inventory: object
    rules: list
    flows: Dataset


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(args, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _load_inputs(args, *, need_flows=True, need_rules=True):
    from agids.threat import load_inventory, load_rules

    _require(args, "inventory", *(["flows"] if need_flows else []), *(["rules"] if need_rules else []))
    inv = load_inventory(args.inventory)
    rules = load_rules(args.rules, inv) if args.rules else []
    flows = load_flows(args.flows)[0] if args.flows else None
    return inv, rules, flows


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _build_ag(args, inv, rules, flows):
    from agids.experiments import build_variant
    from agids.graph import AttackGraph, generate_from_alerts, inject_noise
    from agids.threat import match_rules

    if flows is not None:
        et = generate_from_alerts(inv, match_rules(rules, flows))
    elif args.variant == "scrape":
        et = AttackGraph(tuple(inv.hosts), (), "ET")
    else:
        raise UsageError(f"variant {args.variant!r} needs --flows and --rules")
    return inject_noise(build_variant(args.variant, inv, et, args.seed, 0.5), args.p, args.seed)


def cmd_ingest(args) -> int:
    _require(args, "flows")
    ds, report = load_flows(args.flows)
    print(report.to_json())
    if args.out:
        write_flows(ds, _out_dir(args) / "flows.csv")
    return EXIT_OK


def cmd_gen_ag(args) -> int:
    import time

    from agids.graph import AgStats, default_endpoints, enumerate_paths, save_graph

    inv, rules, flows = _load_inputs(args, need_flows=args.variant != "scrape", need_rules=args.variant != "scrape")
    t0 = time.perf_counter()
    ag = _build_ag(args, inv, rules, flows)
    sources, targets = default_endpoints(inv)
    paths = enumerate_paths(ag, sources, targets, args.l_max, max_paths=args.max_paths)
    stats = AgStats.from_paths(paths, time.perf_counter() - t0)
    out = _out_dir(args)
    save_graph(ag, out / "ag.json")
    (out / "ag.dot").write_text(ag.to_dot(), encoding="utf-8")
    _write_json(out / "ag_stats.json", {"variant": ag.variant_tag, "edges": len(ag.edges), **stats.to_dict()})
    print(f"{ag.variant_tag}: {len(ag.nodes)} nodes, {len(ag.edges)} edges, {stats.path_count} paths")
    return EXIT_OK


def _selection(train: Dataset, k: int):
    from agids.ids import anova_f, select_features

    return select_features(anova_f(train.features, train.labels), k)


def cmd_train(args) -> int:
    from agids.ids import TreeHyperparams, evaluate
    from agids.integration import train_baseline

    _require(args, "flows")
    ds, _ = load_flows(args.flows)
    train, test = split(ds, args.train_fraction, args.seed)
    hp = TreeHyperparams(max_depth=args.max_depth)
    det = train_baseline(train, _selection(train, args.k), hp, args.seed)
    metrics = evaluate(det.predict(test), test.labels)
    out = _out_dir(args)
    _write_json(out / "model.json", det.to_dict())
    _write_json(out / "metrics.json", metrics.to_dict())
    print(f"accuracy={metrics.accuracy:.4f} f1_macro={metrics.f1_macro:.4f} fpr={metrics.fpr:.4f}")
    return EXIT_OK


def _couple(args, mode: str) -> int:
    from agids.experiments import build_variant
    from agids.graph import generate_from_alerts, inject_noise
    from agids.ids import TreeHyperparams
    from agids.integration import Detector, gain, refine_predictions, train_baseline, train_ids_ag
    from agids.threat import match_rules

    inv, rules, flows = _load_inputs(args)
    train, test = split(flows, args.train_fraction, args.seed)
    et = generate_from_alerts(inv, match_rules(rules, train))
    ag = inject_noise(build_variant(args.variant, inv, et, args.seed, 0.5), args.p, args.seed)
    hp = TreeHyperparams(max_depth=args.max_depth)
    if getattr(args, "model", None):
        baseline = Detector.from_dict(json.loads(Path(args.model).read_text(encoding="utf-8")))
    else:
        baseline = train_baseline(train, _selection(train, args.k), hp, args.seed)
    out = _out_dir(args)
    if mode == "ids-ag":
        refined = train_ids_ag(train, ag, baseline.selection, hp, args.seed)
        m_base, m_new, d = gain(baseline, refined, test)
        _write_json(out / "model_ag.json", refined.to_dict())
    else:
        m_base, m_new, d = gain(baseline, None, test, ag)
        _, report = refine_predictions(baseline.predict(test), test, ag)
        (out / "refinement.json").write_text(report.to_json() + "\n", encoding="utf-8")
    _write_json(out / "gain.json", {"baseline": m_base.to_dict(), "refined": m_new.to_dict(), "delta": d.to_dict()})
    print(f"d_accuracy={d.d_accuracy:+.4f} d_f1={d.d_f1:+.4f} d_fpr={d.d_fpr:+.4f}")
    return EXIT_OK


def cmd_integrate(args) -> int:
    return _couple(args, args.mode or "ids-ag")


def cmd_refine(args) -> int:
    return _couple(args, "ids-to-ag")


def cmd_lifecycle(args) -> int:
    from agids.lifecycle import LifecycleConfig, init_state, run, save_checkpoint, write_history_csv

    inv, rules, flows = _load_inputs(args)
    if args.batches < 1:
        raise UsageError("--batches must be >= 1")
    config = LifecycleConfig(l_max=args.l_max, noise_p=args.p)
    if args.config:
        config = LifecycleConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    chunks = np.array_split(np.arange(len(flows)), args.batches + 1)
    parts = [flows.take(c) for c in chunks]
    state = run(init_state(parts[0], inv, config, args.seed), parts[1:], rules, inv, config)
    out = _out_dir(args)
    write_history_csv(state.history, out / "history.csv")
    save_checkpoint(state, out / "checkpoint.json")
    for h in state.history:
        print(f"iteration {h.iteration}: alerts={h.alerts} confirmed={h.confirmed_vulns} paths={h.path_count} "
              f"f1={h.f1:.4f} d_f1={h.d_f1:+.4f}")  # fmt: skip
    return EXIT_OK


def load_experiment_config(path: str | Path, args=None):
    """Parse an experiment config into (specs, data).

    The file holds either one ExperimentSpec object or ``{"experiments": [...]}``
    plus a data source: ``"corpus": {"seed", "n_flows"}`` or ``"data"`` with
    flows/inventory/rules paths relative to the config file.
    """
    from agids.corpus import desk_corpus
    from agids.experiments import ExperimentSpec
    from agids.threat import load_inventory, load_rules

    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    raw_specs = doc.get("experiments")
    if raw_specs is None:
        raw_specs = [{k: v for k, v in doc.items() if k not in ("corpus", "data")}]
    specs = [ExperimentSpec.from_dict(s) for s in raw_specs]

    if args is not None and args.flows and args.inventory and args.rules:
        inv = load_inventory(args.inventory)
        return specs, _Data(inv, load_rules(args.rules, inv), load_flows(args.flows)[0])
    if "data" in doc:
        base = path.parent
        d = doc["data"]
        inv = load_inventory(base / d["inventory"])
        return specs, _Data(inv, load_rules(base / d["rules"], inv), load_flows(base / d["flows"])[0])
    corpus = doc.get("corpus", {})
    return specs, desk_corpus(int(corpus.get("seed", 0)), int(corpus.get("n_flows", 20_000)))


def cmd_experiment(args) -> int:
    from agids.experiments import render_report, run_experiments

    _require(args, "config")
    specs, data = load_experiment_config(args.config, args)
    results = run_experiments(specs, data)
    files = render_report(results, _out_dir(args))
    errors = sum(1 for r in results.rows if r.error)
    for f in files:
        print(f)
    if errors:
        log.warning("%d cell(s) failed; see error rows in report.csv", errors)
    return EXIT_OK


def cmd_report(args) -> int:
    from agids.experiments import read_report_csv, render_report

    src = Path(args.report) if args.report else Path(args.out) / "report.csv"
    rows = read_report_csv(src)
    render_report(rows, _out_dir(args))
    print(f"rendered {len({r.experiment for r in rows})} chart(s) into {args.out}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    from agids.corpus import desk_corpus

    paths = desk_corpus(args.seed, args.n_flows).write(_out_dir(args))
    for p in paths.values():
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="agids", description="Attack-graph / IDS integration toolkit.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, data=True, out=True):
        if data:
            p.add_argument("--flows", help="labeled flow CSV")
            p.add_argument("--inventory", help="network inventory JSON")
            p.add_argument("--rules", help="signature rules (JSON or .rules)")
        p.add_argument("--seed", type=int, default=0)
        if out:
            p.add_argument("--out", default="out", help="output directory (default: out)")

    def pipeline(p):
        p.add_argument("--l-max", type=int, default=4, help="maximum attack path length")
        p.add_argument("--p", type=float, default=0.0, help="noise edge probability")
        p.add_argument(
            "--variant", default="et", choices=["scrape", "et", "sub-et", "scrape+et", "scrape+sub-et"]
        )
        p.add_argument("--train-fraction", type=float, default=0.6)
        p.add_argument("--k", type=int, default=20, help="features kept by ANOVA-F selection")
        p.add_argument("--max-depth", type=int, default=20)

    p = sub.add_parser("ingest", help="load and sanitize a flow CSV")
    p.add_argument("--flows")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gen-ag", help="generate an attack graph")
    common(p)
    pipeline(p)
    p.add_argument("--max-paths", type=int, default=DEFAULT_MAX_PATHS, help="fail (exit 3) above this many paths")
    p.set_defaults(func=cmd_gen_ag)

    p = sub.add_parser("train", help="train a baseline decision-tree IDS")
    common(p, data=False)
    p.add_argument("--flows")
    pipeline(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("integrate", help="compare baseline with an AG-coupled IDS")
    common(p)
    pipeline(p)
    p.add_argument("--mode", choices=["ids-ag", "ids-to-ag"])
    p.add_argument("--model", help="baseline detector JSON from 'train'")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("refine", help="flip unsupported attack predictions to benign")
    common(p)
    pipeline(p)
    p.add_argument("--model", help="baseline detector JSON from 'train'")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("lifecycle", help="run the iterative AG/IDS loop")
    common(p)
    p.add_argument("--l-max", type=int, default=4)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--batches", type=int, default=3)
    p.add_argument("--config", help="LifecycleConfig JSON")
    p.set_defaults(func=cmd_lifecycle)

    p = sub.add_parser("experiment", help="run sweeps from a config file")
    common(p)
    p.add_argument("--config", help="experiment config JSON")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="re-render charts from report.csv")
    p.add_argument("--report", help="report.csv (default: <out>/report.csv)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("corpus", help="write the synthetic desk corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-flows", type=int, default=20_000)
    p.add_argument("--out", default="corpus")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except AgidsError as exc:
        print(f"agids: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, KeyError) as exc:
        print(f"agids: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"agids: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
