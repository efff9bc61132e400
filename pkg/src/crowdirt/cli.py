"""Batch command-line front end: simulate, fit, consensus, evaluate, cluster.

Subcommands hand artifacts to each other through files in --out-dir; all
randomness flows from --seed, so each stage is reproducible on its own.
Exit codes: 0 success, 1 validation or I/O failure, 2 success with
convergence warnings.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .metrics import ConfusionCounts, MetricsError, write_report_csv
from .model import ModelConfig, ModelError
from .posterior import (
    PosteriorError,
    ability_weights,
    cluster_participants,
    summarize,
    write_groups_csv,
    write_summary_json,
    write_weights_csv,
)
from .records import (
    DataError,
    GoldStandard,
    build_response_matrix,
    derive_occasions,
    parse_classifications,
    split_gold_standard,
    write_classifications,
)
from .sampler import SamplerConfig, SamplerError, run_chains
from .simulate import SimConfig, SimulationError, generate
from .vote import VoteError, aggregate, write_consensus

RHAT_WARN = 1.05
ALL_STRATEGIES = ("raw", "consensus", "experts", "experts_experienced", "weighted")


@dataclass
class RunConfig:
    input: str = ""
    out_dir: str = "."
    seed: int = 0
    gold_fraction: float = 0.33
    chains: int = 4
    warmup: int = 2000
    samples: int = 2000
    thin: int = 1
    strategies: tuple = ALL_STRATEGIES
    include_learning: bool = True
    anchor_mode: str = "hierarchical_zero_mean"
    parallel: bool = False


def _load_run_config(args, extra_keys=frozenset()) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        known = {f.name for f in fields(RunConfig)}
        for key, value in doc.items():
            if key in extra_keys:
                continue
            if key not in known:
                raise DataError(f"unknown config key: {key}")
            if key == "strategies":
                value = tuple(value)
            setattr(config, key, value)
    for name in ("input", "out_dir", "seed", "gold_fraction", "chains", "warmup", "samples", "thin"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "strategies", None):
        config.strategies = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
    for strategy in config.strategies:
        if strategy not in ALL_STRATEGIES:
            raise DataError(f"unknown strategy: {strategy}")
    if not config.strategies:
        raise DataError("strategy list is empty")
    if not 0.0 < config.gold_fraction <= 1.0:
        raise DataError("gold fraction must be in (0, 1]")
    return config


def _read_records(path: str):
    p = Path(path)
    if not p.exists():
        raise DataError(f"input file not found: {path}")
    with open(p, newline="") as fh:
        records, report = parse_classifications(fh)
    return derive_occasions(records), report


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


def cmd_simulate(args) -> int:
    config = _load_run_config(args, extra_keys={f.name for f in fields(SimConfig)})
    sim_kwargs = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        known = {f.name for f in fields(SimConfig)}
        sim_kwargs = {k: v for k, v in doc.items() if k in known}
    sim_kwargs["seed"] = config.seed
    sim = SimConfig(**sim_kwargs)
    records, truth = generate(sim)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "data.csv", "w", newline="") as fh:
        write_classifications(records, fh)
    (out / "truth.json").write_text(truth.to_json() + "\n")
    print(f"wrote {len(records)} records to {out / 'data.csv'}")
    return 0


def cmd_fit(args) -> int:
    config = _load_run_config(args)
    records, report = _read_records(config.input)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    image_ids = {r.image_id for r in records}
    gold_images, eval_images = split_gold_standard(image_ids, config.gold_fraction, config.seed)
    gold = GoldStandard.from_records(records, gold_images)
    if len(gold) == 0:
        raise DataError("no truth labels available on the gold images")
    rm = build_response_matrix(records, gold)

    model_config = ModelConfig(include_learning=config.include_learning, anchor_mode=config.anchor_mode)
    sampler_config = SamplerConfig(
        n_chains=config.chains,
        warmup_iters=config.warmup,
        sampling_iters=config.samples,
        thin=config.thin,
        seed=config.seed,
        parallel=config.parallel,
    )
    draws = run_chains(model_config, rm, sampler_config)
    summaries = summarize(draws)
    by_name = {s.name: s for s in summaries}

    for c, chain in enumerate(draws.chains):
        constrained = draws.constrained_chains()[c]
        with open(out / f"draws_chain{c}.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration"] + draws.constrained_names)
            for row_idx in range(constrained.shape[0]):
                writer.writerow([row_idx] + [repr(v) for v in constrained[row_idx]])

    with open(out / "summary.json", "w") as fh:
        write_summary_json(summaries, fh)
    diagnostics = {
        "rhat": {s.name: (None if math.isnan(s.rhat) else s.rhat) for s in summaries},
        "ess": {s.name: (None if math.isnan(s.ess) else s.ess) for s in summaries},
        "accept_rates": {
            f"chain{c}": dict(zip(draws.names, chain.accept_rates.tolist()))
            for c, chain in enumerate(draws.chains)
        },
    }
    (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=1) + "\n")

    theta_means = {pid: by_name[f"theta[{pid}]"].posterior_mean for pid in rm.participants}
    theta_summaries = {pid: by_name[f"theta[{pid}]"] for pid in rm.participants}
    groups = cluster_participants(theta_means)
    weights = ability_weights(theta_means)
    n_points: dict[str, int] = {}
    for rec in records:
        n_points[rec.participant_id] = n_points.get(rec.participant_id, 0) + 1
    with open(out / "groups.csv", "w", newline="") as fh:
        write_groups_csv(groups, theta_summaries, n_points, fh)
    with open(out / "weights.csv", "w", newline="") as fh:
        write_weights_csv(weights, fh)

    warnings = [
        {"parameter": s.name, "rhat": s.rhat}
        for s in summaries
        if not math.isnan(s.rhat) and s.rhat > RHAT_WARN
    ]
    manifest = {
        "gold_images": sorted(gold_images),
        "eval_images": sorted(eval_images),
        "seed": config.seed,
        "gold_fraction": config.gold_fraction,
        "chains": config.chains,
        "warmup": config.warmup,
        "samples": config.samples,
        "dropped_records": len(report.dropped_records),
        "rhat_warnings": warnings,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")

    if warnings:
        print(f"warning: {len(warnings)} parameters with rhat > {RHAT_WARN}", file=sys.stderr)
        return 2
    print(f"fit complete: {len(summaries)} parameters, artifacts in {out}")
    return 0


def _load_weights(out: Path) -> dict[str, float]:
    path = out / "weights.csv"
    if not path.exists():
        raise DataError(f"fit artifact missing: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return {row["participant_id"]: float(row["weight"]) for row in reader}


def _load_groups(out: Path) -> dict[str, str]:
    path = out / "groups.csv"
    if not path.exists():
        raise DataError(f"fit artifact missing: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return {row["participant_id"]: row["group"] for row in reader}


def cmd_consensus(args) -> int:
    config = _load_run_config(args)
    records, _ = _read_records(config.input)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    manifest_path = out / "manifest.json"
    needs_fit = any(s in ("experts", "experts_experienced", "weighted") for s in config.strategies)
    if needs_fit and not manifest_path.exists():
        raise DataError(f"fit artifacts required for strategies {config.strategies}: missing {manifest_path}")
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        eval_images = set(manifest["eval_images"])
        eval_records = [r for r in records if r.image_id in eval_images]
    else:
        eval_records = records

    for strategy in config.strategies:
        path = out / f"consensus_{strategy}.csv"
        if strategy == "raw":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(
                    ["image_id", "point_id", "strategy", "label", "n_present", "n_absent",
                     "weight_present", "weight_absent", "tie_broken", "fallback"]
                )
                for rec in eval_records:
                    if rec.answer == "unsure":
                        continue
                    one = int(rec.answer == "present")
                    writer.writerow(
                        [rec.image_id, rec.point_id, "raw", rec.answer, one, 1 - one, repr(0.0), repr(0.0), "false", "false"]
                    )
            continue
        if strategy == "consensus":
            labels, _ = aggregate(eval_records, "majority")
        elif strategy == "experts":
            labels, _ = aggregate(eval_records, "group_majority", groups=_load_groups(out), allowed_groups={"expert"})
        elif strategy == "experts_experienced":
            labels, _ = aggregate(
                eval_records, "group_majority", groups=_load_groups(out), allowed_groups={"expert", "experienced"}
            )
        else:
            labels, _ = aggregate(eval_records, "weighted", weights=_load_weights(out))
        labels.sort(key=lambda lab: (lab.image_id, lab.point_id))
        with open(path, "w", newline="") as fh:
            write_consensus(labels, fh)
    print(f"wrote consensus files for {len(config.strategies)} strategies to {out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _load_run_config(args)
    records, _ = _read_records(config.input)
    truth = {r.point_key: r.truth for r in records if r.truth is not None}
    out = Path(config.out_dir)

    rows = []
    for strategy in config.strategies:
        path = out / f"consensus_{strategy}.csv"
        if not path.exists():
            raise DataError(f"consensus file missing: {path}")
        preds = []
        missing = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                key = (row["image_id"], row["point_id"])
                if key not in truth:
                    missing.append(key)
                    continue
                preds.append((row["label"], truth[key]))
        if missing:
            raise DataError(
                f"missing truth for {len(missing)} points in {path.name}: "
                + ", ".join(f"{img}:{pt}" for img, pt in missing[:10])
            )
        tp = fp = tn = fn = 0
        for pred, actual in preds:
            if pred == "present":
                tp += actual == "present"
                fp += actual == "absent"
            else:
                tn += actual == "absent"
                fn += actual == "present"
        rows.append((strategy, ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)))

    with open(out / "report.csv", "w", newline="") as fh:
        write_report_csv(rows, fh)
    print(f"wrote {out / 'report.csv'}")
    return 0


def cmd_cluster(args) -> int:
    config = _load_run_config(args)
    out = Path(config.out_dir)
    summary_path = out / "summary.json"
    if not summary_path.exists():
        raise DataError(f"fit artifact missing: {summary_path}")
    summaries = json.loads(summary_path.read_text())
    theta = {
        s["name"][len("theta["):-1]: s
        for s in summaries
        if s["name"].startswith("theta[")
    }
    theta_means = {pid: s["posterior_mean"] for pid, s in theta.items()}
    groups = cluster_participants(theta_means)
    n_points: dict[str, int] = {}
    if config.input:
        records, _ = _read_records(config.input)
        for rec in records:
            n_points[rec.participant_id] = n_points.get(rec.participant_id, 0) + 1
    with open(out / "groups.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["participant_id", "group", "theta_mean", "hdi_low", "hdi_high", "n_points"])
        for pid in sorted(groups.groups):
            s = theta[pid]
            writer.writerow(
                [pid, groups.groups[pid], repr(s["posterior_mean"]), repr(s["hdi_low"]), repr(s["hdi_high"]), n_points.get(pid, 0)]
            )
    print(f"wrote {out / 'groups.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdirt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("simulate", cmd_simulate),
        ("fit", cmd_fit),
        ("consensus", cmd_consensus),
        ("evaluate", cmd_evaluate),
        ("cluster", cmd_cluster),
    ):
        p = sub.add_parser(name)
        p.add_argument("--input", type=str, default=None)
        p.add_argument("--out-dir", dest="out_dir", type=str, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--gold-fraction", dest="gold_fraction", type=float, default=None)
        p.add_argument("--chains", type=int, default=None)
        p.add_argument("--warmup", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--thin", type=int, default=None)
        p.add_argument("--strategies", type=str, default=None, help="comma-separated subset of " + ",".join(ALL_STRATEGIES))
        p.add_argument("--config", type=str, default=None, help="JSON file mirroring RunConfig; flags override")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (DataError, ModelError, SamplerError, VoteError, MetricsError, PosteriorError, SimulationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
