"""End-to-end experiment pipeline: train, attack, retrain, report.

The poisoning protocol retrains the victim from scratch on each perturbed
graph with the same split and seed as the clean run, so accuracy changes
are attributable to the structure edits alone.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .attacks import AttackConfig, budget_for, run_strategy
from .graph import (
    Graph,
    Split,
    apply_flips,
    largest_connected_component,
    load_graph_bundle,
    random_split,
    row_normalize_features,
)
from .metrics import UndefinedAssortativityError, dac
from .models import (
    TrainConfig,
    classification_margin,
    default_train_config,
    predict,
    train_gcn,
    train_sgc,
)

VICTIMS = ("sgc", "gcn")


@dataclass
class ExperimentConfig:
    dataset: str = ""
    strategy: str = "sga"
    mode: str = "direct"
    n_targets: int = 100
    victim: str = "sgc"
    attack: AttackConfig = field(default_factory=AttackConfig)
    train: TrainConfig | None = None
    seed: int = 0
    train_frac: float = 0.1
    val_frac: float = 0.1
    hidden: int = 16
    victim_k: int | None = None  # victim propagation steps; default = attack k
    row_normalize: bool = False
    timing: bool = True
    workers: int = 1
    output: str | None = None


@dataclass
class TargetResult:
    target: int
    clean_cm: float
    poisoned_cm: float
    success: bool
    correct_poisoned: bool
    flips: list
    elapsed_s: float
    peak_subgraph_edges: int


@dataclass
class AttackReport:
    dataset: str
    n: int
    num_edges: int
    strategy: str
    mode: str
    victim: str
    clean_test_accuracy: float
    per_target: list[TargetResult]
    accuracy_on_targets: float
    mean_cm: float
    dac: float | None
    r_clean: float | None
    mean_time_s: float
    mean_peak_edges: float
    config: dict = field(default_factory=dict)


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from plain JSON, tolerating partial input."""
    d = dict(d)
    attack = AttackConfig(**d.pop("attack", {}))
    train = d.pop("train", None)
    cfg = ExperimentConfig(attack=attack, **d)
    if train is not None:
        cfg.train = TrainConfig(**train)
    return cfg


def _resolve_graph(dataset) -> Graph:
    if isinstance(dataset, Graph):
        return dataset
    return load_graph_bundle(dataset)


def prepare(cfg: ExperimentConfig) -> tuple[Graph, Split]:
    g = largest_connected_component(_resolve_graph(cfg.dataset))
    if cfg.row_normalize:
        g = row_normalize_features(g)
    split = random_split(g, cfg.train_frac, cfg.val_frac, cfg.seed)
    return g, split


def fit_victim(g: Graph, split: Split, victim: str, k: int, hidden: int,
               tcfg: TrainConfig):
    if victim == "sgc":
        return train_sgc(g, split, k, tcfg)
    if victim == "gcn":
        return train_gcn(g, split, hidden, tcfg)
    raise ValueError(f"unknown victim: {victim}")


def sample_targets(split: Split, n_targets: int, seed: int) -> np.ndarray:
    """Uniform draw from the test set, misclassified nodes included."""
    if n_targets < 0:
        raise ValueError("n_targets must be >= 0")
    n = min(n_targets, split.test.size)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    return np.sort(rng.choice(split.test, size=n, replace=False))


def evaluate_perturbations(g: Graph, split: Split, perturbations, victim: str,
                           k: int, hidden: int, tcfg: TrainConfig,
                           timing: bool = True, workers: int = 1,
                           strategy: str = "", mode: str = "",
                           config: dict | None = None) -> AttackReport:
    """Retrain the victim per perturbed graph and aggregate the damage."""
    clean_model = fit_victim(g, split, victim, k, hidden, tcfg)
    clean_probs = predict(g, clean_model)
    test_pred = clean_probs[split.test].argmax(axis=1)
    clean_acc = float((test_pred == g.labels[split.test]).mean())

    jobs = [(g, split, victim, k, hidden, tcfg, p) for p in perturbations]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_poison_one, jobs))
    else:
        rows = [_poison_one(j) for j in jobs]

    per_target = []
    for p, (pois_cm, pois_correct) in zip(perturbations, rows):
        t = p.target
        per_target.append(
            TargetResult(
                target=int(t),
                clean_cm=classification_margin(clean_probs[t], int(g.labels[t])),
                poisoned_cm=pois_cm,
                success=pois_cm < 0,
                correct_poisoned=pois_correct,
                flips=[[int(u), int(v), a] for u, v, a in p.flips],
                elapsed_s=p.elapsed_s if timing else 0.0,
                peak_subgraph_edges=int(p.peak_subgraph_edges),
            )
        )
    try:
        rep = dac(g, perturbations) if perturbations else None
        dac_val = rep.dac if rep else 0.0
        r_clean = rep.r_clean if rep else None
    except UndefinedAssortativityError:
        dac_val, r_clean = None, None
    return AttackReport(
        dataset=g.name,
        n=g.n,
        num_edges=g.num_edges,
        strategy=strategy,
        mode=mode,
        victim=victim,
        clean_test_accuracy=clean_acc,
        per_target=per_target,
        accuracy_on_targets=(
            float(np.mean([r.correct_poisoned for r in per_target]))
            if per_target else None
        ),
        mean_cm=(
            float(np.mean([r.poisoned_cm for r in per_target]))
            if per_target else None
        ),
        dac=dac_val,
        r_clean=r_clean,
        mean_time_s=(
            float(np.mean([r.elapsed_s for r in per_target]))
            if per_target else 0.0
        ),
        mean_peak_edges=(
            float(np.mean([r.peak_subgraph_edges for r in per_target]))
            if per_target else 0.0
        ),
        config=config or {},
    )


def _poison_one(job):
    g, split, victim, k, hidden, tcfg, pert = job
    g_p = apply_flips(g, pert.flips)
    model = fit_victim(g_p, split, victim, k, hidden, tcfg)
    t = pert.target
    probs = predict(g_p, model)[t]
    cm = classification_margin(probs, int(g.labels[t]))
    return cm, bool(probs.argmax() == g.labels[t])


def run_experiment(cfg: ExperimentConfig) -> AttackReport:
    """Full pipeline: load, split, train surrogate, attack, evaluate."""
    g, split = prepare(cfg)
    acfg = replace(cfg.attack, mode=cfg.mode, seed=cfg.seed)
    k = acfg.k
    surrogate = train_sgc(g, split, k, default_train_config("sgc", cfg.seed))
    targets = sample_targets(split, cfg.n_targets, cfg.seed)
    perturbations = [
        run_strategy(cfg.strategy, g, surrogate, int(t), acfg) for t in targets
    ]
    tcfg = cfg.train or default_train_config(cfg.victim, cfg.seed)
    victim_k = cfg.victim_k if cfg.victim_k is not None else k
    report = evaluate_perturbations(
        g, split, perturbations, cfg.victim, victim_k, cfg.hidden, tcfg,
        timing=cfg.timing, workers=cfg.workers,
        strategy=cfg.strategy, mode=cfg.mode, config=_config_dict(cfg),
    )
    if cfg.output:
        emit_report(report, cfg.output)
    return report


def _config_dict(cfg: ExperimentConfig) -> dict:
    ds = cfg.dataset
    if isinstance(ds, Graph):
        ds = ds.name or "<in-memory>"
    return asdict(replace(cfg, dataset=str(ds)))


def emit_report(report: AttackReport, outdir) -> tuple[Path, Path]:
    """Write report.json and per-target summary.csv with stable ordering."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    json_path = outdir / "report.json"
    json_path.write_text(json.dumps(asdict(report), indent=2, sort_keys=True) + "\n")
    csv_path = outdir / "summary.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "target", "clean_cm", "poisoned_cm", "success",
            "correct_poisoned", "n_flips", "elapsed_s", "peak_subgraph_edges",
        ])
        for r in report.per_target:
            w.writerow([
                r.target, f"{r.clean_cm:.6f}", f"{r.poisoned_cm:.6f}",
                int(r.success), int(r.correct_poisoned), len(r.flips),
                f"{r.elapsed_s:.6f}", r.peak_subgraph_edges,
            ])
    return json_path, csv_path


def load_report(outdir) -> dict:
    return json.loads((Path(outdir) / "report.json").read_text())


def bench_attack(cfg: ExperimentConfig) -> dict:
    """Time the attack stage alone (surrogate training excluded).

    Subgraph edge counts stand in for memory; the dense baseline reports
    n^2 matrix entries, or its refusal on oversized graphs.
    """
    g, split = prepare(cfg)
    acfg = replace(cfg.attack, mode=cfg.mode, seed=cfg.seed)
    surrogate = train_sgc(g, split, acfg.k, default_train_config("sgc", cfg.seed))
    targets = sample_targets(split, cfg.n_targets, cfg.seed)
    out = {
        "dataset": g.name,
        "n": g.n,
        "num_edges": g.num_edges,
        "strategy": cfg.strategy,
        "mode": cfg.mode,
        "targets": int(targets.size),
        "budgets": [budget_for(g, int(t), acfg) for t in targets],
    }
    times, peaks = [], []
    try:
        for t in targets:
            p = run_strategy(cfg.strategy, g, surrogate, int(t), acfg)
            times.append(p.elapsed_s)
            peaks.append(p.peak_subgraph_edges)
    except ValueError as e:
        out["refused"] = str(e)
        return out
    out["mean_time_s"] = float(np.mean(times)) if times else 0.0
    out["median_time_s"] = float(np.median(times)) if times else 0.0
    out["max_time_s"] = float(np.max(times)) if times else 0.0
    out["mean_peak_edges"] = float(np.mean(peaks)) if peaks else 0.0
    out["max_peak_edges"] = int(np.max(peaks)) if peaks else 0
    return out
