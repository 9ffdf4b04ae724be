"""Command-line entry points: train, attack, evaluate, bench, sbm.

Exit codes: 0 success, 2 usage or input error, 3 runtime failure.
`sga attack` writes deterministic perturbation files (timing zeroed) so a
config+seed pair reproduces byte-identical output; pass --timing to keep
wall-clock numbers instead.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .attacks import (
    AttackConfig,
    STRATEGIES,
    read_perturbations,
    run_strategy,
    write_perturbations,
)
from .graph import (
    generate_sbm,
    largest_connected_component,
    load_graph_bundle,
    random_split,
    row_normalize_features,
    save_graph_bundle,
)
from .harness import (
    ExperimentConfig,
    VICTIMS,
    bench_attack,
    emit_report,
    evaluate_perturbations,
    sample_targets,
)
from .models import (
    SurrogateModel,
    default_train_config,
    load_model,
    predict,
    read_checkpoint_header,
    save_model,
    train_gcn,
    train_sgc,
)


def _pick(*values, default=None):
    for v in values:
        if v is not None:
            return v
    return default


def _load_config(path):
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _prepare_graph(bundle, row_normalize):
    g = largest_connected_component(load_graph_bundle(bundle))
    if row_normalize:
        g = row_normalize_features(g)
    return g


def _train_config(kind, seed, args):
    tcfg = default_train_config(kind, seed)
    if getattr(args, "lr", None) is not None:
        tcfg.learning_rate = args.lr
    if getattr(args, "epochs", None) is not None:
        tcfg.epochs = args.epochs
    if getattr(args, "weight_decay", None) is not None:
        tcfg.weight_decay = args.weight_decay
    if getattr(args, "patience", None) is not None:
        tcfg.early_stop_patience = args.patience
    return tcfg


def cmd_train(args) -> int:
    g = _prepare_graph(args.bundle, args.row_normalize)
    split = random_split(g, args.train_frac, args.val_frac, args.seed)
    tcfg = _train_config(args.model, args.seed, args)
    if args.model == "sgc":
        model = train_sgc(g, split, args.k, tcfg)
    else:
        model = train_gcn(g, split, args.hidden, tcfg)
    probs = predict(g, model)
    acc = float((probs[split.test].argmax(axis=1) == g.labels[split.test]).mean())
    extra = {
        "dataset": g.name,
        "bundle": str(args.bundle),
        "seed": args.seed,
        "train_frac": args.train_frac,
        "val_frac": args.val_frac,
        "row_normalize": bool(args.row_normalize),
        "test_accuracy": acc,
    }
    save_model(model, args.out, extra=extra)
    print(f"trained {args.model} on {g.name} (n={g.n}, |E|={g.num_edges}): "
          f"test accuracy {acc:.3f} -> {args.out}")
    return 0


def cmd_attack(args) -> int:
    cfgd = _load_config(args.config)
    att = cfgd.get("attack", {})
    bundle = _pick(args.bundle, cfgd.get("dataset"))
    if bundle is None:
        raise ValueError("no bundle given (use --bundle or a config file)")
    strategy = _pick(args.strategy, cfgd.get("strategy"), default="sga")
    mode = _pick(args.mode, cfgd.get("mode"), default="direct")
    row_normalize = _pick(args.row_normalize, cfgd.get("row_normalize"), default=False)

    model = load_model(args.surrogate)
    if not isinstance(model, SurrogateModel):
        raise ValueError("attack requires a surrogate (sgc) checkpoint")
    header = read_checkpoint_header(args.surrogate)
    extra = header.get("extra", {})
    seed = _pick(args.seed, cfgd.get("seed"), extra.get("seed"), default=0)
    train_frac = _pick(args.train_frac, cfgd.get("train_frac"),
                       extra.get("train_frac"), default=0.1)
    val_frac = _pick(args.val_frac, cfgd.get("val_frac"),
                     extra.get("val_frac"), default=0.1)
    k = _pick(args.k, att.get("k"), default=model.k)
    if k != model.k:
        raise ValueError(f"requested k={k} but surrogate was trained with k={model.k}")

    g = _prepare_graph(bundle, row_normalize)
    split = random_split(g, train_frac, val_frac, seed)
    n_targets = _pick(args.targets, cfgd.get("n_targets"), default=100)
    targets = sample_targets(split, n_targets, seed)
    acfg = AttackConfig(
        mode=mode,
        budget_rule=_pick(args.budget_rule, att.get("budget_rule"), default="degree"),
        fixed_budget=_pick(args.budget, att.get("fixed_budget"), default=1),
        k=k,
        epsilon=_pick(args.epsilon, att.get("epsilon"), default=5.0),
        seed=seed,
        forbid_singletons=_pick(args.forbid_singletons,
                                att.get("forbid_singletons"), default=False),
        dense_node_limit=_pick(args.dense_node_limit,
                               att.get("dense_node_limit"), default=4000),
        gradargmax_epsilon=_pick(args.gradargmax_epsilon,
                                 att.get("gradargmax_epsilon")),
    )
    perts = [run_strategy(strategy, g, model, int(t), acfg) for t in targets]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_perturbations(outdir / "perturbations.jsonl", perts,
                        include_timing=args.timing)
    meta = {
        "bundle": str(bundle),
        "dataset": g.name,
        "strategy": strategy,
        "mode": mode,
        "k": k,
        "epsilon": acfg.epsilon,
        "seed": seed,
        "train_frac": train_frac,
        "val_frac": val_frac,
        "row_normalize": bool(row_normalize),
        "n_targets": int(targets.size),
        "budget_rule": acfg.budget_rule,
        "fixed_budget": acfg.fixed_budget,
        "forbid_singletons": acfg.forbid_singletons,
    }
    (outdir / "attack_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )
    n_flips = sum(len(p.flips) for p in perts)
    n_partial = sum(p.partial for p in perts)
    print(f"{strategy} ({mode}) on {g.name}: {targets.size} targets, "
          f"{n_flips} flips, {n_partial} partial -> {outdir / 'perturbations.jsonl'}")
    return 0


def cmd_evaluate(args) -> int:
    cfgd = _load_config(args.config)
    pert_path = Path(args.perturbations)
    perts = read_perturbations(pert_path)
    meta_path = pert_path.parent / "attack_meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.is_file() else {}

    bundle = _pick(args.bundle, cfgd.get("dataset"), meta.get("bundle"))
    if bundle is None:
        raise ValueError("no bundle given")
    row_normalize = _pick(args.row_normalize, cfgd.get("row_normalize"),
                          meta.get("row_normalize"), default=False)
    seed = _pick(args.seed, cfgd.get("seed"), meta.get("seed"), default=0)
    train_frac = _pick(args.train_frac, cfgd.get("train_frac"),
                       meta.get("train_frac"), default=0.1)
    val_frac = _pick(args.val_frac, cfgd.get("val_frac"),
                     meta.get("val_frac"), default=0.1)
    k = _pick(args.k, meta.get("k"), default=2)

    g = _prepare_graph(bundle, row_normalize)
    split = random_split(g, train_frac, val_frac, seed)
    tcfg = _train_config(args.victim, seed, args)
    report = evaluate_perturbations(
        g, split, perts, args.victim, k, args.hidden, tcfg,
        strategy=meta.get("strategy", ""), mode=meta.get("mode", ""),
        config=meta,
    )
    json_path, csv_path = emit_report(report, args.out)
    dac_s = "n/a" if report.dac is None else f"{report.dac:.2e}"
    print(f"victim {args.victim} on {g.name}: clean test accuracy "
          f"{report.clean_test_accuracy:.3f}, accuracy on {len(perts)} attacked "
          f"targets {report.accuracy_on_targets:.3f}, mean margin "
          f"{report.mean_cm:.3f}, dac {dac_s} -> {json_path}")
    return 0


def cmd_bench(args) -> int:
    cfgd = _load_config(args.config)
    att = cfgd.get("attack", {})
    bundle = _pick(args.bundle, cfgd.get("dataset"))
    if bundle is None:
        raise ValueError("no bundle given")
    cfg = ExperimentConfig(
        dataset=str(bundle),
        strategy=_pick(args.strategy, cfgd.get("strategy"), default="sga"),
        mode=_pick(args.mode, cfgd.get("mode"), default="direct"),
        n_targets=_pick(args.targets, cfgd.get("n_targets"), default=20),
        seed=_pick(args.seed, cfgd.get("seed"), default=0),
        train_frac=_pick(args.train_frac, cfgd.get("train_frac"), default=0.1),
        val_frac=_pick(args.val_frac, cfgd.get("val_frac"), default=0.1),
        attack=AttackConfig(
            k=_pick(args.k, att.get("k"), default=2),
            epsilon=_pick(args.epsilon, att.get("epsilon"), default=5.0),
            budget_rule=_pick(args.budget_rule, att.get("budget_rule"),
                              default="degree"),
            fixed_budget=_pick(args.budget, att.get("fixed_budget"), default=1),
            dense_node_limit=_pick(args.dense_node_limit,
                                   att.get("dense_node_limit"), default=4000),
        ),
    )
    result = bench_attack(cfg)
    width = max(len(k) for k in result)
    for key, val in result.items():
        if key == "budgets":
            val = f"min {min(val)} / mean {np.mean(val):.1f} / max {max(val)}"
        print(f"{key:<{width}}  {val}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_sbm(args) -> int:
    sizes = [int(s) for s in args.blocks.split(",") if s]
    g = generate_sbm(sizes, args.pin, args.pout, args.features, args.seed,
                     noise=args.noise)
    save_graph_bundle(g, args.out)
    print(f"sbm bundle: n={g.n}, |E|={g.num_edges}, blocks={sizes} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sga",
        description="Structural attacks on graph node classifiers",
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model on a dataset bundle")
    t.add_argument("--bundle", required=True)
    t.add_argument("--model", choices=VICTIMS, default="sgc")
    t.add_argument("--k", type=int, default=2, help="propagation steps (sgc)")
    t.add_argument("--out", required=True, help="checkpoint path (.json)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--train-frac", type=float, default=0.1)
    t.add_argument("--val-frac", type=float, default=0.1)
    t.add_argument("--hidden", type=int, default=16)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--patience", type=int)
    t.add_argument("--row-normalize", action="store_true")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("attack", help="generate perturbations with a strategy")
    a.add_argument("--bundle")
    a.add_argument("--surrogate", required=True, help="sgc checkpoint")
    a.add_argument("--strategy", choices=STRATEGIES)
    a.add_argument("--mode", choices=("direct", "influence"))
    a.add_argument("--targets", type=int)
    a.add_argument("--epsilon", type=float)
    a.add_argument("--k", type=int)
    a.add_argument("--out", required=True, help="output directory")
    a.add_argument("--seed", type=int)
    a.add_argument("--train-frac", type=float)
    a.add_argument("--val-frac", type=float)
    a.add_argument("--budget-rule", choices=("degree", "fixed"))
    a.add_argument("--budget", type=int, help="flip count for --budget-rule fixed")
    a.add_argument("--forbid-singletons", action="store_const", const=True)
    a.add_argument("--row-normalize", action="store_const", const=True)
    a.add_argument("--timing", action="store_true",
                   help="record wall-clock times (breaks byte determinism)")
    a.add_argument("--dense-node-limit", type=int)
    a.add_argument("--gradargmax-epsilon", type=float)
    a.add_argument("--config", help="JSON experiment config; flags override")
    a.set_defaults(func=cmd_attack)

    e = sub.add_parser("evaluate", help="retrain a victim on perturbed graphs")
    e.add_argument("--bundle")
    e.add_argument("--perturbations", required=True)
    e.add_argument("--victim", choices=VICTIMS, required=True)
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--seed", type=int)
    e.add_argument("--k", type=int)
    e.add_argument("--train-frac", type=float)
    e.add_argument("--val-frac", type=float)
    e.add_argument("--hidden", type=int, default=16)
    e.add_argument("--epochs", type=int)
    e.add_argument("--lr", type=float)
    e.add_argument("--weight-decay", type=float)
    e.add_argument("--patience", type=int)
    e.add_argument("--row-normalize", action="store_const", const=True)
    e.add_argument("--config", help="JSON experiment config; flags override")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="time the attack stage")
    b.add_argument("--bundle")
    b.add_argument("--strategy", choices=STRATEGIES)
    b.add_argument("--mode", choices=("direct", "influence"))
    b.add_argument("--targets", type=int)
    b.add_argument("--k", type=int)
    b.add_argument("--epsilon", type=float)
    b.add_argument("--seed", type=int)
    b.add_argument("--train-frac", type=float)
    b.add_argument("--val-frac", type=float)
    b.add_argument("--budget-rule", choices=("degree", "fixed"))
    b.add_argument("--budget", type=int)
    b.add_argument("--dense-node-limit", type=int)
    b.add_argument("--out", help="write results as JSON")
    b.add_argument("--config", help="JSON experiment config; flags override")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("sbm", help="generate a stochastic block model bundle")
    s.add_argument("--blocks", required=True, help="comma-separated block sizes")
    s.add_argument("--pin", type=float, required=True)
    s.add_argument("--pout", type=float, required=True)
    s.add_argument("--features", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--out", required=True, help="bundle directory to write")
    s.set_defaults(func=cmd_sbm)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # unexpected runtime failure
        print(f"failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
