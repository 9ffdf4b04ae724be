"""Structural attack strategies against the linear surrogate.

All strategies emit an ordered flip list constrained to pairs incident to
the attacker set: the target itself in direct mode, its neighbors in
influence mode (pairs touching the target are then off limits).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph
from .models import SurrogateModel, predict_full, with_epsilon
from .subgraph import (
    Subgraph,
    add_potential_edges,
    apply_flip_and_expand,
    extract_khop,
    pair_gradients,
    _pair,
)


@dataclass
class AttackConfig:
    mode: str = "direct"
    budget_rule: str = "degree"
    fixed_budget: int = 1
    k: int = 2
    epsilon: float = 5.0
    seed: int = 0
    forbid_singletons: bool = False
    stop_on_nonpositive: bool = False
    potential_prefilter: bool = False
    gradargmax_epsilon: float | None = None
    dense_node_limit: int = 4000


@dataclass
class Perturbation:
    """Ordered edge flips produced for one target."""

    target: int
    flips: list[tuple[int, int, str]]
    budget: int
    strategy: str
    elapsed_s: float = 0.0
    peak_subgraph_edges: int = 0
    partial: bool = False


def budget_for(g: Graph, target: int, cfg: AttackConfig) -> int:
    if cfg.budget_rule == "degree":
        return max(1, int(g.degrees[target]))
    if cfg.budget_rule == "fixed":
        if cfg.fixed_budget < 1:
            raise ValueError("fixed budget must be >= 1")
        return cfg.fixed_budget
    raise ValueError(f"unknown budget rule: {cfg.budget_rule}")


def targeted_loss(probs: np.ndarray, c_t: int, c_prime: int) -> float:
    """ln p[c_prime] - ln p[c_t]; crossing zero flips the comparison."""
    if c_prime == c_t:
        raise ValueError("c_prime must differ from c_t")
    if probs[c_prime] <= 0.0 or probs[c_t] <= 0.0:
        raise ValueError("zero probability in targeted loss")
    return float(np.log(probs[c_prime]) - np.log(probs[c_t]))


def subgraph_gradient(sub: Subgraph, m: SurrogateModel, c_t: int, c_prime: int
                      ) -> dict[tuple[int, int], float]:
    """Analytic d(targeted loss)/d(pair weight) for every candidate pair."""
    return pair_gradients(sub, m, c_t, c_prime)


def structure_score(grads: dict, sub: Subgraph) -> dict:
    """Flip scores: +gradient for absent pairs, -gradient for present ones."""
    return {
        p: (-g if p in sub.candidates_present else g) for p, g in grads.items()
    }


def _best_class_swap(g: Graph, m: SurrogateModel, target: int) -> tuple[int, int]:
    """True class and strongest wrong class from the clean prediction."""
    probs = predict_full(g, m)[target]
    c_t = int(g.labels[target])
    masked = probs.copy()
    masked[c_t] = -np.inf
    return c_t, int(masked.argmax())


def _attackers(g: Graph, target: int, mode: str) -> list[int]:
    if mode == "direct":
        return [target]
    if mode == "influence":
        nbrs = sorted(int(w) for w in g.neighbors(target))
        if not nbrs:
            raise ValueError("influence mode undefined for isolated target")
        return nbrs
    raise ValueError(f"unknown attack mode: {mode}")


def sga_attack(g: Graph, m: SurrogateModel, target: int, cfg: AttackConfig
               ) -> Perturbation:
    """Iterative gradient attack on the k-hop subgraph.

    The wrong class is fixed once from the clean prediction; each of the
    budget iterations recomputes candidate gradients on the evolving
    subgraph, applies the best-scoring flip (ties to the smallest pair)
    and expands the subgraph around it.
    """
    t0 = time.perf_counter()
    if cfg.k != m.k:
        raise ValueError(f"attack radius {cfg.k} != surrogate k {m.k}")
    mcal = with_epsilon(m, cfg.epsilon)
    c_t, c_prime = _best_class_swap(g, mcal, target)
    delta = budget_for(g, target, cfg)
    sub = extract_khop(g, target, cfg.k, cfg.mode)
    sub = add_potential_edges(sub, g, mcal, delta, prefilter=cfg.potential_prefilter)

    def working_set() -> int:
        pending = len(sub.candidates) - len(sub.candidates_present)
        return len(sub.edges) + pending

    peak = working_set()
    g_cur = g
    flips: list[tuple[int, int, str]] = []
    for _ in range(delta):
        eligible = sub.candidates
        if cfg.forbid_singletons:
            eligible = {
                p for p in sub.candidates
                if p not in sub.candidates_present
                or (sub.global_degrees[p[0]] > 1 and sub.global_degrees[p[1]] > 1)
            }
        if not eligible:
            break
        grads = subgraph_gradient(sub, mcal, c_t, c_prime)
        scores = structure_score(grads, sub)
        scores = {p: s for p, s in scores.items() if p in eligible}
        best, best_score = min(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        if cfg.stop_on_nonpositive and best_score <= 0.0:
            break
        action = "remove" if best in sub.candidates_present else "add"
        sub, g_cur = apply_flip_and_expand(sub, g_cur, best)
        flips.append((best[0], best[1], action))
        peak = max(peak, working_set())
    return Perturbation(
        target=target,
        flips=flips,
        budget=delta,
        strategy="sga",
        elapsed_s=time.perf_counter() - t0,
        peak_subgraph_edges=peak,
        partial=len(flips) < delta,
    )


def _overlay_neighbors(g: Graph, a: int, added: set, removed: set) -> list[int]:
    cur = {int(w) for w in g.neighbors(a)}
    cur |= {v for (u, v) in added if u == a} | {u for (u, v) in added if v == a}
    cur -= {v for (u, v) in removed if u == a} | {u for (u, v) in removed if v == a}
    return sorted(cur)


def _random_like_attack(g: Graph, target: int, cfg: AttackConfig, p_remove: float,
                        strategy: str, same_label_removals: bool) -> Perturbation:
    """Common skeleton of the random and degree-blind label baselines."""
    t0 = time.perf_counter()
    attackers = _attackers(g, target, cfg.mode)
    delta = budget_for(g, target, cfg)
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, target, 1 if strategy == "ra" else 2])
    )
    added: set = set()
    removed: set = set()
    degrees = g.degrees.copy()
    flips: list[tuple[int, int, str]] = []

    def eligible_removals(a: int) -> list[int]:
        out = []
        for w in _overlay_neighbors(g, a, added, removed):
            p = _pair(a, w)
            if p in added or p in removed:
                continue
            if cfg.mode == "influence" and target in p:
                continue
            if same_label_removals and g.labels[a] != g.labels[w]:
                continue
            if cfg.forbid_singletons and (degrees[a] <= 1 or degrees[w] <= 1):
                continue
            out.append(w)
        return out

    for _ in range(delta):
        a = attackers[int(rng.integers(len(attackers)))]
        pool = eligible_removals(a)
        use_removal = pool and rng.random() < p_remove
        if use_removal:
            w = pool[int(rng.integers(len(pool)))]
            p = _pair(a, w)
            removed.add(p)
            degrees[a] -= 1
            degrees[w] -= 1
            flips.append((p[0], p[1], "remove"))
            continue
        nbrs = set(_overlay_neighbors(g, a, added, removed))
        x = None
        for _ in range(50 * g.n):
            cand = int(rng.integers(g.n))
            p = _pair(a, cand)
            if cand == a or cand in nbrs or p in added or p in removed:
                continue
            if cfg.mode == "influence" and target in p:
                continue
            if same_label_removals and g.labels[a] == g.labels[cand]:
                continue  # additions must cross labels for this baseline
            x = cand
            break
        if x is None:
            break
        p = _pair(a, x)
        added.add(p)
        degrees[a] += 1
        degrees[x] += 1
        flips.append((p[0], p[1], "add"))
    return Perturbation(
        target=target,
        flips=flips,
        budget=delta,
        strategy=strategy,
        elapsed_s=time.perf_counter() - t0,
        peak_subgraph_edges=0,
        partial=len(flips) < delta,
    )


def random_attack(g: Graph, target: int, cfg: AttackConfig, p1: float = 0.5
                  ) -> Perturbation:
    """Uniform flips: remove a random incident edge with probability p1,
    otherwise add a random non-edge; falls back to addition when the
    attacker has no removable edge left."""
    return _random_like_attack(g, target, cfg, p1, "ra", same_label_removals=False)


def dice_attack(g: Graph, target: int, cfg: AttackConfig, p2: float = 0.5
                ) -> Perturbation:
    """Label-aware random flips: removals only between same-label
    endpoints (probability p2), additions only between different-label
    endpoints."""
    return _random_like_attack(g, target, cfg, p2, "dice", same_label_removals=True)


def gradargmax_attack(g: Graph, m: SurrogateModel, target: int, cfg: AttackConfig
                      ) -> Perturbation:
    """One-shot dense-gradient baseline.

    Computes the gradient for every node pair at once on a dense n x n
    operator and commits the budget best flips without re-evaluation.
    Refuses graphs larger than ``cfg.dense_node_limit``.
    """
    t0 = time.perf_counter()
    if g.n > cfg.dense_node_limit:
        raise ValueError(
            f"{g.n} nodes exceeds the dense gradient limit "
            f"({cfg.dense_node_limit}); use the subgraph attack instead"
        )
    if cfg.k != m.k:
        raise ValueError(f"attack radius {cfg.k} != surrogate k {m.k}")
    eps = cfg.epsilon if cfg.gradargmax_epsilon is None else cfg.gradargmax_epsilon
    mcal = with_epsilon(m, eps)
    c_t, c_prime = _best_class_swap(g, mcal, target)
    delta = budget_for(g, target, cfg)
    attackers = _attackers(g, target, cfg.mode)

    A = g.adjacency().toarray()
    d_tilde = g.degrees + 1.0
    dis = 1.0 / np.sqrt(d_tilde)
    op = (A + np.eye(g.n)) * np.outer(dis, dis)
    y = g.features @ (mcal.W[:, c_prime] - mcal.W[:, c_t])
    e_t = np.zeros(g.n)
    e_t[target] = 1.0
    U, V = [e_t], [y]
    for _ in range(mcal.k):
        U.append(op @ U[-1])
        V.append(op @ V[-1])
    G = np.zeros((g.n, g.n))
    for i in range(mcal.k):
        G += np.outer(U[i], V[mcal.k - 1 - i])
    G += G.T.copy()
    G /= eps
    acc = np.zeros(g.n)
    for i in range(mcal.k):
        acc += U[i] * V[mcal.k - i] + U[i + 1] * V[mcal.k - 1 - i]
    dLdd = -acc / (2.0 * eps * d_tilde)
    G *= np.outer(dis, dis)
    G += dLdd[:, None]
    G += dLdd[None, :]
    S = G * (1.0 - 2.0 * A)

    us, vs, scores = [], [], []
    att_set = set(attackers)
    for a in attackers:
        mask = np.ones(g.n, dtype=bool)
        mask[a] = False
        if cfg.mode == "influence":
            mask[target] = False
            for b in att_set:
                if b < a:
                    mask[b] = False  # count attacker-attacker pairs once
        if cfg.forbid_singletons:
            risky = (A[a] > 0) & ((g.degrees <= 1) | (g.degrees[a] <= 1))
            mask &= ~risky
        idx = np.flatnonzero(mask)
        us.append(np.full(idx.size, a))
        vs.append(idx)
        scores.append(S[a, idx])
    u_all = np.concatenate(us)
    v_all = np.concatenate(vs)
    s_all = np.concatenate(scores)
    lo = np.minimum(u_all, v_all)
    hi = np.maximum(u_all, v_all)
    order = np.lexsort((hi, lo, -s_all))
    flips = []
    for i in order[:delta]:
        u, v = int(lo[i]), int(hi[i])
        action = "remove" if A[u, v] > 0 else "add"
        flips.append((u, v, action))
    return Perturbation(
        target=target,
        flips=flips,
        budget=delta,
        strategy="gradargmax",
        elapsed_s=time.perf_counter() - t0,
        peak_subgraph_edges=g.n * g.n,
        partial=len(flips) < delta,
    )


STRATEGIES = ("sga", "ra", "dice", "gradargmax")


def run_strategy(strategy: str, g: Graph, m: SurrogateModel, target: int,
                 cfg: AttackConfig) -> Perturbation:
    if strategy == "sga":
        return sga_attack(g, m, target, cfg)
    if strategy == "ra":
        return random_attack(g, target, cfg)
    if strategy == "dice":
        return dice_attack(g, target, cfg)
    if strategy == "gradargmax":
        return gradargmax_attack(g, m, target, cfg)
    raise ValueError(f"unknown strategy: {strategy}")


def write_perturbations(path, perts, include_timing: bool = False) -> None:
    """Write one JSON object per line; timing is zeroed by default so the
    same configuration and seed reproduce byte-identical files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for p in perts:
        rec = {
            "target": p.target,
            "flips": [[int(u), int(v), a] for u, v, a in p.flips],
            "strategy": p.strategy,
            "elapsed_s": p.elapsed_s if include_timing else 0.0,
            "peak_subgraph_edges": int(p.peak_subgraph_edges),
        }
        lines.append(json.dumps(rec, sort_keys=True))
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def read_perturbations(path) -> list[Perturbation]:
    perts = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        flips = [(int(u), int(v), str(a)) for u, v, a in rec["flips"]]
        perts.append(
            Perturbation(
                target=int(rec["target"]),
                flips=flips,
                budget=len(flips),
                strategy=rec.get("strategy", "unknown"),
                elapsed_s=float(rec.get("elapsed_s", 0.0)),
                peak_subgraph_edges=int(rec.get("peak_subgraph_edges", 0)),
            )
        )
    return perts
