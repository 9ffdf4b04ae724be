"""k-hop subgraph extraction and exact target-row forward passes.

The subgraph around a target t keeps every node within k hops plus any
candidate-pair endpoints added later. Normalization always uses full-graph
degrees (+1 for the self-loop), so the propagated row of t computed on the
subgraph equals the full-graph row exactly: a length-k walk from t only
visits nodes within k hops, and operator entries only need degrees, which
are tracked globally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph, bfs_within, flip_edge
from .models import SurrogateModel, predict_full, softmax


def _pair(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(eq=False)
class Subgraph:
    """Mutable working view around one attack target.

    ``order`` lists member nodes by global id in insertion order and
    ``local`` maps global id -> position. ``edges`` is the edge set of the
    current full graph induced on the members. ``candidates`` holds the
    still-unflipped pairs; ``candidates_present`` marks which of them
    currently exist as edges (a candidate is flipped at most once, so
    presence is fixed when the candidate is created). ``global_degrees``
    tracks full-graph degrees, which the operator needs for exactness.
    """

    target: int
    radius: int
    mode: str
    attackers: np.ndarray
    order: list[int]
    local: dict[int, int]
    edges: set[tuple[int, int]]
    candidates: set[tuple[int, int]]
    candidates_present: set[tuple[int, int]]
    global_degrees: np.ndarray
    distances: dict[int, int]
    features: np.ndarray
    no_potential_nodes: bool = False

    @property
    def nodes(self):
        return self.local.keys()


def extract_khop(g: Graph, target: int, k: int, mode: str = "direct") -> Subgraph:
    """Build the radius-k subgraph of ``target`` with its flip candidates.

    Deletion candidates are the existing edges incident to the attacker
    set: {target} in direct mode, N(target) in influence mode. Influence
    mode never touches pairs containing the target itself.
    """
    if not 0 <= target < g.n:
        raise ValueError(f"target {target} out of range")
    if k < 1:
        raise ValueError("k must be >= 1")
    if mode not in ("direct", "influence"):
        raise ValueError(f"unknown attack mode: {mode}")
    if mode == "influence":
        attackers = np.sort(g.neighbors(target)).astype(np.int64)
        if attackers.size == 0:
            raise ValueError("influence mode undefined for isolated target")
    else:
        attackers = np.array([target], dtype=np.int64)

    distances = bfs_within(g, target, k)
    order = sorted(distances)
    local = {u: i for i, u in enumerate(order)}
    edges = set()
    for u in order:
        for w in g.neighbors(u):
            w = int(w)
            if u < w and w in local:
                edges.add((u, w))
    candidates: set[tuple[int, int]] = set()
    for a in attackers:
        a = int(a)
        for w in g.neighbors(a):
            p = _pair(a, int(w))
            if mode == "influence" and target in p:
                continue
            candidates.add(p)
    return Subgraph(
        target=target,
        radius=k,
        mode=mode,
        attackers=attackers,
        order=order,
        local=local,
        edges=edges,
        candidates=candidates,
        candidates_present=set(candidates),
        global_degrees=g.degrees,
        distances=distances,
        features=g.features,
    )


def _local_operator(sub: Subgraph) -> tuple[sp.csr_matrix, np.ndarray]:
    """Normalized operator on the member nodes, using global degrees."""
    order = np.asarray(sub.order, dtype=np.int64)
    L = order.size
    d_tilde = sub.global_degrees[order] + 1.0
    if sub.edges:
        e = np.array(sorted(sub.edges), dtype=np.int64)
        i = np.array([sub.local[u] for u in e[:, 0]], dtype=np.int64)
        j = np.array([sub.local[v] for v in e[:, 1]], dtype=np.int64)
        w = 1.0 / np.sqrt(d_tilde[i] * d_tilde[j])
        rows = np.concatenate([i, j, np.arange(L)])
        cols = np.concatenate([j, i, np.arange(L)])
        vals = np.concatenate([w, w, 1.0 / d_tilde])
    else:
        rows = cols = np.arange(L)
        vals = 1.0 / d_tilde
    op = sp.csr_matrix((vals, (rows, cols)), shape=(L, L))
    return op, d_tilde


def predict_target(sub: Subgraph, m: SurrogateModel) -> np.ndarray:
    """Class probabilities of the target from the subgraph alone.

    Equals the target row of the full-graph forward pass exactly.
    """
    if sub.radius < m.k:
        raise ValueError(f"subgraph radius {sub.radius} < model k {m.k}")
    op, _ = _local_operator(sub)
    r = np.zeros(len(sub.order))
    r[sub.local[sub.target]] = 1.0
    for _ in range(m.k):
        r = op @ r
    logits = (r @ sub.features[np.asarray(sub.order)]) @ m.W / m.epsilon
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits in subgraph forward")
    return softmax(logits)


def ladders(sub: Subgraph, m: SurrogateModel, c_t: int, c_prime: int):
    """Propagation ladders for the analytic gradient.

    Returns (U, V, d_tilde) where U[i] = op^i e_t and V[j] = op^j y with
    y = X (W[:, c_prime] - W[:, c_t]), both lists of length k+1 on the
    member nodes.
    """
    op, d_tilde = _local_operator(sub)
    order = np.asarray(sub.order, dtype=np.int64)
    y = sub.features[order] @ (m.W[:, c_prime] - m.W[:, c_t])
    e_t = np.zeros(order.size)
    e_t[sub.local[sub.target]] = 1.0
    U, V = [e_t], [y]
    for _ in range(m.k):
        U.append(op @ U[-1])
        V.append(op @ V[-1])
    return U, V, d_tilde


def add_potential_edges(sub: Subgraph, g: Graph, m: SurrogateModel, budget: int,
                        prefilter: bool = False) -> Subgraph:
    """Attach addition candidates toward the best wrong class.

    Potential nodes are those labelled with the target's strongest
    competing class c' (from the clean prediction) and not already in the
    subgraph. All attacker x potential pairs are scored by the analytic
    gradient at zero edge weight; the ``budget`` best join the candidate
    set and their endpoints join the member nodes (connected only once a
    flip actually applies them). Sets ``no_potential_nodes`` when the
    class has no nodes left outside the subgraph.
    """
    if budget <= 0:
        return sub
    t = sub.target
    probs = predict_full(g, m)[t]
    c_t = int(g.labels[t])
    masked = probs.copy()
    masked[c_t] = -np.inf
    c_prime = int(masked.argmax())

    in_sub = np.zeros(g.n, dtype=bool)
    in_sub[np.asarray(sub.order)] = True
    pool = np.flatnonzero((g.labels == c_prime) & ~in_sub)
    if pool.size == 0:
        sub.no_potential_nodes = True
        return sub
    if prefilter and pool.size > 50_000:
        # keep the 10*budget nodes most feature-similar to the target
        sims = g.features[pool] @ g.features[t]
        keep = np.argsort(-sims, kind="stable")[: 10 * budget]
        pool = np.sort(pool[keep])

    pairs = sorted(
        _pair(int(a), int(p))
        for a in sub.attackers
        for p in pool
        if not (sub.mode == "influence" and t in (int(a), int(p)))
    )
    probe = Subgraph(
        target=t,
        radius=sub.radius,
        mode=sub.mode,
        attackers=sub.attackers,
        order=sub.order + [int(p) for p in pool],
        local={**sub.local, **{int(p): len(sub.order) + i for i, p in enumerate(pool)}},
        edges=sub.edges,
        candidates=set(pairs),
        candidates_present=set(),
        global_degrees=sub.global_degrees,
        distances=sub.distances,
        features=sub.features,
    )
    grads = pair_gradients(probe, m, c_t, c_prime)
    ranked = sorted(grads.items(), key=lambda kv: (-kv[1], kv[0]))
    retained = [p for p, _ in ranked[:budget]]
    for u, v in retained:
        sub.candidates.add((u, v))
        for w in (u, v):
            if w not in sub.local:
                sub.local[w] = len(sub.order)
                sub.order.append(w)
    return sub


def pair_gradients(sub: Subgraph, m: SurrogateModel, c_t: int, c_prime: int
                   ) -> dict[tuple[int, int], float]:
    """d(targeted loss)/d(pair weight) for every candidate pair.

    The loss ln Z_{t,c'} - ln Z_{t,c_t} collapses to (1/eps) e_t^T op^k y,
    so with ladders U, V the unnormalized-entry gradient of pair (p, q) is
    gsym = (1/eps) sum_i U[i][p] V[k-1-i][q] + U[i][q] V[k-1-i][p], and the
    degree chain through d_tilde^{-1/2} contributes per-endpoint terms
    dLdd[p] = -(1/(2 eps d_p)) sum_i (U[i][p] V[k-i][p] + U[i+1][p] V[k-1-i][p]).
    Endpoints outside the member set only enter through their degree, which
    is exactly how the subgraph loss depends on them.
    """
    if c_prime == c_t:
        raise ValueError("c_prime must differ from the true class")
    k = m.k
    U, V, d_tilde = ladders(sub, m, c_t, c_prime)
    acc = np.zeros_like(d_tilde)
    for i in range(k):
        acc += U[i] * V[k - i] + U[i + 1] * V[k - 1 - i]
    dLdd = -acc / (2.0 * m.epsilon * d_tilde)

    pairs = sorted(sub.candidates)
    if not pairs:
        return {}
    # sentinel slot L: zero ladder entries for endpoints outside the members
    L = len(sub.order)
    Upad = [np.append(u, 0.0) for u in U]
    Vpad = [np.append(v, 0.0) for v in V]
    dpad = np.append(dLdd, 0.0)
    P = np.array([sub.local.get(u, L) for u, _ in pairs])
    Q = np.array([sub.local.get(v, L) for _, v in pairs])
    gsym = np.zeros(len(pairs))
    for i in range(k):
        gsym += Upad[i][P] * Vpad[k - 1 - i][Q] + Upad[i][Q] * Vpad[k - 1 - i][P]
    gsym /= m.epsilon
    du = sub.global_degrees[[u for u, _ in pairs]] + 1.0
    dv = sub.global_degrees[[v for _, v in pairs]] + 1.0
    grad = gsym / np.sqrt(du * dv) + dpad[P] + dpad[Q]
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    return dict(zip(pairs, grad.tolist()))


def apply_flip_and_expand(sub: Subgraph, g_current: Graph, e: tuple[int, int]
                          ) -> tuple[Subgraph, Graph]:
    """Apply candidate flip ``e`` and refresh the subgraph around it.

    Returns the updated subgraph (mutated in place) and the new graph.
    Members never leave; nodes that came within radius join, and the edge
    set is re-induced from the new graph so later forwards stay exact.
    """
    e = _pair(*e)
    if e not in sub.candidates:
        raise ValueError(f"pair {e} is not a candidate")
    g_new = flip_edge(g_current, e[0], e[1])
    sub.candidates.discard(e)
    sub.candidates_present.discard(e)
    sub.global_degrees = g_new.degrees
    sub.distances = bfs_within(g_new, sub.target, sub.radius)
    for w in sorted(sub.distances):
        if w not in sub.local:
            sub.local[w] = len(sub.order)
            sub.order.append(w)
    edges = set()
    for u in sub.order:
        for w in g_new.neighbors(u):
            w = int(w)
            if u < w and w in sub.local:
                edges.add((u, w))
    sub.edges = edges
    return sub, g_new
