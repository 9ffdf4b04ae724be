"""Sparse graph container and dataset utilities.

Graphs are undirected, unweighted and free of self-loops, stored in CSR
form. A Graph is treated as an immutable value: every mutating operation
returns a new instance and shares the arrays that did not change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


@dataclass(eq=False)
class Graph:
    """Undirected graph with dense node features and integer labels.

    Node ids are dense 0..n-1. ``indptr``/``indices`` hold both directions
    of every edge, rows sorted ascending. ``degrees`` is cached and always
    consistent with the structure.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    degrees: np.ndarray
    name: str = ""
    _norm: sp.csr_matrix | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        for a in (self.indptr, self.indices, self.features, self.labels, self.degrees):
            a.setflags(write=False)

    @classmethod
    def build(cls, edges, features, labels, num_classes=None, name=""):
        """Construct a Graph from an (m, 2) array of undirected edge pairs.

        Duplicate pairs and symmetric repeats collapse to one edge.
        Self-loops and out-of-range ids are rejected.
        """
        features = np.ascontiguousarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d array (n, F)")
        n = features.shape[0]
        labels = np.asarray(labels, dtype=np.int64).copy()
        if labels.shape != (n,):
            raise ValueError(
                f"labels length {labels.shape} does not match {n} feature rows"
            )
        if n > 0 and labels.min() < 0:
            raise ValueError("negative label")
        inferred = int(labels.max()) + 1 if n > 0 else 0
        if num_classes is None:
            num_classes = inferred
        elif num_classes < inferred:
            raise ValueError(
                f"label {inferred - 1} out of range for num_classes={num_classes}"
            )

        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            loops = edges[:, 0] == edges[:, 1]
            if loops.any():
                u = int(edges[loops.argmax(), 0])
                raise ValueError(f"self-loop ({u}, {u}) not allowed")
        # Symmetrize and dedup via integer keys; n*n fits int64 comfortably.
        both = np.concatenate([edges, edges[:, ::-1]], axis=0)
        keys = np.unique(both[:, 0] * n + both[:, 1])
        heads = keys // n
        indices = keys % n
        counts = np.bincount(heads, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(
            n=n,
            indptr=indptr,
            indices=indices.astype(np.int64),
            features=features,
            labels=labels,
            num_classes=int(num_classes),
            degrees=counts.astype(np.int64),
            name=name,
        )

    @property
    def num_edges(self) -> int:
        return self.indices.size // 2

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return i < row.size and row[i] == v

    def edge_array(self) -> np.ndarray:
        """All edges once, as (m, 2) with u < v, lexicographically sorted."""
        heads = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        mask = heads < self.indices
        return np.column_stack([heads[mask], self.indices[mask]])

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def normalized_adjacency(self) -> sp.csr_matrix:
        """D^{-1/2} (A + I) D^{-1/2} with D = diag(degree + 1). Cached."""
        if self._norm is None:
            dinv = sp.diags(1.0 / np.sqrt(self.degrees + 1.0))
            a_tilde = self.adjacency() + sp.identity(self.n, format="csr")
            self._norm = (dinv @ a_tilde @ dinv).tocsr()
        return self._norm


@dataclass
class Split:
    """Disjoint train/validation/test node-id arrays."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


def load_graph_bundle(path) -> Graph:
    """Load a dataset bundle directory.

    Expects ``edges.tsv`` (one "u<TAB>v" pair per line), ``features.csv``
    (one row of comma-separated floats per node), ``labels.csv`` (one int
    per line) and optionally ``meta.json`` with keys "name" and "C".
    """
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"bundle directory not found: {path}")
    for fname in ("edges.tsv", "features.csv", "labels.csv"):
        if not (path / fname).is_file():
            raise FileNotFoundError(f"bundle file missing: {path / fname}")

    try:
        features = np.loadtxt(path / "features.csv", delimiter=",", ndmin=2)
    except ValueError as e:
        raise ValueError(f"{path / 'features.csv'}: ragged or non-numeric row ({e})")
    labels_raw = np.loadtxt(path / "labels.csv", ndmin=1)
    if not np.all(labels_raw == np.floor(labels_raw)):
        raise ValueError(f"{path / 'labels.csv'}: non-integer label")
    labels = labels_raw.astype(np.int64)

    text = (path / "edges.tsv").read_text()
    if text.strip():
        try:
            edges = np.loadtxt(path / "edges.tsv", delimiter="\t", dtype=np.int64, ndmin=2)
        except ValueError as e:
            raise ValueError(f"{path / 'edges.tsv'}: malformed line ({e})")
    else:
        edges = np.empty((0, 2), dtype=np.int64)

    name = path.name
    num_classes = None
    meta_path = path / "meta.json"
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text())
        name = meta.get("name", name)
        num_classes = meta.get("C")
    try:
        return Graph.build(edges, features, labels, num_classes=num_classes, name=name)
    except ValueError as e:
        raise ValueError(f"bundle {path}: {e}")


def save_graph_bundle(g: Graph, path) -> None:
    """Write ``g`` as a bundle directory (inverse of load_graph_bundle)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np.savetxt(path / "edges.tsv", g.edge_array(), fmt="%d", delimiter="\t")
    np.savetxt(path / "features.csv", g.features, fmt="%.17g", delimiter=",")
    np.savetxt(path / "labels.csv", g.labels, fmt="%d")
    meta = {"name": g.name, "C": g.num_classes}
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def largest_connected_component(g: Graph) -> Graph:
    """Restrict to the largest connected component, relabelling ids to 0..m-1.

    Node order is preserved, so relabelling keeps the original relative
    order. Ties between equal-size components go to the one containing the
    smallest original id.
    """
    if g.n == 0:
        return g
    ncomp, comp = connected_components(g.adjacency(), directed=False)
    sizes = np.bincount(comp, minlength=ncomp)
    best = sizes.max()
    candidates = np.flatnonzero(sizes == best)
    # first occurrence of each candidate component = its smallest node id
    first = np.array([int(np.argmax(comp == c)) for c in candidates])
    keep_comp = candidates[first.argmin()]
    nodes = np.flatnonzero(comp == keep_comp)
    if nodes.size == g.n:
        return g
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[nodes] = np.arange(nodes.size)
    edges = g.edge_array()
    inside = (remap[edges[:, 0]] >= 0) & (remap[edges[:, 1]] >= 0)
    edges = remap[edges[inside]]
    return Graph.build(
        edges,
        g.features[nodes],
        g.labels[nodes],
        num_classes=g.num_classes,
        name=g.name,
    )


def bfs_within(g: Graph, source: int, radius: int) -> dict[int, int]:
    """Hop distances from ``source`` for every node within ``radius`` hops."""
    if not 0 <= source < g.n:
        raise ValueError(f"source {source} out of range")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    dist = {source: 0}
    frontier = [source]
    for depth in range(1, radius + 1):
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                w = int(w)
                if w not in dist:
                    dist[w] = depth
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return dist


def flip_edge(g: Graph, u: int, v: int) -> Graph:
    """Toggle the undirected edge (u, v), returning a new Graph.

    Features and labels are shared with the input; only the structure
    arrays are rebuilt. Applying the same flip twice is the identity.
    """
    if u == v:
        raise ValueError("cannot flip a self-loop")
    if not (0 <= u < g.n and 0 <= v < g.n):
        raise ValueError(f"flip endpoint out of range: ({u}, {v})")
    lo, hi = (u, v) if u < v else (v, u)
    plo = g.indptr[lo] + np.searchsorted(g.neighbors(lo), hi)
    phi = g.indptr[hi] + np.searchsorted(g.neighbors(hi), lo)
    present = g.has_edge(u, v)
    if present:
        indices = np.delete(g.indices, [plo, phi])
        step = -1
    else:
        # plo <= phi always, and on a tie the earlier slot belongs to row lo,
        # so this value order keeps both rows sorted
        indices = np.insert(g.indices, [plo, phi], [hi, lo])
        step = 1
    indptr = g.indptr.copy()
    indptr[u + 1 :] += step
    indptr[v + 1 :] += step
    degrees = g.degrees.copy()
    degrees[u] += step
    degrees[v] += step
    return Graph(
        n=g.n,
        indptr=indptr,
        indices=indices,
        features=g.features,
        labels=g.labels,
        num_classes=g.num_classes,
        degrees=degrees,
        name=g.name,
    )


def apply_flips(g: Graph, flips) -> Graph:
    """Apply a sequence of (u, v) or (u, v, action) flips in order."""
    for f in flips:
        u, v = int(f[0]), int(f[1])
        if len(f) > 2:
            action = f[2]
            present = g.has_edge(u, v)
            if (action == "remove") != present:
                raise ValueError(
                    f"flip ({u}, {v}, {action}) inconsistent with graph state"
                )
        g = flip_edge(g, u, v)
    return g


def random_split(g: Graph, train_frac: float, val_frac: float, seed: int) -> Split:
    """Random disjoint split with sizes round(frac * n); rest is test."""
    if not 0 < train_frac < 1 or val_frac < 0 or train_frac + val_frac >= 1:
        raise ValueError(f"bad split fractions ({train_frac}, {val_frac})")
    rng = np.random.default_rng(np.random.SeedSequence([seed, g.n]))
    perm = rng.permutation(g.n)
    a = int(round(train_frac * g.n))
    b = int(round(val_frac * g.n))
    return Split(
        train=np.sort(perm[:a]),
        validation=np.sort(perm[a : a + b]),
        test=np.sort(perm[a + b :]),
    )


def row_normalize_features(g: Graph) -> Graph:
    """Scale each feature row to unit sum; all-zero rows stay zero."""
    sums = g.features.sum(axis=1, keepdims=True)
    sums[sums == 0] = 1.0
    return Graph(
        n=g.n,
        indptr=g.indptr,
        indices=g.indices,
        features=g.features / sums,
        labels=g.labels,
        num_classes=g.num_classes,
        degrees=g.degrees,
        name=g.name,
    )


def _decode_triangle(idx: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Map flat indices in [0, s(s-1)/2) to pairs (i, j) with i < j."""

    def before(i):
        return i * (s - 1) - i * (i - 1) // 2

    b = 2 * s - 1
    i = ((b - np.sqrt(b * b - 8.0 * idx)) / 2).astype(np.int64)
    # float roundoff can land one row off; nudge back into place
    for _ in range(2):
        i = np.where(before(i) > idx, i - 1, i)
        i = np.where(before(i + 1) <= idx, i + 1, i)
    j = idx - before(i) + i + 1
    return i, j


def _sample_distinct(rng, count: int, m: int) -> np.ndarray:
    """m distinct ints from [0, count) without materializing the range."""
    if m >= count:
        return np.arange(count, dtype=np.int64)
    if 3 * m >= count:
        return rng.permutation(count)[:m].astype(np.int64)
    chosen = np.unique(rng.integers(0, count, size=m + 64))
    while chosen.size < m:
        more = rng.integers(0, count, size=2 * (m - chosen.size) + 64)
        chosen = np.union1d(chosen, more)
    return rng.permutation(chosen)[:m].astype(np.int64)


def generate_sbm(
    sizes, p_in: float, p_out: float, feature_dim: int, seed: int, noise: float = 0.1
) -> Graph:
    """Stochastic block model with block-indicator features plus noise.

    Labels are block ids. Edge counts per block pair are Binomial; the
    realized pairs are drawn by index without touching an n x n matrix,
    so large sparse graphs stay cheap.
    """
    sizes = [int(s) for s in sizes]
    if not sizes or any(s <= 0 for s in sizes):
        raise ValueError("block sizes must be positive")
    if not 0 <= p_out < p_in <= 1:
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got ({p_in}, {p_out})")
    if feature_dim < 1:
        raise ValueError("feature_dim must be >= 1")
    nblocks = len(sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, nblocks]))

    chunks = []
    for a in range(nblocks):
        for b in range(a, nblocks):
            if a == b:
                count = sizes[a] * (sizes[a] - 1) // 2
                p = p_in
            else:
                count = sizes[a] * sizes[b]
                p = p_out
            if count == 0 or p == 0.0:
                continue
            m = int(rng.binomial(count, p))
            if m == 0:
                continue
            flat = _sample_distinct(rng, count, m)
            if a == b:
                i, j = _decode_triangle(flat, sizes[a])
                chunks.append(np.column_stack([offsets[a] + i, offsets[a] + j]))
            else:
                i, j = np.divmod(flat, sizes[b])
                chunks.append(np.column_stack([offsets[a] + i, offsets[b] + j]))
    edges = (
        np.concatenate(chunks, axis=0) if chunks else np.empty((0, 2), dtype=np.int64)
    )

    labels = np.repeat(np.arange(nblocks, dtype=np.int64), sizes)
    features = np.zeros((n, feature_dim))
    features[np.arange(n), labels % feature_dim] = 1.0
    features += noise * rng.standard_normal((n, feature_dim))
    return Graph.build(edges, features, labels, num_classes=nblocks, name="sbm")
