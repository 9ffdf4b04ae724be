"""Degree-mixing statistics and the assortativity-change metric.

These use raw degrees (no self-loop offset): they describe the graph
itself, not the propagation operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, apply_flips


class UndefinedAssortativityError(ValueError):
    """Raised when the degree distribution at edge endpoints has no variance."""


@dataclass
class DegreeMixing:
    """Joint endpoint-degree distribution over directed edge slots.

    ``joint[(i, j)]`` is the probability that a uniformly chosen directed
    edge runs from a degree-i node to a degree-j node; each undirected
    edge contributes both directions with weight 1/(2m). Symmetric by
    construction, marginals equal on both sides.
    """

    joint: dict[tuple[int, int], float]
    marginal: dict[int, float]


def degree_mixing(g: Graph) -> DegreeMixing:
    edges = g.edge_array()
    if edges.shape[0] == 0:
        raise UndefinedAssortativityError("graph has no edges")
    du = g.degrees[edges[:, 0]]
    dv = g.degrees[edges[:, 1]]
    w = 1.0 / (2.0 * edges.shape[0])
    joint: dict[tuple[int, int], float] = {}
    marginal: dict[int, float] = {}
    for i, j in zip(np.concatenate([du, dv]), np.concatenate([dv, du])):
        key = (int(i), int(j))
        joint[key] = joint.get(key, 0.0) + w
        marginal[int(i)] = marginal.get(int(i), 0.0) + w
    return DegreeMixing(joint=joint, marginal=marginal)


def assortativity(g: Graph) -> float:
    """Pearson correlation of degrees across edges.

    r = (sum_ij ij (M_ij - a_i a_j)) / sigma^2 for the undirected case.
    Raises UndefinedAssortativityError when every edge endpoint has the
    same degree (zero variance).
    """
    mix = degree_mixing(g)
    mean = sum(i * p for i, p in mix.marginal.items())
    second = sum(i * i * p for i, p in mix.marginal.items())
    var = second - mean * mean
    if var <= 1e-12 * max(1.0, mean * mean):
        raise UndefinedAssortativityError(
            "all edge endpoints share one degree; assortativity undefined"
        )
    cov = sum(i * j * p for (i, j), p in mix.joint.items()) - mean * mean
    return cov / var


@dataclass
class AssortativityReport:
    r_clean: float
    per_target: list[float]
    dac: float


def dac(g: Graph, perturbations) -> AssortativityReport:
    """Mean relative assortativity change over per-target perturbations.

    Each perturbation is applied to the clean graph on its own:
    dac = mean_i |r_clean - r_i| / |r_clean|. Empty input gives 0.
    """
    r_clean = assortativity(g)
    if r_clean == 0.0:
        raise UndefinedAssortativityError("clean assortativity is zero")
    rs = []
    for p in perturbations:
        flips = p.flips if hasattr(p, "flips") else p
        rs.append(assortativity(apply_flips(g, flips)))
    value = (
        float(np.mean([abs(r_clean - r) for r in rs])) / abs(r_clean) if rs else 0.0
    )
    return AssortativityReport(r_clean=r_clean, per_target=rs, dac=value)
