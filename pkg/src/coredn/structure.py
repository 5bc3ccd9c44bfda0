"""Dependency graphs from fitted networks and structure comparison."""
from __future__ import annotations

import csv
from typing import NamedTuple

import numpy as np

from .errors import DataError


class Edge(NamedTuple):
    source: int
    target: int
    weight: float


def adjacency(dn) -> np.ndarray:
    """Entry (j, i) is the coefficient of variable j in the model of variable i.

    Intercepts are excluded and the diagonal is zero.
    """
    return dn.weight_matrix()


def top_positive_edges(A, count: int = 70) -> list[Edge]:
    """The ``count`` largest strictly positive off-diagonal entries, globally.

    Ties go to the lexicographically smaller (source, target) pair.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    A = np.asarray(A, dtype=np.float64)
    src, dst = np.nonzero(A > 0)
    keep = src != dst
    src, dst = src[keep], dst[keep]
    vals = A[src, dst]
    # lexsort sorts by the last key first.
    order = np.lexsort((dst, src, -vals))[:count]
    return [Edge(int(src[t]), int(dst[t]), float(vals[t])) for t in order]


def frobenius_difference(A, B) -> float:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise DataError(f"adjacency shapes differ: {A.shape} vs {B.shape}")
    D = A - B
    return float(np.sqrt(np.sum(D * D)))


def _label(j, names):
    return names[j] if names else str(j)


def write_edges_csv(edges, path, names=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["from", "to", "weight"])
        for e in edges:
            writer.writerow([_label(e.source, names), _label(e.target, names), repr(e.weight)])


def edges_to_dot(edges, names=None, d: int | None = None, graph_name="dependency_network") -> str:
    """Graphviz digraph; nodes without edges are listed when ``d`` is given."""
    lines = [f"digraph {graph_name} {{"]
    if d is not None:
        for j in range(d):
            lines.append(f'  "{_label(j, names)}";')
    for e in edges:
        lines.append(
            f'  "{_label(e.source, names)}" -> "{_label(e.target, names)}" [weight={e.weight!r}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
