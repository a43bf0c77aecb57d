"""Shortest rebalancing cycles in a channel graph.

For every channel (u, v), the shortest cycle that uses it is the channel
itself plus the shortest u-v path avoiding it, found by BFS.  The graph is
undirected and unweighted; parallel channels between the same pair are
merged first, so a merged pair never forms a 2-cycle with itself.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _kernels
from .core import PcnError


class ParseError(PcnError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class EdgeNotFound(PcnError):
    pass


def _key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class ChannelGraph:
    nodes: set[str] = field(default_factory=set)
    edges: set[tuple[str, str]] = field(default_factory=set)  # stored as (min, max)
    self_loops_dropped: int = 0
    duplicates_merged: int = 0

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            self.self_loops_dropped += 1
            return
        k = _key(a, b)
        if k in self.edges:
            self.duplicates_merged += 1
            return
        self.nodes.update(k)
        self.edges.add(k)

    def has_edge(self, a: str, b: str) -> bool:
        return _key(a, b) in self.edges

    @classmethod
    def from_edges(cls, pairs) -> "ChannelGraph":
        g = cls()
        for a, b in pairs:
            g.add_edge(str(a), str(b))
        return g

    def csr(self) -> tuple[list[str], np.ndarray, np.ndarray, list[tuple[str, str]]]:
        """Sorted node ids, CSR adjacency, and the sorted edge list."""
        names = sorted(self.nodes)
        index = {n: i for i, n in enumerate(names)}
        edges = sorted(self.edges)
        deg = np.zeros(len(names) + 1, dtype=np.int64)
        for a, b in edges:
            deg[index[a] + 1] += 1
            deg[index[b] + 1] += 1
        indptr = np.cumsum(deg)
        indices = np.empty(2 * len(edges), dtype=np.int64)
        fill = indptr[:-1].copy()
        for a, b in edges:
            i, j = index[a], index[b]
            indices[fill[i]] = j
            fill[i] += 1
            indices[fill[j]] = i
            fill[j] += 1
        return names, indptr, indices, edges


def parse_edge_list(text: str) -> ChannelGraph:
    g = ChannelGraph()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row = next(csv.reader([stripped]))
        if len(row) != 2:
            raise ParseError(lineno, f"expected 'node_a,node_b', got {line!r}")
        a, b = row[0].strip(), row[1].strip()
        if not a or not b:
            raise ParseError(lineno, "empty node id")
        g.add_edge(a, b)
    return g


def load_edge_list(path: str | Path) -> ChannelGraph:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))


def shortest_cycle_through_edge(g: ChannelGraph, edge: tuple[str, str], backend: str | None = None) -> int | None:
    a, b = edge
    if not g.has_edge(a, b):
        raise EdgeNotFound(f"no channel between {a!r} and {b!r}")
    names, indptr, indices, _ = g.csr()
    index = {n: i for i, n in enumerate(names)}
    out = _kernels.edge_cycle_lengths(
        indptr, indices, np.array([index[a]]), np.array([index[b]]), len(names), backend=backend
    )
    return int(out[0]) or None


def edge_cycle_lengths(g: ChannelGraph, backend: str | None = None) -> dict[tuple[str, str], int | None]:
    names, indptr, indices, edges = g.csr()
    if not edges:
        return {}
    index = {n: i for i, n in enumerate(names)}
    us = np.array([index[a] for a, _ in edges], dtype=np.int64)
    vs = np.array([index[b] for _, b in edges], dtype=np.int64)
    out = _kernels.edge_cycle_lengths(indptr, indices, us, vs, len(names), backend=backend)
    return {e: (int(n) or None) for e, n in zip(edges, out)}


@dataclass(frozen=True)
class CycleHistogram:
    counts: dict[int, int]
    not_in_cycle: int

    @property
    def total_edges(self) -> int:
        return sum(self.counts.values()) + self.not_in_cycle

    @property
    def average(self) -> Fraction | None:
        n = sum(self.counts.values())
        if n == 0:
            return None
        return Fraction(sum(k * c for k, c in self.counts.items()), n)

    def average_text(self) -> str:
        avg = self.average
        if avg is None:
            return "NA"
        # round half up at 2 decimals, exactly
        cents = (avg * 100 * 2 + 1) // 2
        return f"{cents // 100}.{cents % 100:02d}"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["length", "count"])
        for k in sorted(self.counts):
            w.writerow([k, self.counts[k]])
        w.writerow(["NA", self.not_in_cycle])
        w.writerow(["average", self.average_text()])
        return buf.getvalue()


def cycle_histogram(g: ChannelGraph, backend: str | None = None) -> CycleHistogram:
    lengths = edge_cycle_lengths(g, backend)
    counts = Counter(n for n in lengths.values() if n is not None)
    missing = sum(1 for n in lengths.values() if n is None)
    return CycleHistogram(dict(sorted(counts.items())), missing)
