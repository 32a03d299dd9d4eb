"""Temporal hypergraph container, TSV ingestion and indexed queries.

A hypergraph is stored as an ordered list of edges (sorted tuples of dense
integer node ids) together with two indices built once at construction:
``first_seen`` (edge index at which each node first appears) and
``incidence`` (sorted edge indices containing each node).  Instances are
treated as immutable after construction.
"""

from __future__ import annotations

import io
import math
from bisect import bisect_left, bisect_right
from typing import IO, Iterable, Sequence

import numpy as np


class HypergraphFormatError(ValueError):
    """Raised for malformed hypergraph input."""


class TemporalHypergraph:
    """Ordered sequence of timestamped hyperedges over dense node ids.

    Parameters
    ----------
    edges : iterable of iterables of int
        Node ids of each edge, in temporal order.  Ids must be dense
        (``0..n-1``) across the whole hypergraph.
    timestamps : sequence of int or float, optional
        One per edge; defaults to the edge index.
    labels : sequence of str, optional
        Original node labels, ``labels[v]`` for node ``v``.
    """

    def __init__(self, edges, timestamps=None, labels=None):
        canon = []
        for idx, e in enumerate(edges):
            t = tuple(sorted(int(v) for v in e))
            if not t:
                raise HypergraphFormatError(f"edge {idx} is empty")
            if any(t[i] == t[i + 1] for i in range(len(t) - 1)):
                raise HypergraphFormatError(f"edge {idx} contains a duplicate node")
            if t[0] < 0:
                raise HypergraphFormatError(f"edge {idx} contains a negative node id")
            canon.append(t)
        self.edges: list[tuple[int, ...]] = canon
        m = len(canon)
        if timestamps is None:
            self.timestamps = list(range(m))
        else:
            self.timestamps = list(timestamps)
            if len(self.timestamps) != m:
                raise ValueError("need exactly one timestamp per edge")

        self._build_index()
        if any(not lst for lst in self.incidence):
            raise HypergraphFormatError("node ids are not dense (some id in 0..n-1 is unused)")

        if labels is not None:
            labels = [str(x) for x in labels]
            if len(labels) != self.n:
                raise ValueError(f"expected {self.n} labels, got {len(labels)}")
        self.labels = labels

    @classmethod
    def _trusted(cls, edges, timestamps, labels=None):
        """Build from edges already known to be sorted, duplicate free and dense."""
        h = cls.__new__(cls)
        h.edges = edges
        h.timestamps = timestamps
        h.labels = labels
        h._build_index()
        return h

    def _build_index(self):
        edges = self.edges
        m = len(edges)
        n = 1 + max((e[-1] for e in edges), default=-1)
        incidence: list[list[int]] = [[] for _ in range(n)]
        for idx, e in enumerate(edges):
            for v in e:
                incidence[v].append(idx)
        self.incidence = incidence
        self.first_seen = np.fromiter(
            (lst[0] if lst else -1 for lst in incidence), dtype=np.int64, count=n
        )
        # nodes_before[t] = |N(t)|: nodes present before edge t is added
        if m:
            new_per_edge = np.bincount(self.first_seen[self.first_seen >= 0], minlength=m)
        else:
            new_per_edge = np.zeros(0, np.int64)
        self.nodes_before = np.concatenate([[0], np.cumsum(new_per_edge)]).astype(np.int64)

    @property
    def n(self) -> int:
        return len(self.incidence)

    @property
    def m(self) -> int:
        return len(self.edges)

    def __len__(self):
        return len(self.edges)

    def __repr__(self):
        return f"TemporalHypergraph(n={self.n}, m={self.m})"

    def __eq__(self, other):
        if not isinstance(other, TemporalHypergraph):
            return NotImplemented
        return self.edges == other.edges and self.timestamps == other.timestamps

    def degrees(self, upto: int | None = None) -> np.ndarray:
        """Degree of every node counting edges ``0..upto`` (all edges by default)."""
        if upto is None or upto >= self.m - 1:
            return np.fromiter((len(lst) for lst in self.incidence), dtype=np.int64, count=self.n)
        return np.fromiter(
            (bisect_right(lst, upto) for lst in self.incidence), dtype=np.int64, count=self.n
        )

    def edge_sizes(self, upto: int | None = None) -> np.ndarray:
        stop = self.m if upto is None else max(0, min(upto + 1, self.m))
        return np.fromiter((len(self.edges[i]) for i in range(stop)), dtype=np.int64, count=stop)

    def prefix(self, m: int) -> "TemporalHypergraph":
        """Hypergraph made of the first ``m`` edges (ids stay dense)."""
        m = max(0, min(m, self.m))
        labels = None
        if self.labels is not None:
            labels = self.labels[: int(self.nodes_before[m])]
        return TemporalHypergraph._trusted(self.edges[:m], self.timestamps[:m], labels)

    def relabeled(self) -> "TemporalHypergraph":
        """Copy with node ids reassigned in order of first appearance."""
        edges, order = relabel_by_first_appearance(self.edges)
        labels = None
        if self.labels is not None:
            labels = [self.labels[v] for v in order]
        return TemporalHypergraph._trusted(edges, list(self.timestamps), labels)

    def reordered(self, order: Sequence[int]) -> "TemporalHypergraph":
        """Hypergraph whose edge sequence is ``edges[order[0]], edges[order[1]], ...``.

        Timestamps become edge indices and nodes are relabeled by first
        appearance in the new order; labels follow their nodes.
        """
        edges = [self.edges[i] for i in order]
        new_edges, old_ids = relabel_by_first_appearance(edges)
        labels = None
        if self.labels is not None:
            labels = [self.labels[v] for v in old_ids]
        return TemporalHypergraph._trusted(new_edges, list(range(len(new_edges))), labels)


def relabel_by_first_appearance(edges: Sequence[Sequence[int]]):
    """Map node ids to ``0..n-1`` by first appearance.

    Returns the relabeled, sorted edges and the list of original ids
    (``old_ids[new] = old``).
    """
    mapping: dict[int, int] = {}
    old_ids: list[int] = []
    out = []
    for e in edges:
        for v in e:
            if v not in mapping:
                mapping[v] = len(old_ids)
                old_ids.append(v)
        out.append(tuple(sorted(mapping[v] for v in e)))
    return out, old_ids


# ----------------------------------------------------------------------
# TSV I/O
# ----------------------------------------------------------------------


def _parse_time(token: str, lineno: int):
    try:
        return int(token)
    except ValueError:
        pass
    try:
        t = float(token)
    except ValueError:
        raise HypergraphFormatError(f"line {lineno}: bad timestamp {token!r}") from None
    if not math.isfinite(t):
        raise HypergraphFormatError(f"line {lineno}: non-finite timestamp {token!r}")
    return t


def load_tsv(stream: IO | str, timestamps: bool = True) -> TemporalHypergraph:
    """Read a hypergraph from ``<timestamp>\\t<node>,<node>,...`` lines.

    ``stream`` may be a binary or text file object, or a path.  Blank lines
    and lines starting with ``#`` are ignored.  With ``timestamps=False``
    each line holds only the node list and the edge index is used as the
    timestamp.  Edges are sorted stably by timestamp; node tokens are mapped
    to dense ids in order of first appearance in the sorted sequence.
    """
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, "rb") as fh:
            return load_tsv(fh, timestamps=timestamps)

    records = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        if timestamps:
            parts = line.split("\t")
            if len(parts) != 2:
                raise HypergraphFormatError(
                    f"line {lineno}: expected '<timestamp>\\t<nodes>', got {len(parts)} field(s)"
                )
            t = _parse_time(parts[0].strip(), lineno)
            node_field = parts[1]
        else:
            if "\t" in line:
                raise HypergraphFormatError(f"line {lineno}: unexpected tab (no-timestamps mode)")
            t = None
            node_field = line
        tokens = node_field.split(",")
        if any(tok == "" for tok in tokens):
            raise HypergraphFormatError(f"line {lineno}: empty node token or empty edge")
        if len(set(tokens)) != len(tokens):
            raise HypergraphFormatError(f"line {lineno}: duplicate node in edge")
        records.append((t, tokens))

    if not records:
        raise HypergraphFormatError("no edges in input")
    if timestamps:
        order = sorted(range(len(records)), key=lambda i: records[i][0])
    else:
        order = range(len(records))
        records = [(i, toks) for i, (_, toks) in enumerate(records)]

    mapping: dict[str, int] = {}
    labels: list[str] = []
    edges = []
    times = []
    for i in order:
        t, tokens = records[i]
        ids = []
        for tok in tokens:
            v = mapping.get(tok)
            if v is None:
                v = mapping[tok] = len(labels)
                labels.append(tok)
            ids.append(v)
        edges.append(tuple(sorted(ids)))
        times.append(t)
    return TemporalHypergraph._trusted(edges, times, labels)


def _format_time(t) -> str:
    if isinstance(t, (int, np.integer)):
        return str(int(t))
    t = float(t)
    if t.is_integer():
        return str(int(t))
    return repr(t)


def write_tsv(h: TemporalHypergraph, stream: IO | str, use_labels: bool = False) -> None:
    """Write ``h`` in the canonical TSV format.

    Node tokens are the dense ids unless ``use_labels`` is set and the
    hypergraph carries labels.
    """
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, "wb") as fh:
            write_tsv(h, fh, use_labels=use_labels)
        return
    names = h.labels if (use_labels and h.labels is not None) else None
    buf = io.StringIO()
    for t, e in zip(h.timestamps, h.edges):
        if names is None:
            nodes = ",".join(map(str, e))
        else:
            nodes = ",".join(names[v] for v in e)
        buf.write(f"{_format_time(t)}\t{nodes}\n")
    data = buf.getvalue()
    if isinstance(stream, io.TextIOBase):
        stream.write(data)
    else:
        stream.write(data.encode("utf-8"))


def write_names(h: TemporalHypergraph, path) -> None:
    """Write the ``.names`` sidecar: line ``i`` holds the label of node ``i``."""
    labels = h.labels if h.labels is not None else [str(v) for v in range(h.n)]
    with open(path, "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(lab + "\n")


def read_names(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


# ----------------------------------------------------------------------
# Queries
# ----------------------------------------------------------------------


def degree(h: TemporalHypergraph, v: int, upto: int) -> int:
    """Number of edges among ``edges[0..upto]`` containing ``v``.

    Unknown nodes have degree 0; ``upto`` is clamped to the last edge.
    """
    if v < 0 or v >= h.n:
        return 0
    if upto < 0:
        return 0
    return bisect_right(h.incidence[v], min(upto, h.m - 1))


def snapshot_counts(h: TemporalHypergraph, upto: int) -> tuple[int, int]:
    """``(n, m)`` of the prefix ending at edge ``upto`` (inclusive, clamped)."""
    upto = min(upto, h.m - 1)
    if upto < 0:
        return 0, 0
    return int(h.nodes_before[upto + 1]), upto + 1


def candidate_sources(h: TemporalHypergraph, e: Iterable[int], upto: int) -> list[int]:
    """Sorted indices ``< upto`` of edges sharing at least one node with ``e``."""
    found: set[int] = set()
    n = h.n
    for v in e:
        if 0 <= v < n:
            lst = h.incidence[v]
            found.update(lst[: bisect_left(lst, upto)])
    return sorted(found)
