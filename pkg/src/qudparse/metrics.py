"""Dependency-tree statistics, gap degree, and cross-tree attachment.

Conventions, recorded in every report header: height counts edges (a
chain over n sentences has height n-1); the arc length of the edge into
sentence i is ``abs(i - parent(i))``, which equals ``i - parent(i)`` for
question-derived trees since anchors precede their answers; attachment
divides matching parents by n-1 so identical trees score exactly 1.0
(the divide-by-n variant is available for comparison with reports that
use it).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from qudparse.core import DepTree, QudParseError

REPORT_COLUMNS = (
    "height", "norm_arc_len", "prop_leaf", "avg_depth", "right_branch", "att_score",
)
GAP_COLUMNS = ("gap_max", "gap_total")

CONVENTION_NOTES = (
    "height counts edges",
    "arc length of the edge into i is abs(i - parent)",
    "att_score divides matching parents by n-1",
)


class MetricsError(QudParseError):
    """Metric preconditions failed (size or alignment mismatch)."""


@dataclass(frozen=True)
class TreeStats:
    height: int
    norm_arc_len: float
    prop_leaf: float
    avg_depth: float
    right_branch: float


@dataclass(frozen=True)
class MeanStats:
    """Arithmetic means of the per-tree statistics; fields may be
    fractional even where the per-tree value is integral."""

    height: float
    norm_arc_len: float
    prop_leaf: float
    avg_depth: float
    right_branch: float


@dataclass(frozen=True)
class GapReport:
    gap_degree_max: int
    gap_total: int


def _depths(n: int, root: int, parents: Mapping[int, int]) -> dict[int, int]:
    children: dict[int, list[int]] = {i: [] for i in range(1, n + 1)}
    for child, parent in parents.items():
        children[parent].append(child)
    depths = {root: 0}
    frontier = [root]
    while frontier:
        node = frontier.pop()
        for child in children[node]:
            depths[child] = depths[node] + 1
            frontier.append(child)
    return depths


def _stats_of(nodes: Sequence[int], root: int, parents: Mapping[int, int]) -> TreeStats:
    depths = _depths(max(nodes), root, {c: p for c, p in parents.items() if c in nodes})
    depths = {i: depths[i] for i in nodes}
    size = len(nodes)
    non_root = [i for i in nodes if i != root]
    arcs = [abs(i - parents[i]) for i in non_root]
    parent_set = {parents[i] for i in non_root}
    leaves = sum(1 for i in nodes if i not in parent_set)
    return TreeStats(
        height=max(depths.values()),
        norm_arc_len=(sum(arcs) / len(arcs)) / size if arcs else 0.0,
        prop_leaf=leaves / size,
        avg_depth=sum(depths.values()) / size,
        right_branch=sum(1 for i in non_root if parents[i] == i - 1) / size,
    )


def stats(tree: DepTree) -> TreeStats:
    """The five per-tree statistics, with empty means taken as 0 for n=1."""
    parents = {i: tree.parent_of(i) for i in range(1, tree.n + 1) if i != tree.root}
    return _stats_of(list(range(1, tree.n + 1)), tree.root, parents)


def partial_stats(n: int, parents: Mapping[int, int]) -> tuple[MeanStats, int]:
    """Statistics of a possibly partial tree, averaged per connected
    component; returns the means and the component count (1 means the
    tree was complete).

    Nodes without a recorded parent act as component roots; each
    component's proportions use the component size.
    """
    for child, parent in parents.items():
        if not 1 <= child <= n or not 1 <= parent <= n or child == parent:
            raise MetricsError(f"bad edge {parent} -> {child} for n={n}")
    roots = [i for i in range(1, n + 1) if i not in parents]
    if not roots:
        raise MetricsError("no component root: every node has a parent")
    component_of: dict[int, int] = {}
    for i in range(1, n + 1):
        node, hops = i, 0
        while node in parents and hops <= n:
            node = parents[node]
            hops += 1
        if hops > n:
            raise MetricsError(f"cycle through node {i}")
        component_of[i] = node
    per_component: list[TreeStats] = []
    for root in roots:
        nodes = sorted(i for i in range(1, n + 1) if component_of[i] == root)
        per_component.append(
            _stats_of(nodes, root, {i: parents[i] for i in nodes if i != root})
        )
    k = len(per_component)
    return (
        MeanStats(
            height=sum(s.height for s in per_component) / k,
            norm_arc_len=sum(s.norm_arc_len for s in per_component) / k,
            prop_leaf=sum(s.prop_leaf for s in per_component) / k,
            avg_depth=sum(s.avg_depth for s in per_component) / k,
            right_branch=sum(s.right_branch for s in per_component) / k,
        ),
        k,
    )


def attachment_score(a: DepTree, b: DepTree, paper_convention: bool = False) -> float:
    """Fraction of sentences 2..n assigned the same parent by both trees.

    By default the count is divided by n-1 (identical trees score 1.0);
    ``paper_convention`` divides by n instead.  Both trees must cover the
    same sentences and be rooted at sentence 1.
    """
    if a.n != b.n:
        raise MetricsError(f"size mismatch: {a.n} vs {b.n}")
    if a.root != 1 or b.root != 1:
        raise MetricsError("attachment is defined for trees rooted at sentence 1")
    if a.n == 1:
        return 0.0 if paper_convention else 1.0
    matches = sum(1 for i in range(2, a.n + 1) if a.parent_of(i) == b.parent_of(i))
    return matches / (a.n if paper_convention else a.n - 1)


def _yields(n: int, parents: Mapping[int, int]) -> dict[int, set[int]]:
    yields: dict[int, set[int]] = {i: {i} for i in range(1, n + 1)}
    for i in range(1, n + 1):
        node = i
        while node in parents:
            node = parents[node]
            yields[node].add(i)
    return yields


def _discontinuities(indices: set[int]) -> int:
    ordered = sorted(indices)
    return sum(1 for a, b in zip(ordered, ordered[1:]) if b != a + 1)


def gap_report(tree: DepTree) -> GapReport:
    """Non-projectivity measures: per-node yield discontinuities, reported
    as the maximum over nodes and the sum over nodes (both 0 for
    projective trees)."""
    parents = {i: tree.parent_of(i) for i in range(1, tree.n + 1) if i != tree.root}
    return gap_of_parent_map(tree.n, parents)


def gap_of_parent_map(n: int, parents: Mapping[int, int]) -> GapReport:
    gaps = [_discontinuities(indices) for indices in _yields(n, parents).values()]
    return GapReport(gap_degree_max=max(gaps), gap_total=sum(gaps))


@dataclass(frozen=True)
class CorpusRow:
    """One row of a corpus table: mean statistics over a list of trees."""

    label: str
    trees: int
    stats: MeanStats
    gap_max: float
    gap_total: float
    att_score: "float | None" = None
    partial: bool = False


def corpus_report(
    trees: Sequence[DepTree],
    paired: "Sequence[DepTree] | None" = None,
    label: str = "trees",
    paper_convention: bool = False,
) -> CorpusRow:
    """Mean statistics over a corpus, plus mean attachment against an
    aligned second corpus when given."""
    if not trees:
        raise MetricsError("empty tree list")
    att = None
    if paired is not None:
        if len(paired) != len(trees):
            raise MetricsError(
                f"alignment mismatch: {len(trees)} trees vs {len(paired)} paired"
            )
        att = sum(
            attachment_score(a, b, paper_convention=paper_convention)
            for a, b in zip(trees, paired)
        ) / len(trees)
    per_tree = [stats(t) for t in trees]
    gaps = [gap_report(t) for t in trees]
    k = len(trees)
    return CorpusRow(
        label=label,
        trees=k,
        stats=MeanStats(
            height=sum(s.height for s in per_tree) / k,
            norm_arc_len=sum(s.norm_arc_len for s in per_tree) / k,
            prop_leaf=sum(s.prop_leaf for s in per_tree) / k,
            avg_depth=sum(s.avg_depth for s in per_tree) / k,
            right_branch=sum(s.right_branch for s in per_tree) / k,
        ),
        gap_max=sum(g.gap_degree_max for g in gaps) / k,
        gap_total=sum(g.gap_total for g in gaps) / k,
        att_score=att,
    )


def _row_values(row: CorpusRow) -> list[str]:
    cells = [
        row.stats.height, row.stats.norm_arc_len, row.stats.prop_leaf,
        row.stats.avg_depth, row.stats.right_branch,
    ]
    out = [repr(float(v)) for v in cells]
    out.append("" if row.att_score is None else repr(float(row.att_score)))
    out.extend([repr(float(row.gap_max)), repr(float(row.gap_total))])
    return out


def write_table(rows: Iterable[CorpusRow], handle: IO[str], pretty: bool = False) -> None:
    """Emit rows as a machine-readable table (tab-separated, full precision)
    or as aligned text with two-decimal cells."""
    header = ["label", "trees", *REPORT_COLUMNS, *GAP_COLUMNS, "partial"]
    for note in CONVENTION_NOTES:
        handle.write(f"# {note}\n")
    if not pretty:
        handle.write("\t".join(header) + "\n")
        for row in rows:
            cells = [row.label, str(row.trees), *_row_values(row),
                     "yes" if row.partial else "no"]
            handle.write("\t".join(cells) + "\n")
        return
    body = []
    for row in rows:
        cells = [
            row.label, str(row.trees),
            f"{row.stats.height:.2f}", f"{row.stats.norm_arc_len:.2f}",
            f"{row.stats.prop_leaf:.2f}", f"{row.stats.avg_depth:.2f}",
            f"{row.stats.right_branch:.2f}",
            "-" if row.att_score is None else f"{row.att_score:.2f}",
            f"{row.gap_max:.2f}", f"{row.gap_total:.2f}",
            "yes" if row.partial else "no",
        ]
        body.append(cells)
    widths = [max(len(header[k]), *(len(r[k]) for r in body)) if body else len(header[k])
              for k in range(len(header))]
    handle.write("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip() + "\n")
    for cells in body:
        handle.write("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip() + "\n")
