import io
import random

import pytest

from qudparse.core import DepTree
from qudparse.metrics import (
    CorpusRow,
    MetricsError,
    attachment_score,
    corpus_report,
    gap_of_parent_map,
    gap_report,
    partial_stats,
    stats,
    write_table,
)


def chain(n):
    return DepTree.from_parent_map(n, {i: i - 1 for i in range(2, n + 1)})


def star(n):
    return DepTree.from_parent_map(n, {i: 1 for i in range(2, n + 1)})


def oracle_stats(tree):
    """Reference implementation via per-node parent chasing; no shared
    traversal code with the module under test."""
    n = tree.n

    def parent(i):
        return tree.parents[i - 1]

    def depth(i):
        d, node = 0, i
        while node != tree.root:
            node = parent(node)
            d += 1
        return d

    depths = [depth(i) for i in range(1, n + 1)]
    non_root = [i for i in range(1, n + 1) if i != tree.root]
    arcs = [abs(i - parent(i)) for i in non_root]
    have_children = {parent(i) for i in non_root}
    leaves = [i for i in range(1, n + 1) if i not in have_children]
    return (
        max(depths),
        (sum(arcs) / len(arcs)) / n if arcs else 0.0,
        len(leaves) / n,
        sum(depths) / n,
        sum(1 for i in non_root if parent(i) == i - 1) / n,
    )


def oracle_gap(tree):
    """Explicit yield sets built by walking every node's ancestor chain."""
    n = tree.n
    yields = {i: {i} for i in range(1, n + 1)}
    for x in range(1, n + 1):
        node = x
        while node != tree.root:
            node = tree.parents[node - 1]
            yields[node].add(x)
    gaps = []
    for members in yields.values():
        ordered = sorted(members)
        gaps.append(sum(1 for a, b in zip(ordered, ordered[1:]) if b > a + 1))
    return max(gaps), sum(gaps)


def random_tree(rng, n):
    return DepTree.from_parent_map(n, {i: rng.randint(1, i - 1) for i in range(2, n + 1)})


def random_any_root_tree(rng, n):
    order = list(range(1, n + 1))
    rng.shuffle(order)
    parents = {}
    for pos, node in enumerate(order[1:], start=1):
        parents[node] = order[rng.randint(0, pos - 1)]
    return DepTree.from_parent_map(n, parents, root=order[0])


def test_chain_of_five_closed_form():
    s = stats(chain(5))
    assert s.height == 4
    assert s.norm_arc_len == pytest.approx(0.2)
    assert s.prop_leaf == pytest.approx(0.2)
    assert s.avg_depth == pytest.approx(2.0)
    assert s.right_branch == pytest.approx(0.8)


def test_star_of_five_closed_form():
    s = stats(star(5))
    assert s.height == 1
    assert s.norm_arc_len == pytest.approx(0.5)
    assert s.prop_leaf == pytest.approx(0.8)
    assert s.avg_depth == pytest.approx(0.8)
    assert s.right_branch == pytest.approx(0.2)


def test_single_node_conventions():
    s = stats(DepTree(n=1, parents=(0,), root=1))
    assert s.height == 0
    assert s.prop_leaf == 1.0
    assert s.avg_depth == 0.0
    assert s.norm_arc_len == 0.0
    assert s.right_branch == 0.0


def test_stats_match_oracle_on_random_trees():
    rng = random.Random(2024)
    for _ in range(300):
        n = rng.randint(1, 10)
        tree = random_tree(rng, n) if rng.random() < 0.7 else random_any_root_tree(rng, n)
        s = stats(tree)
        assert (s.height, s.norm_arc_len, s.prop_leaf, s.avg_depth, s.right_branch) == \
            oracle_stats(tree)


def test_right_branch_is_maximal_iff_chain():
    rng = random.Random(8)
    for _ in range(100):
        n = rng.randint(2, 9)
        tree = random_tree(rng, n)
        s = stats(tree)
        is_chain = all(tree.parent_of(i) == i - 1 for i in range(2, n + 1))
        assert (s.right_branch == pytest.approx(1 - 1 / n)) == is_chain


def test_leaf_plus_internal_fractions_sum_to_one():
    rng = random.Random(9)
    for _ in range(50):
        tree = random_tree(rng, rng.randint(1, 10))
        s = stats(tree)
        internal = sum(
            1 for i in range(1, tree.n + 1)
            if any(tree.parent_of(j) == i for j in range(1, tree.n + 1) if j != tree.root)
        )
        assert s.prop_leaf + internal / tree.n == pytest.approx(1.0)


def test_attachment_identical_trees():
    assert attachment_score(chain(6), chain(6)) == 1.0


def test_attachment_hand_count():
    a = DepTree.from_parent_map(4, {2: 1, 3: 2, 4: 3})
    b = DepTree.from_parent_map(4, {2: 1, 3: 1, 4: 3})
    assert attachment_score(a, b) == pytest.approx(2 / 3)


def test_attachment_disjoint_parents():
    a = DepTree.from_parent_map(4, {2: 1, 3: 2, 4: 3})
    b = DepTree.from_parent_map(4, {2: 1, 3: 1, 4: 1})
    # parents differ at 3 and 4; sentence 2 always matches (only legal parent)
    assert attachment_score(a, b) == pytest.approx(1 / 3)
    c = DepTree.from_parent_map(3, {2: 1, 3: 1})
    d = DepTree.from_parent_map(3, {2: 1, 3: 2})
    assert attachment_score(c, d) == pytest.approx(1 / 2)


def test_attachment_symmetry():
    rng = random.Random(10)
    for _ in range(50):
        n = rng.randint(2, 10)
        a, b = random_tree(rng, n), random_tree(rng, n)
        assert attachment_score(a, b) == pytest.approx(attachment_score(b, a))


def test_attachment_size_mismatch():
    with pytest.raises(MetricsError):
        attachment_score(chain(3), chain(4))


def test_attachment_paper_convention_divides_by_n():
    assert attachment_score(chain(4), chain(4), paper_convention=True) == pytest.approx(3 / 4)


def test_gap_projective_chain():
    assert gap_report(chain(7)) == gap_report(chain(7))
    report = gap_report(chain(7))
    assert report.gap_degree_max == 0
    assert report.gap_total == 0


def test_gap_crossing_arcs():
    tree = DepTree.from_parent_map(4, {2: 1, 3: 1, 4: 2})
    report = gap_report(tree)
    assert report.gap_degree_max == 1
    assert report.gap_total == 1


def test_gap_matches_oracle_on_random_trees():
    rng = random.Random(77)
    for _ in range(300):
        tree = random_tree(rng, rng.randint(1, 8))
        report = gap_report(tree)
        assert (report.gap_degree_max, report.gap_total) == oracle_gap(tree)


def test_gap_zero_for_immediate_predecessor_trees():
    for n in range(1, 12):
        report = gap_report(chain(n))
        assert (report.gap_degree_max, report.gap_total) == (0, 0)


def test_partial_stats_complete_tree_equals_stats():
    tree = chain(5)
    means, components = partial_stats(5, {i: i - 1 for i in range(2, 6)})
    assert components == 1
    s = stats(tree)
    assert means.height == s.height
    assert means.avg_depth == pytest.approx(s.avg_depth)


def test_partial_stats_two_components():
    # parent of 4 unknown: components {1,2,3} rooted at 1 and {4,5} rooted at 4
    means, components = partial_stats(5, {2: 1, 3: 2, 5: 4})
    assert components == 2
    assert means.height == pytest.approx((2 + 1) / 2)
    assert means.prop_leaf == pytest.approx((1 / 3 + 1 / 2) / 2)


def test_partial_stats_rejects_cycles():
    with pytest.raises(MetricsError):
        partial_stats(3, {2: 3, 3: 2})


def test_corpus_report_identical_lists():
    row = corpus_report([chain(5)], paired=[chain(5)], label="demo")
    assert isinstance(row, CorpusRow)
    assert row.att_score == 1.0
    assert row.stats.height == pytest.approx(4.0)


def test_corpus_report_alignment_mismatch():
    with pytest.raises(MetricsError):
        corpus_report([chain(3)], paired=[chain(3), chain(3)])


def test_corpus_report_means():
    row = corpus_report([chain(5), star(5)])
    assert row.stats.height == pytest.approx(2.5)
    assert row.stats.norm_arc_len == pytest.approx(0.35)
    assert row.trees == 2


def test_write_table_machine_and_pretty():
    row = corpus_report([chain(5)], paired=[chain(5)], label="demo")
    machine = io.StringIO()
    write_table([row], machine)
    lines = [l for l in machine.getvalue().splitlines() if not l.startswith("#")]
    header = lines[0].split("\t")
    assert header[2:8] == ["height", "norm_arc_len", "prop_leaf", "avg_depth",
                           "right_branch", "att_score"]
    values = lines[1].split("\t")
    assert values[0] == "demo"
    assert float(values[2]) == 4.0
    pretty = io.StringIO()
    write_table([row], pretty, pretty=True)
    assert "4.00" in pretty.getvalue()
    assert any(l.startswith("#") for l in machine.getvalue().splitlines())
