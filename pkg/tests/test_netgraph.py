import pytest

from pcnlab.netgraph import (
    ChannelGraph,
    EdgeNotFound,
    ParseError,
    cycle_histogram,
    edge_cycle_lengths,
    load_edge_list,
    parse_edge_list,
    shortest_cycle_through_edge,
)

TRIANGLE = [("a", "b"), ("b", "c"), ("c", "a")]
SQUARE = [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")]
BOWTIE = TRIANGLE + [("c", "d"), ("d", "e"), ("e", "c")]


def test_load_edge_list(tmp_path):
    f = tmp_path / "g.csv"
    f.write_text("a,b\nb,a\na,b\n")
    g = load_edge_list(f)
    assert len(g.edges) == 1 and g.duplicates_merged == 2
    f.write_text("a,a\n")
    g = load_edge_list(f)
    assert len(g.edges) == 0 and g.self_loops_dropped == 1
    f.write_text("")
    assert len(load_edge_list(f).edges) == 0


def test_parse_comments_and_errors():
    g = parse_edge_list("# header\na,b\n\n  # indented comment\nb,c\n")
    assert len(g.edges) == 2
    with pytest.raises(ParseError) as e:
        parse_edge_list("a,b\nc\n")
    assert e.value.lineno == 2
    with pytest.raises(ParseError):
        parse_edge_list("a,b,c\n")


def test_shortest_cycle_examples():
    assert shortest_cycle_through_edge(ChannelGraph.from_edges(TRIANGLE), ("a", "b")) == 3
    sq = ChannelGraph.from_edges(SQUARE)
    assert all(shortest_cycle_through_edge(sq, e) == 4 for e in SQUARE)
    assert shortest_cycle_through_edge(ChannelGraph.from_edges([("a", "b"), ("b", "c")]), ("b", "a")) is None
    with pytest.raises(EdgeNotFound):
        shortest_cycle_through_edge(sq, ("a", "c"))


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_histograms(backend):
    h = cycle_histogram(ChannelGraph.from_edges(TRIANGLE), backend)
    assert h.counts == {3: 3} and h.not_in_cycle == 0 and h.average_text() == "3.00"
    h = cycle_histogram(ChannelGraph.from_edges(BOWTIE), backend)
    assert h.counts == {3: 6} and h.average_text() == "3.00"
    h = cycle_histogram(ChannelGraph.from_edges(SQUARE + [("d", "e")]), backend)
    assert h.counts == {4: 4} and h.not_in_cycle == 1 and h.total_edges == 5


def test_histogram_csv_and_rounding():
    g = ChannelGraph.from_edges(TRIANGLE + SQUARE[:0] + [("c", "d"), ("d", "e"), ("e", "f"), ("f", "c")])
    h = cycle_histogram(g)
    assert h.counts == {3: 3, 4: 4}
    # 25/7 = 3.5714...
    assert h.to_csv() == "length,count\n3,3\n4,4\nNA,0\naverage,3.57\n"


def test_cycle_property_small_graphs():
    import itertools
    import random

    import networkx as nx

    rng = random.Random(4)
    for _ in range(20):
        n = rng.randint(3, 9)
        pairs = [e for e in itertools.combinations(range(n), 2) if rng.random() < 0.4]
        g = ChannelGraph.from_edges(pairs)
        G = nx.Graph(list(g.edges))
        for (u, v), L in edge_cycle_lengths(g).items():
            if L is None:
                assert nx.has_bridges(G) and (u, v) in {tuple(sorted(b)) for b in nx.bridges(G)}
                continue
            assert L >= 3
            H = G.copy()
            H.remove_edge(u, v)
            assert nx.shortest_path_length(H, u, v) == L - 1
