import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tawalk.ingest import (
    GraphStats,
    Transaction,
    TransactionFormatError,
    graph_stats,
    k_order_subgraph,
    parse_transactions,
    synth_temporal_graph,
    write_transactions,
)

from conftest import reachable_within


def _write(tmp_path, text, name="txs.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestParse:
    def test_single_row(self, tmp_path):
        p = _write(tmp_path, "src,dst,amount,timestamp\n0xA,0xB,5.0,1515974400\n")
        assert parse_transactions(p) == [Transaction("0xA", "0xB", 5.0, 1515974400)]

    def test_header_only(self, tmp_path):
        p = _write(tmp_path, "src,dst,amount,timestamp\n")
        assert parse_transactions(p) == []

    def test_negative_amount_reports_line(self, tmp_path):
        p = _write(tmp_path, "src,dst,amount,timestamp\n0xA,0xB,-1,100\n")
        with pytest.raises(TransactionFormatError, match=r":2:"):
            parse_transactions(p)

    def test_non_integer_timestamp(self, tmp_path):
        p = _write(tmp_path, "src,dst,amount,timestamp\na,b,1.0,12.5\n")
        with pytest.raises(TransactionFormatError, match="timestamp"):
            parse_transactions(p)

    def test_bad_header(self, tmp_path):
        p = _write(tmp_path, "from,to,value,time\na,b,1,1\n")
        with pytest.raises(TransactionFormatError, match="header"):
            parse_transactions(p)

    def test_wrong_field_count(self, tmp_path):
        p = _write(tmp_path, "src,dst,amount,timestamp\na,b,1\n")
        with pytest.raises(TransactionFormatError, match="4 fields"):
            parse_transactions(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_transactions(tmp_path / "nope.csv")

    def test_preserves_file_order_and_duplicates(self, tmp_path):
        rows = "src,dst,amount,timestamp\na,b,1.0,5\na,b,1.0,5\nb,a,2.0,3\n"
        txs = parse_transactions(_write(tmp_path, rows))
        assert [t.timestamp for t in txs] == [5, 5, 3]
        assert txs[0] == txs[1]

    @given(
        st.lists(
            st.tuples(
                st.text(alphabet="0xabcdefABCDEF", min_size=1, max_size=10),
                st.text(alphabet="0xabcdefABCDEF", min_size=1, max_size=10),
                st.floats(min_value=0, max_value=1e12, allow_nan=False),
                st.integers(min_value=0, max_value=2**40),
            ),
            max_size=30,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_roundtrip(self, tmp_path_factory, rows):
        txs = [Transaction(s, d, a, ts) for s, d, a, ts in rows]
        p = tmp_path_factory.mktemp("rt") / "txs.csv"
        write_transactions(txs, p)
        again = parse_transactions(p)
        assert again == txs
        write_transactions(again, p)
        assert parse_transactions(p) == txs


class TestTransactionInvariants:
    def test_rejects_empty_account(self):
        with pytest.raises(ValueError):
            Transaction("", "b", 1.0, 0)

    def test_rejects_whitespace_account(self):
        with pytest.raises(ValueError):
            Transaction("a b", "c", 1.0, 0)

    def test_rejects_negative_timestamp(self):
        with pytest.raises(ValueError):
            Transaction("a", "b", 1.0, -1)

    def test_self_loop_is_permitted_in_input(self):
        assert Transaction("a", "a", 1.0, 0).src == "a"


def _chain(*hops):
    return [Transaction(u, v, 1.0, i) for i, (u, v) in enumerate(hops)]


class TestKOrderSubgraph:
    def test_chain(self):
        txs = _chain(("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"))
        sub = k_order_subgraph(txs, "c", k_in=1, k_out=3)
        accounts = {t.src for t in sub} | {t.dst for t in sub}
        assert accounts == {"b", "c", "d", "e"}
        assert {(t.src, t.dst) for t in sub} == {("b", "c"), ("c", "d"), ("d", "e")}

    def test_zero_depth(self):
        txs = _chain(("a", "b"), ("b", "c")) + [Transaction("b", "b", 1.0, 9)]
        assert k_order_subgraph(txs, "b", 0, 0) == []

    def test_star(self):
        txs = _chain(("x", "c"), ("c", "y"), ("c", "z"))
        sub = k_order_subgraph(txs, "c", k_in=1, k_out=1)
        assert sub == txs

    def test_absent_center(self):
        with pytest.raises(ValueError, match="center"):
            k_order_subgraph(_chain(("a", "b")), "zz", 1, 1)

    def test_matches_reachability_oracle_on_random_digraphs(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(2, 51))
            names = [f"n{i:03d}" for i in range(n)]
            m = int(rng.integers(1, 4 * n))
            txs = [
                Transaction(names[int(rng.integers(n))], names[int(rng.integers(n))], 1.0, k)
                for k in range(m)
            ]
            adj = np.zeros((n, n), dtype=bool)
            for t in txs:
                if t.src != t.dst:
                    adj[names.index(t.src), names.index(t.dst)] = True
            if not adj.any():
                continue
            center = int(np.nonzero(adj)[0][0])
            k_in, k_out = int(rng.integers(0, 4)), int(rng.integers(0, 4))
            expected_accounts = reachable_within(adj, center, k_out) | reachable_within(
                adj.T, center, k_in
            )
            expected = [
                t
                for t in txs
                if t.src != t.dst
                and names.index(t.src) in expected_accounts
                and names.index(t.dst) in expected_accounts
            ]
            assert k_order_subgraph(txs, names[center], k_in, k_out) == expected


class TestSynth:
    def test_deterministic(self, tmp_path):
        a = synth_temporal_graph(4, 1, 1, 3, 0.5, seed=7)
        b = synth_temporal_graph(4, 1, 1, 3, 0.5, seed=7)
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_transactions(a, pa)
        write_transactions(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_intra_prob_one_keeps_communities(self):
        txs = synth_temporal_graph(60, 6, 2, 400, 1.0, seed=3)
        for t in txs:
            assert int(t.src[1:]) % 6 == int(t.dst[1:]) % 6

    def test_intra_fraction_statistics(self):
        txs = synth_temporal_graph(500, 5, 10, 2000, 0.9, seed=11)
        intra = sum(1 for t in txs if int(t.src[1:]) % 5 == int(t.dst[1:]) % 5)
        assert abs(intra / len(txs) - 0.9) < 0.02

    def test_timestamps_inside_snapshot_windows(self):
        txs = synth_temporal_graph(20, 2, 4, 50, 0.5, seed=0, snapshot_seconds=1000)
        for i, t in enumerate(txs):
            assert (i // 50) * 1000 <= t.timestamp < (i // 50 + 1) * 1000

    def test_zero_accounts_rejected(self):
        with pytest.raises(ValueError):
            synth_temporal_graph(0, 1, 1, 1, 0.5, seed=0)


class TestGraphStats:
    def test_triangle(self):
        stats = graph_stats(_chain(("a", "b"), ("b", "c"), ("c", "a")))
        assert stats.avg_clustering == pytest.approx(1.0)
        assert stats.avg_degree == pytest.approx(2.0)

    def test_path(self):
        stats = graph_stats(_chain(("a", "b"), ("b", "c")))
        assert stats.avg_degree == pytest.approx(4 / 3)
        assert stats.avg_clustering == 0.0

    def test_empty(self):
        assert graph_stats([]) == GraphStats(0, 0, 0.0, 0.0)

    def test_projection_collapses_direction_and_multiplicity(self):
        txs = _chain(("a", "b"), ("b", "a"), ("a", "b")) + [Transaction("c", "c", 1.0, 0)]
        stats = graph_stats(txs)
        assert (stats.node_count, stats.edge_count) == (3, 1)

    def test_avg_degree_against_independent_recount(self):
        rng = np.random.default_rng(5)
        from conftest import random_txs

        for _ in range(30):
            txs = random_txs(rng, int(rng.integers(2, 30)), int(rng.integers(1, 80)))
            stats = graph_stats(txs)
            pairs = {frozenset((t.src, t.dst)) for t in txs if t.src != t.dst}
            nodes = {a for t in txs for a in (t.src, t.dst)}
            assert stats.edge_count == len(pairs)
            assert stats.node_count == len(nodes)
            degree_sum = sum(
                sum(1 for p in pairs if v in p) for v in nodes
            )
            assert stats.avg_degree == pytest.approx(degree_sum / len(nodes))

    def test_clustering_matches_networkx(self):
        nx = pytest.importorskip("networkx")
        rng = np.random.default_rng(17)
        from conftest import random_txs

        for _ in range(20):
            txs = random_txs(rng, int(rng.integers(3, 25)), int(rng.integers(3, 70)))
            g = nx.Graph()
            g.add_nodes_from({a for t in txs for a in (t.src, t.dst)})
            g.add_edges_from((t.src, t.dst) for t in txs if t.src != t.dst)
            assert graph_stats(txs).avg_clustering == pytest.approx(
                nx.average_clustering(g), abs=1e-12
            )
