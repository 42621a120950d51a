import numpy as np
import pytest

import meshplan as mp
from meshplan.mesh import Mapping, MeshSet
from meshplan.permutation import Permutation
from meshplan.reorder import PointGraph, first_touch_renumber, gps_levels

from _oracles import count_graph_edges


def grid_graph(nx, ny):
    """nx x ny lattice graph."""
    def nid(x, y):
        return x * ny + y

    us, vs = [], []
    for x in range(nx):
        for y in range(ny):
            if x + 1 < nx:
                us.append(nid(x, y))
                vs.append(nid(x + 1, y))
            if y + 1 < ny:
                us.append(nid(x, y))
                vs.append(nid(x, y + 1))
    return PointGraph.from_edges(nx * ny, us, vs)


def random_connected_graph(n, extra_edges, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    us = [int(order[i]) for i in range(1, n)]
    vs = [int(order[rng.integers(0, i)]) for i in range(1, n)]
    for _ in range(extra_edges):
        a, b = rng.integers(0, n, 2)
        if a != b:
            us.append(int(a))
            vs.append(int(b))
    return PointGraph.from_edges(n, us, vs)


class TestMeshToGraph:
    def test_arity4_element_is_clique(self):
        f, t = MeshSet("f", 1), MeshSet("t", 4)
        g = mp.mesh_to_graph(Mapping("m", f, t, np.array([[0, 1, 2, 3]])))
        assert g.num_edges == 6  # 0.5 * (4^2 - 4)
        assert all(len(g.neighbours(u)) == 3 for u in range(4))

    def test_arity2_single_edge(self):
        f, t = MeshSet("f", 1), MeshSet("t", 2)
        g = mp.mesh_to_graph(Mapping("m", f, t, np.array([[0, 1]])))
        assert g.num_edges == 1

    def test_two_quads_sharing_edge(self):
        rows = np.array([[0, 1, 2, 3], [2, 3, 4, 5]])
        f, t = MeshSet("f", 2), MeshSet("t", 6)
        g = mp.mesh_to_graph(Mapping("m", f, t, rows))
        assert g.num_edges == len(count_graph_edges(rows)) == 11

    def test_duplicate_points_in_row_ignored(self):
        f, t = MeshSet("f", 1), MeshSet("t", 3)
        g = mp.mesh_to_graph(Mapping("m", f, t, np.array([[0, 1, 1, 0]])))
        assert g.num_edges == 1

    def test_edge_count_upper_bound(self):
        rng = np.random.default_rng(7)
        f, t = MeshSet("f", 40), MeshSet("t", 25)
        table = rng.integers(0, 25, (40, 4))
        g = mp.mesh_to_graph(Mapping("m", f, t, table))
        bound = sum(0.5 * (len(set(r)) ** 2 - len(set(r))) for r in table.tolist())
        assert g.num_edges == len(count_graph_edges(table))
        assert g.num_edges <= bound


class TestGpsRenumber:
    def test_path_graph_bandwidth_one(self):
        g = PointGraph.from_edges(4, [0, 1, 2], [1, 2, 3])
        perm = mp.gps_renumber(g)
        assert mp.bandwidth(g, perm) == 1

    def test_empty_graph(self):
        g = PointGraph.from_edges(5, [], [])
        perm = mp.gps_renumber(g)
        assert sorted(perm.forward.tolist()) == list(range(5))
        assert mp.bandwidth(g, perm) == 0

    def test_grid_bandwidth_not_worse_than_random(self):
        base = grid_graph(8, 8)
        rng = np.random.default_rng(11)
        scramble = Permutation.from_forward(rng.permutation(64))
        # renumber the graph randomly, then ask for a fresh numbering
        indptr, indices = base.indptr, base.indices
        rows = np.repeat(np.arange(64), np.diff(indptr))
        g = PointGraph.from_edges(64, scramble.forward[rows], scramble.forward[indices])
        before = mp.bandwidth(g)
        perm = mp.gps_renumber(g)
        assert mp.bandwidth(g, perm) <= before

    @pytest.mark.parametrize("seed", range(50))
    def test_bandwidth_regression_suite(self, seed):
        # mostly small graphs for breadth, a few near the 2000-node bound
        hi = 2000 if seed >= 45 else 220
        n = int(np.random.default_rng(seed).integers(40, hi))
        g = random_connected_graph(n, extra_edges=n // 2, seed=seed)
        perm = mp.gps_renumber(g)
        assert sorted(perm.forward.tolist()) == list(range(n))
        assert mp.bandwidth(g, perm) <= mp.bandwidth(g)

    def test_level_sets_contiguous(self):
        g = grid_graph(7, 5)
        perm = mp.gps_renumber(g)
        levels = gps_levels(g, perm)
        new_index = perm.forward
        for lvl in range(int(levels.max())):
            assert new_index[levels == lvl].max() < new_index[levels == lvl + 1].min()

    def test_disconnected_components_consecutive(self):
        # two components: a triangle on {0,1,2} and an edge on {3,4}
        g = PointGraph.from_edges(5, [0, 1, 2, 3], [1, 2, 0, 4])
        perm = mp.gps_renumber(g)
        first = perm.forward[[0, 1, 2]]
        second = perm.forward[[3, 4]]
        assert first.max() < second.min()


class TestLexSort:
    def test_tuples_sorted_per_element_first(self):
        f, t = MeshSet("f", 2), MeshSet("t", 6)
        m = Mapping("m", f, t, np.array([[5, 1], [0, 2]]))
        perm = mp.lex_sort_elements(m, Permutation.identity(6))
        # keys: (1,5) and (0,2) -> element 1 comes first
        assert perm.inverse.tolist() == [1, 0]

    def test_stability_for_equal_rows(self):
        f, t = MeshSet("f", 3), MeshSet("t", 4)
        m = Mapping("m", f, t, np.array([[1, 2], [1, 2], [1, 2]]))
        perm = mp.lex_sort_elements(m, Permutation.identity(4))
        assert perm.inverse.tolist() == [0, 1, 2]

    def test_against_brute_force(self):
        rng = np.random.default_rng(13)
        f, t = MeshSet("f", 500), MeshSet("t", 60)
        m = Mapping("m", f, t, rng.integers(0, 60, (500, 2)))
        point_perm = Permutation.from_forward(rng.permutation(60))
        perm = mp.lex_sort_elements(m, point_perm)
        keys = [tuple(sorted(point_perm.forward[m.table[e]].tolist())) for e in range(500)]
        expected = sorted(range(500), key=lambda e: (keys[e], e))
        assert perm.inverse.tolist() == expected


class TestWriterSets:
    def test_single_block_points_grouped(self):
        f, t = MeshSet("f", 4), MeshSet("t", 8)
        m = Mapping("m", f, t, np.array([[0, 1], [2, 3], [4, 5], [6, 7]]))
        assignment = np.array([1, 1, 0, 0])
        perm = mp.reorder_points_by_writer_sets(m, assignment)
        order = perm.inverse.tolist()
        blocks_in_order = [0 if p in (4, 5, 6, 7) else 1 for p in order]
        assert blocks_in_order == sorted(blocks_in_order)

    def test_shared_point_sorts_last(self):
        f, t = MeshSet("f", 2), MeshSet("t", 3)
        m = Mapping("m", f, t, np.array([[0, 1], [1, 2]]))
        perm = mp.reorder_points_by_writer_sets(m, np.array([0, 1]))
        assert perm.inverse.tolist()[-1] == 1  # written by both blocks

    def test_against_brute_force(self):
        from meshplan.bench_kernels import gen_quad2d

        mesh = gen_quad2d(8, 8, seed=17)
        m = mesh.mappings["e2c"]
        rng = np.random.default_rng(18)
        assignment = rng.integers(0, 4, m.from_set.size)
        perm = mp.reorder_points_by_writer_sets(m, assignment)

        blocks = {}
        for e in range(m.from_set.size):
            for s in range(2):
                blocks.setdefault(int(m.table[e, s]), set()).add(int(assignment[e]))
        key = lambda p: (len(blocks.get(p, ())), tuple(sorted(blocks.get(p, ()))), p)
        expected = sorted(range(m.to_set.size), key=key)
        assert perm.inverse.tolist() == expected


class TestFirstTouch:
    def test_first_touch_order(self):
        f, t = MeshSet("f", 3), MeshSet("t", 5)
        m = Mapping("m", f, t, np.array([[3, 1], [1, 0], [4, 4]]))
        perm = first_touch_renumber(m, Permutation.identity(3))
        # touch order: 3, 1, 0, 4; untouched: 2
        assert perm.inverse.tolist() == [3, 1, 0, 4, 2]
