import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import boundary_loops, bumps_reference, random_independent_set, union_geometry
from ucsma.clusters import (assumption_diagnostics, count_bumps, critical_density,
                            critical_links, empirical_r_law, export_diagnostics,
                            export_snapshot, find_clusters, label_clusters, measure, snapshot)
from ucsma.errors import ConfigError, UnsupportedTopologyError
from ucsma.graph import build_lattice, build_random_geometric, build_torus

SQ2 = math.sqrt(2)


def _ids(g, pts):
    return [g.link_id(i, j) for i, j in pts]


def test_cluster_connectivity_examples():
    g = build_lattice(9)
    (c,) = find_clusters(_ids(g, [(1, 1)]), g)
    assert c.size == 1 and c.parity == "even"
    assert len(find_clusters(_ids(g, [(1, 1), (2, 2)]), g)) == 1
    assert len(find_clusters(_ids(g, [(1, 1), (1, 3)]), g)) == 2


def test_single_interior_link_geometry():
    g = build_lattice(9)
    (c,) = [measure(c, g) for c in find_clusters(_ids(g, [(4, 4)]), g)]
    assert c.area == 2.0
    assert c.boundary_length == pytest.approx(4 * SQ2)
    assert c.n_steps == 4
    assert c.boundary_steps == [["NW", "SW", "SE", "NE"]] or sorted(c.boundary_steps[0]) == \
        ["NE", "NW", "SE", "SW"]
    assert count_bumps(c, 1) == 4 and count_bumps(c, 2) == 0
    assert critical_links(c) == {g.link_id(4, 4)}
    with pytest.raises(ConfigError):
        count_bumps(c, 0)


def test_two_diagonal_links():
    g = build_lattice(9)
    (c,) = [measure(c, g) for c in find_clusters(_ids(g, [(4, 4), (5, 5)]), g)]
    area, per = union_geometry(c.coords, g.n)
    # the two diamonds share a full edge, so six of the eight edges remain
    assert c.area == pytest.approx(4.0) == pytest.approx(area)
    assert c.boundary_length == pytest.approx(6 * SQ2) == pytest.approx(per)
    assert count_bumps(c, 1) == bumps_reference(boundary_loops(c.coords, g.n), 1)


def test_border_links_are_clipped():
    g = build_lattice(9)
    (corner,) = [measure(c, g) for c in find_clusters(_ids(g, [(0, 0)]), g)]
    (edge,) = [measure(c, g) for c in find_clusters(_ids(g, [(0, 4)]), g)]
    assert corner.area == 0.5 and edge.area == 1.0
    assert corner.boundary_length == pytest.approx(SQ2 + 2)
    assert corner.loops_closed() and edge.loops_closed()


def test_critical_density_examples():
    g = build_torus(9)
    assert snapshot(np.zeros(g.L, bool), g).R_density == 0.0
    even = g.parity == 0
    snap = snapshot(even, g)
    assert critical_density(snap) == 0.0 and snap.delta == 0.0
    assert all(c.wrap_spanning for c in snap.clusters)


def test_concave_notch_is_not_critical():
    g = build_lattice(11)
    # a 3x3 diamond block of even links missing its centre link
    block = [(i, j) for i in range(3, 9) for j in range(3, 9) if (i + j) % 2 == 0
             and abs(i - 6) + abs(j - 6) <= 2]
    full = [measure(c, g) for c in find_clusters(_ids(g, block), g)]
    holed = [measure(c, g) for c in find_clusters(_ids(g, [p for p in block if p != (6, 6)]), g)]
    assert len(full) == len(holed) == 1
    assert g.link_id(6, 6) not in critical_links(holed[0])
    assert len(holed[0].loops) == 2  # outer boundary plus the hole


def test_ratio_for_single_link_clusters():
    g = build_lattice(9)
    snap = snapshot(_ids(g, [(2, 2), (2, 6), (6, 2), (5, 6)]), g, t=1.0)
    diag = assumption_diagnostics([snap])
    assert snap.nondominating_parity == "odd"
    assert [c.size for c in snap.nondominating()] == [1]
    assert diag.ratio1[0] == pytest.approx(1 / 16)


def test_empty_snapshot_is_flagged():
    g = build_lattice(5)
    diag = assumption_diagnostics([snapshot(np.zeros(g.L, bool), g, t=2.0)])
    assert diag.skipped[0] and np.isnan(diag.ratio1[0]) and diag.c_a is None


def test_r_law_fit_on_synthetic_data():
    d = np.linspace(0.05, 0.45, 30)
    fit = empirical_r_law(d, 2 * d ** 3)
    assert fit.slope == pytest.approx(3.0, abs=1e-9)
    assert fit.c_R == pytest.approx(2.0, abs=1e-6)
    with_zero = empirical_r_law(np.append(d, 0.0), np.append(2 * d ** 3, 0.0))
    assert with_zero.n == 30
    with pytest.raises(ConfigError):
        empirical_r_law(d[:9], 2 * d[:9] ** 3)


def test_unsupported_topologies():
    with pytest.raises(UnsupportedTopologyError):
        find_clusters([0], build_random_geometric(20, 4, 4, 3, rng=0))
    g = build_torus(4)  # side 5 is odd
    (c,) = find_clusters([0], g)
    with pytest.raises(UnsupportedTopologyError):
        measure(c, g)


def _random_active(g, rng):
    if rng.random() < 0.5:
        return random_independent_set(g.L, g.neighbors, rng, rng.uniform(0.2, 1.0))
    par = rng.integers(2)
    p = rng.uniform(0.5, 0.95)
    return (g.parity == par) & (rng.random(g.L) < p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_partition_and_loop_properties(seed):
    rng = np.random.default_rng(seed)
    for g in (build_lattice(9), build_torus(9)):
        act = _random_active(g, rng)
        labels = label_clusters(g, act)
        assert np.array_equal(labels >= 0, act)
        clusters = [measure(c, g) for c in find_clusters(act, g)]
        assert sum(c.size for c in clusters) == act.sum()
        for c in clusters:
            assert len({int(g.parity[l]) for l in c.members}) == 1
            if not c.wrap_spanning:
                assert c.loops_closed()
                assert c.walk_area() == pytest.approx(c.area)
            interior = all(0 < i < g.n and 0 < j < g.n for i, j in c.coords)
            for loop in (c.loops if interior else []):
                turns = sum(loop[k][:2] != loop[k - 1][:2] for k in range(len(loop)))
                assert turns >= 4


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_small_clusters_match_oracles(seed):
    rng = np.random.default_rng(seed)
    g = build_lattice(9)
    act = _random_active(g, rng)
    for c in find_clusters(act, g):
        if c.size > 8:
            continue
        measure(c, g)
        area, per = union_geometry(c.coords, g.n)
        assert c.area == pytest.approx(area, abs=1e-9)
        assert c.boundary_length == pytest.approx(per, abs=1e-9)


def test_exports(tmp_path):
    g = build_lattice(3)
    export_snapshot(g, _ids(g, [(1, 1)]), tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "link,i,j,parity,active" and len(rows) == 1 + g.L
    export_diagnostics([(1.0, 0.3, 0.2, 0.01, 0.05, None)], tmp_path / "d.csv")
    rows = (tmp_path / "d.csv").read_text().splitlines()
    assert rows[0] == "t,theta,delta,R,ratio1,theta_h" and rows[1].endswith(",")
