"""Interference graphs: lattice, torus and random geometric topologies.

Links are dense integer ids.  On grid topologies link ``(i, j)`` with
``i, j in {0..n}`` has id ``i * (n + 1) + j`` and is *even* iff ``i + j`` is
even.  Adjacency is stored in CSR form (``indptr``, ``indices``) with sorted
neighbour lists, which is what the simulation kernel consumes directly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse import coo_matrix
from scipy.spatial.distance import pdist, squareform

from .errors import CalibrationError, ConfigError

EXACT_LIMIT = 25
GREEDY_ORDERS = 32


@dataclass(frozen=True, eq=False)
class InterferenceGraph:
    kind: str  # "lattice" | "torus" | "random-geometric" | "custom"
    indptr: np.ndarray
    indices: np.ndarray
    coords: np.ndarray
    n: int | None = None
    parity: np.ndarray | None = None
    range: float | None = None
    box: tuple[float, float] | None = None

    @property
    def L(self) -> int:
        return len(self.indptr) - 1

    @property
    def side(self) -> int | None:
        return None if self.n is None else self.n + 1

    @property
    def is_grid(self) -> bool:
        return self.kind in ("lattice", "torus")

    def neighbors(self, link: int) -> np.ndarray:
        return self.indices[self.indptr[link]:self.indptr[link + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edges(self) -> np.ndarray:
        """Undirected edge list as an ``(E, 2)`` array with ``src < dst``."""
        src = np.repeat(np.arange(self.L), self.degrees())
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    def link_id(self, i: int, j: int) -> int:
        return i * (self.n + 1) + j

    def ij(self, link: int) -> tuple[int, int]:
        return divmod(int(link), self.n + 1)

    def is_independent(self, links) -> bool:
        mask = np.zeros(self.L, dtype=bool)
        mask[np.asarray(list(links), dtype=np.int64)] = True
        src = np.repeat(np.arange(self.L), self.degrees())
        return not np.any(mask[src] & mask[self.indices])

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.L))
        g.add_edges_from(map(tuple, self.edges()))
        return g


def _from_edges(kind, L, edges, coords, **kw) -> InterferenceGraph:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges):
        both = np.concatenate([edges, edges[:, ::-1]])
        both = np.unique(both, axis=0)
        both = both[both[:, 0] != both[:, 1]]
    else:
        both = np.zeros((0, 2), dtype=np.int64)
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    indptr = np.zeros(L + 1, dtype=np.int64)
    np.add.at(indptr, both[:, 0] + 1, 1)
    indptr = np.cumsum(indptr)
    return InterferenceGraph(kind=kind, indptr=indptr, indices=both[:, 1].copy(),
                             coords=np.asarray(coords, dtype=float), **kw)


def _grid_coords(n):
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    return np.column_stack([ii.ravel(), jj.ravel()])


def _grid_edges(n, wrap):
    m = n + 1
    ids = np.arange(m * m).reshape(m, m)
    pairs = [np.column_stack([ids[:-1, :].ravel(), ids[1:, :].ravel()]),
             np.column_stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()])]
    if wrap:
        pairs.append(np.column_stack([ids[:, 0], ids[:, n]]))
        pairs.append(np.column_stack([ids[0, :], ids[n, :]]))
    return np.concatenate(pairs)


def build_lattice(n: int, allow_degenerate: bool = False) -> InterferenceGraph:
    """Lattice G_L with (n+1)^2 links; edges join links differing by one in one coordinate."""
    if n < 0 or (n == 0 and not allow_degenerate):
        raise ConfigError(f"lattice order must be >= 1, got {n}")
    coords = _grid_coords(n)
    parity = (coords.sum(axis=1) % 2).astype(np.int8)
    return _from_edges("lattice", (n + 1) ** 2, _grid_edges(n, wrap=False), coords,
                       n=n, parity=parity)


def build_torus(n: int) -> InterferenceGraph:
    """Torus T_L: lattice plus wraparound edges, every link has degree 4."""
    if n < 2:
        raise ConfigError(f"torus order must be >= 2, got {n}")
    coords = _grid_coords(n)
    parity = (coords.sum(axis=1) % 2).astype(np.int8)
    return _from_edges("torus", (n + 1) ** 2, _grid_edges(n, wrap=True), coords,
                       n=n, parity=parity)


def from_edge_list(L: int, edges) -> InterferenceGraph:
    """Arbitrary interference graph on ``L`` links; self-loops and duplicates are dropped."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if L < 1:
        raise ConfigError("need at least one link")
    if edges.size and (edges.min() < 0 or edges.max() >= L):
        raise ConfigError("edge endpoint out of range")
    return _from_edges("custom", L, edges, np.zeros((L, 2)))


def geometric_edges(points: np.ndarray, r: float) -> np.ndarray:
    """All pairs at Euclidean distance strictly less than ``r``."""
    if len(points) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    d = squareform(pdist(points))
    iu = np.triu_indices(len(points), k=1)
    mask = d[iu] < r
    return np.column_stack([iu[0][mask], iu[1][mask]])


def calibrate_range(points: np.ndarray, target_degree: float, tol: float = 0.02,
                    max_iter: int = 200) -> float:
    """Bisection on r so the realized mean degree is within ``tol`` (relative) of target."""
    L = len(points)
    if target_degree > L - 1:
        raise CalibrationError(f"mean degree {target_degree} unreachable with {L} links")
    if L < 2 or target_degree == 0:
        return 1e-12
    dists = np.sort(pdist(points))

    def mean_degree(r):
        return 2.0 * np.searchsorted(dists, r, side="left") / L

    lo, hi = 0.0, float(dists[-1]) * (1 + 1e-9) + 1e-12
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        deg = mean_degree(mid)
        if abs(deg - target_degree) <= tol * target_degree:
            return mid
        if deg < target_degree:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"could not reach mean degree {target_degree} within {tol:.0%}")


def build_random_geometric(L: int, width: float, height: float, target_degree: float,
                           rng=None, tol: float = 0.02) -> InterferenceGraph:
    """L uniform points in a ``width x height`` box, range calibrated to a mean degree."""
    if L < 1 or width <= 0 or height <= 0 or target_degree < 0:
        raise ConfigError("need L >= 1, positive box and non-negative target degree")
    rng = np.random.default_rng(rng)
    pts = rng.uniform(0.0, 1.0, size=(L, 2)) * np.array([width, height])
    r = calibrate_range(pts, target_degree, tol)
    return _from_edges("random-geometric", L, geometric_edges(pts, r), pts,
                       range=r, box=(float(width), float(height)))


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class TopologyStats:
    mu_max: float
    max_schedule_size: int
    avg_degree: float
    flag: str = "exact"  # "exact" | "asymptotic" | "bound"
    notes: dict = field(default_factory=dict)

    @property
    def r_L(self) -> float:
        """Largest fraction of simultaneously active links (estimate when flagged)."""
        return self.max_schedule_size / self.notes.get("L", 1)


def _bitmasks(graph):
    return [sum(1 << int(m) for m in graph.neighbors(l)) for l in range(graph.L)]


def max_independent_set_size(graph: InterferenceGraph) -> int:
    """Exact maximum schedule size by branch and bound (bitmask recursion)."""
    nbr = _bitmasks(graph)
    best = 0

    def search(cand, size):
        nonlocal best
        if cand == 0:
            best = max(best, size)
            return
        if size + bin(cand).count("1") <= best:
            return
        v = (cand & -cand).bit_length() - 1
        # include v
        search(cand & ~nbr[v] & ~(1 << v), size + 1)
        # exclude v (only useful if v has a neighbour still in play)
        if cand & nbr[v]:
            search(cand & ~(1 << v), size)

    search((1 << graph.L) - 1, 0)
    return best


def maximal_independent_sets(graph: InterferenceGraph) -> list[frozenset]:
    import networkx as nx

    comp = nx.complement(graph.to_networkx())
    return [frozenset(c) for c in nx.find_cliques(comp)]


def uniform_throughput_lp(graph: InterferenceGraph) -> float:
    """max t such that some mix of schedules gives every link a fraction >= t."""
    sets = maximal_independent_sets(graph)
    L, S = graph.L, len(sets)
    # variables: p_1..p_S, t ; maximize t
    c = np.zeros(S + 1)
    c[-1] = -1.0
    A_ub = np.zeros((L, S + 1))
    for k, s in enumerate(sets):
        for l in s:
            A_ub[l, k] = -1.0
    A_ub[:, -1] = 1.0
    A_eq = np.zeros((1, S + 1))
    A_eq[0, :S] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(L), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (S + 1), method="highs")
    return float(res.x[-1])


def greedy_schedule_size(graph: InterferenceGraph, orders: int = GREEDY_ORDERS, seed=0) -> int:
    rng = np.random.default_rng(seed)
    best = 0
    for _ in range(orders):
        blocked = np.zeros(graph.L, dtype=bool)
        size = 0
        for l in rng.permutation(graph.L):
            if not blocked[l]:
                size += 1
                blocked[l] = True
                blocked[graph.neighbors(l)] = True
        best = max(best, size)
    return best


def max_independent_set_milp(graph: InterferenceGraph, time_limit: float = 60.0):
    """Maximum schedule size by integer programming; ``None`` if optimality is not proven."""
    E = graph.edges()
    L = graph.L
    if len(E) == 0:
        return L
    rows = np.repeat(np.arange(len(E)), 2)
    A = coo_matrix((np.ones(2 * len(E)), (rows, E.ravel())), shape=(len(E), L)).tocsr()
    res = milp(-np.ones(L), constraints=LinearConstraint(A, -np.inf, 1.0),
               integrality=np.ones(L), bounds=Bounds(0, 1),
               options={"time_limit": time_limit})
    if res.status != 0:
        return None
    return int(round(-res.fun))


def max_uniform_throughput(graph: InterferenceGraph) -> TopologyStats:
    L = graph.L
    avg = float(graph.degrees().mean()) if L else 0.0
    notes = {"L": L}
    if graph.kind == "lattice":
        return TopologyStats(0.5, (L + 1) // 2, avg, "exact", notes)
    if graph.kind == "torus" and graph.side % 2 == 0:
        # even side: the two parity classes are valid schedules
        return TopologyStats(0.5, L // 2, avg, "exact", notes)
    if L <= EXACT_LIMIT:
        return TopologyStats(uniform_throughput_lp(graph), max_independent_set_size(graph),
                             avg, "exact", notes)
    if graph.kind == "torus":
        m = graph.side
        return TopologyStats(0.5, m * (m // 2), avg, "asymptotic", notes)
    notes["greedy"] = greedy_schedule_size(graph)
    size = max_independent_set_milp(graph)
    if size is not None:
        # mu_max itself is not computed here; the largest schedule fraction stands in for it
        return TopologyStats(size / L, size, avg, "exact-schedule", notes)
    size = notes["greedy"]
    return TopologyStats(size / L, size, avg, "bound", notes)


def brute_force_max_schedule(graph: InterferenceGraph) -> int:
    """Reference enumeration over all subsets; only for tiny graphs."""
    best = 0
    for k in range(graph.L, 0, -1):
        for s in combinations(range(graph.L), k):
            if graph.is_independent(s):
                return k
    return best


# ---------------------------------------------------------------- export


def export_edges(graph: InterferenceGraph, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst"])
        w.writerows(graph.edges().tolist())
    return path


def export_coords(graph: InterferenceGraph, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link", "x", "y", "parity"])
        for l, (x, y) in enumerate(graph.coords):
            par = "" if graph.parity is None else ("even" if graph.parity[l] == 0 else "odd")
            w.writerow([l, repr(float(x)), repr(float(y)), par])
    return path
