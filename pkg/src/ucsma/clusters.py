"""Cluster geometry of active-link snapshots on grid topologies.

Clusters are maximal sets of active links connected by diagonal steps
(``|di| = |dj| = 1``); diagonal neighbours always share parity, so clusters
are parity-pure.  Each link covers the square (a diamond in grid
coordinates) spanned by its four closest links.  The diamond is split into
four half-cell triangles (NE, NW, SW, SE) of area 0.5 each; on the lattice a
triangle is dropped when it sticks out of the grid, so interior links cover 2,
edge links 1 and corner links 0.5.

The boundary of a cluster's coverage union is traversed counter-clockwise
(covered area on the left; holes therefore run clockwise).  Diagonal steps
have length sqrt(2); along the lattice border the union is cut by axis
half-edges of length 1.  At pinch points, where two diamonds of the cluster
touch only in a vertex, the walk stays on the diamond it arrived on, so
pinched lobes close as separate loops.

On the torus the geometry is measured modulo the side, which needs an even
side for parity to be consistent.  Loops whose step vectors do not sum to
zero wind around the torus; such clusters are flagged as wrap-spanning.
"""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import linregress

from .errors import ConfigError, UnsupportedTopologyError

SQRT2 = math.sqrt(2.0)
# rays around a link, counter-clockwise; quadrant q lies between ray q and ray q+1
RAYS = ((1, 0), (0, 1), (-1, 0), (0, -1))
QUADRANTS = ("NE", "NW", "SW", "SE")
DIRS = {(1, 0): "E", (1, 1): "NE", (0, 1): "N", (-1, 1): "NW",
        (-1, 0): "W", (-1, -1): "SW", (0, -1): "S", (1, -1): "SE"}


@dataclass
class Cluster:
    members: frozenset  # link ids
    parity: str
    coords: tuple = ()  # (i, j) per member, sorted
    area: float | None = None
    boundary_length: float | None = None
    loops: list = field(default_factory=list)  # per loop: list of (dx, dy, owner)
    wrap_spanning: bool = False

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def boundary_steps(self) -> list:
        """Direction labels per loop."""
        return [[DIRS[(dx, dy)] for dx, dy, _ in loop] for loop in self.loops]

    @property
    def n_steps(self) -> int:
        return sum(len(loop) for loop in self.loops)

    def loops_closed(self) -> bool:
        return all(sum(s[0] for s in lp) == 0 and sum(s[1] for s in lp) == 0
                   for lp in self.loops)

    def walk_area(self) -> float:
        """Signed shoelace area summed over loops (valid for non-wrapping loops)."""
        total = 0.0
        for start, loop in zip(self._starts, self.loops):
            x, y = start
            acc = 0
            for dx, dy, _ in loop:
                acc += x * (y + dy) - (x + dx) * y
                x, y = x + dx, y + dy
            total += 0.5 * acc
        return total

    _starts: list = field(default_factory=list, repr=False)


def _check_grid(graph):
    if not graph.is_grid:
        raise UnsupportedTopologyError("cluster geometry is only defined on lattice and torus")


def _to_mask(active, L):
    a = np.asarray(active)
    if a.dtype == bool and a.size == L:
        return a.copy()
    mask = np.zeros(L, dtype=bool)
    mask[a.astype(np.int64)] = True
    return mask


def _diagonal_pairs(graph, mask):
    m = graph.side
    ids = np.flatnonzero(mask)
    i, j = ids // m, ids % m
    src, dst = [], []
    for di, dj in ((1, 1), (1, -1)):
        ii, jj = i + di, j + dj
        if graph.kind == "torus":
            ii, jj = ii % m, jj % m
            ok = np.ones(ids.size, dtype=bool)
        else:
            ok = (ii >= 0) & (ii < m) & (jj >= 0) & (jj < m)
        nb = ii[ok] * m + jj[ok]
        hit = mask[nb]
        src.append(ids[ok][hit])
        dst.append(nb[hit])
    return np.concatenate(src), np.concatenate(dst)


def label_clusters(graph, active) -> np.ndarray:
    """Cluster label per link (-1 for inactive links), labels ordered by smallest member."""
    _check_grid(graph)
    L = graph.L
    mask = _to_mask(active, L)
    src, dst = _diagonal_pairs(graph, mask)
    adj = coo_matrix((np.ones(src.size), (src, dst)), shape=(L, L))
    _, lab = connected_components(adj, directed=False)
    out = np.full(L, -1, dtype=np.int64)
    ids = np.flatnonzero(mask)
    # relabel in order of first appearance so labels are deterministic
    _, first = np.unique(lab[ids], return_index=True)
    order = np.argsort(first)
    remap = {lab[ids][first[k]]: r for r, k in enumerate(order)}
    out[ids] = [remap[x] for x in lab[ids]]
    return out


def find_clusters(active, graph) -> list[Cluster]:
    """Clusters of an active set (boolean mask or list of link ids), unmeasured."""
    labels = label_clusters(graph, active)
    groups = defaultdict(list)
    for l in np.flatnonzero(labels >= 0):
        groups[int(labels[l])].append(int(l))
    out = []
    for k in sorted(groups):
        mem = groups[k]
        i, j = graph.ij(mem[0])
        par = "even" if (i + j) % 2 == 0 else "odd"
        out.append(Cluster(frozenset(mem), par, tuple(sorted(graph.ij(l) for l in mem))))
    return out


def _quadrant_present(graph, i, j, q):
    if graph.kind == "torus":
        return True
    n = graph.n
    (ax, ay), (bx, by) = RAYS[q], RAYS[(q + 1) % 4]
    return 0 <= i + ax + bx <= n and 0 <= j + ay + by <= n


def _boundary_edges(cluster, graph):
    """Directed boundary half-edges ``(start, (dx, dy), owner)`` with the cluster on the left."""
    m = graph.side
    torus = graph.kind == "torus"
    members = set(cluster.coords)
    edges = []
    for (i, j) in cluster.coords:
        owner = i * m + j
        pres = [_quadrant_present(graph, i, j, q) for q in range(4)]
        for q in range(4):
            r0, r1 = RAYS[q], RAYS[(q + 1) % 4]
            if pres[q]:
                di, dj = r0[0] + r1[0], r0[1] + r1[1]
                nb = (i + di, j + dj)
                if torus:
                    nb = (nb[0] % m, nb[1] % m)
                if nb not in members:
                    edges.append(((i + r0[0], j + r0[1]), (r1[0] - r0[0], r1[1] - r0[1]), owner))
            # axis half-edge along ray q (between quadrant q-1 and quadrant q)
            before, after = pres[(q - 1) % 4], pres[q]
            if after and not before:
                edges.append(((i, j), r0, owner))
            elif before and not after:
                edges.append(((i + r0[0], j + r0[1]), (-r0[0], -r0[1]), owner))
    return edges


def _chain(edges, wrap):
    key = (lambda v: (v[0] % wrap, v[1] % wrap)) if wrap else (lambda v: v)
    out_at = defaultdict(list)
    for k, (s, _, _) in enumerate(edges):
        out_at[key(s)].append(k)
    used = [False] * len(edges)
    loops, starts = [], []
    for k0 in range(len(edges)):
        if used[k0]:
            continue
        loop = []
        k = k0
        while True:
            used[k] = True
            s, d, owner = edges[k]
            loop.append((d[0], d[1], owner))
            v = key((s[0] + d[0], s[1] + d[1]))
            cands = out_at[v]
            same = [c for c in cands if edges[c][2] == owner]
            if same:
                nxt = same[0]
            elif len(cands) == 1:
                nxt = cands[0]
            else:
                raise AssertionError(f"ambiguous boundary continuation at {v}")
            if nxt == k0:
                break
            if used[nxt]:
                raise AssertionError("boundary walk re-entered a used edge")
            k = nxt
        loops.append(loop)
        starts.append(edges[k0][0])
    return loops, starts


def measure(cluster: Cluster, graph) -> Cluster:
    """Fill in area, boundary length and boundary loops of ``cluster`` (in place)."""
    _check_grid(graph)
    torus = graph.kind == "torus"
    if torus and graph.side % 2:
        raise UnsupportedTopologyError("torus geometry needs an even side")
    area = 0.0
    for (i, j) in cluster.coords:
        area += 0.5 * sum(_quadrant_present(graph, i, j, q) for q in range(4))
    edges = _boundary_edges(cluster, graph)
    loops, starts = _chain(edges, graph.side if torus else None)
    length = 0.0
    for loop in loops:
        for dx, dy, _ in loop:
            length += SQRT2 if dx and dy else 1.0
    cluster.area = area
    cluster.boundary_length = length
    cluster.loops = loops
    cluster._starts = starts
    cluster.wrap_spanning = torus and (not cluster.loops_closed() or _winds(cluster, graph))
    return cluster


def _winds(cluster, graph):
    """True if unrolling the cluster along diagonal steps hits an inconsistency."""
    m = graph.side
    coords = set(cluster.coords)
    start = cluster.coords[0]
    pos = {start: start}
    stack = [start]
    while stack:
        c = stack.pop()
        ux, uy = pos[c]
        for di in (-1, 1):
            for dj in (-1, 1):
                nb = ((c[0] + di) % m, (c[1] + dj) % m)
                if nb not in coords:
                    continue
                u = (ux + di, uy + dj)
                if nb in pos:
                    if pos[nb] != u:
                        return True
                else:
                    pos[nb] = u
                    stack.append(nb)
    return False


def _bumps_in_loop(loop, n):
    N = len(loop)
    if n + 2 > N:
        return []
    d = [(s[0], s[1]) for s in loop]
    hits = []
    for s in range(N):
        d0 = d[s]
        d1 = d[(s + 1) % N]
        if d1 == d0:
            continue
        if any(d[(s + k) % N] != d1 for k in range(2, n + 1)):
            continue
        if d[(s + n + 1) % N] == (-d0[0], -d0[1]):
            hits.append(s)
    return hits


def count_bumps(cluster: Cluster, n: int) -> int:
    if n < 1:
        raise ConfigError("bump length must be >= 1")
    return sum(len(_bumps_in_loop(loop, n)) for loop in cluster.loops)


def critical_links(cluster: Cluster) -> set:
    """Links around which the boundary makes a one-step bump.

    The unit diagonal step and the reversed steps before and after it must
    all lie on the same link's diamond.  Only then are both ends of the step
    free once that link stops, which is what makes the link critical; concave
    bumps (a one-link notch in the cluster) are bordered by several links and
    do not count.
    """
    out = set()
    for loop in cluster.loops:
        N = len(loop)
        for s in _bumps_in_loop(loop, 1):
            dx, dy, owner = loop[(s + 1) % N]
            if dx and dy and loop[s][2] == owner and loop[(s + 2) % N][2] == owner:
                out.add(owner)
    return out


# ---------------------------------------------------------------- snapshots


@dataclass
class ClusterSnapshot:
    t: float | None
    clusters: list
    nondominating_parity: str
    theta: float
    delta: float
    R_density: float
    theta_h: float | None
    L: int
    n_active: int
    counts: dict = field(default_factory=dict)

    def nondominating(self) -> list:
        if self.nondominating_parity == "tie":
            return list(self.clusters)
        return [c for c in self.clusters if c.parity == self.nondominating_parity]

    @property
    def ratio1(self) -> float | None:
        # area and boundary length are local counts, so wrapping clusters are included
        nd = self.nondominating()
        denom = sum(c.boundary_length ** 2 for c in nd)
        return sum(c.area for c in nd) / denom if denom > 0 else None


def snapshot(active, graph, t=None, theta_h=None) -> ClusterSnapshot:
    """Find and measure all clusters, pick the non-dominating parity, and count critical links."""
    mask = _to_mask(active, graph.L)
    clusters = [measure(c, graph) for c in find_clusters(mask, graph)]
    cnt = Counter()
    for c in clusters:
        cnt[c.parity] += c.size
    if cnt["even"] < cnt["odd"]:
        nd = "even"
    elif cnt["odd"] < cnt["even"]:
        nd = "odd"
    else:
        nd = "tie"
    crit = set()
    for c in clusters:
        crit |= critical_links(c)
    n_act = int(mask.sum())
    theta = n_act / graph.L
    return ClusterSnapshot(t, clusters, nd, theta, 0.5 - theta, len(crit) / graph.L, theta_h,
                           graph.L, n_act, dict(cnt))


def critical_density(snap: ClusterSnapshot) -> float:
    return snap.R_density


@dataclass
class AssumptionDiagnostics:
    t: np.ndarray
    ratio1: np.ndarray  # nan where the sample was skipped
    skipped: np.ndarray  # bool flags
    wrapping: np.ndarray  # non-dominating clusters that wrap the torus, per sample
    bumps: dict  # (ell_rounded, n) -> (sum of bumps, number of clusters)
    c_a: float | None
    c_1: float | None

    def bumps_per_cluster(self, ell, n):
        s, k = self.bumps.get((round(ell, 6), n), (0, 0))
        return s / k if k else None


def assumption_diagnostics(history, ns=(1, 2, 3)) -> AssumptionDiagnostics:
    """Ratio ``sum A / sum ell^2`` over non-dominating clusters and bump averages by boundary length."""
    ts, r1, skip, wrap = [], [], [], []
    bumps = defaultdict(lambda: [0, 0])
    for snap in history:
        ts.append(np.nan if snap.t is None else snap.t)
        nd = snap.nondominating()
        wrap.append(sum(c.wrap_spanning for c in nd))
        r = snap.ratio1
        skip.append(r is None)
        r1.append(np.nan if r is None else r)
        for c in nd:
            for n in ns:
                b = bumps[(round(c.boundary_length, 6), n)]
                b[0] += count_bumps(c, n)
                b[1] += 1
    r1 = np.asarray(r1, dtype=float)
    ok = ~np.isnan(r1)
    c_a = float(np.min(r1[ok])) if ok.any() else None
    c1 = None
    ones = [(ell, s / k) for (ell, n), (s, k) in bumps.items() if n == 1 and k]
    if ones:
        c1 = float(min(ell * avg for ell, avg in ones))
    return AssumptionDiagnostics(np.asarray(ts, dtype=float), r1, np.asarray(skip),
                                 np.asarray(wrap, dtype=int),
                                 {k: tuple(v) for k, v in bumps.items()}, c_a, c1)


@dataclass(frozen=True)
class RLawFit:
    slope: float
    intercept: float
    c_R: float
    r2: float
    n: int

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "c_R": self.c_R,
                "r2": self.r2, "n": self.n}


def empirical_r_law(delta, R, lo=0.05, hi=0.45) -> RLawFit:
    """Least squares ``log R = log c_R + slope * log delta`` on samples with delta in [lo, hi]."""
    d = np.asarray(delta, dtype=float)
    r = np.asarray(R, dtype=float)
    ok = (d >= lo) & (d <= hi) & (d > 0) & (r > 0)
    if ok.sum() < 10:
        raise ConfigError("need at least 10 usable samples")
    fit = linregress(np.log(d[ok]), np.log(r[ok]))
    return RLawFit(float(fit.slope), float(fit.intercept), float(math.exp(fit.intercept)),
                   float(fit.rvalue ** 2), int(ok.sum()))


def export_snapshot(graph, active, path) -> None:
    mask = _to_mask(active, graph.L)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link", "i", "j", "parity", "active"])
        for l in range(graph.L):
            i, j = graph.ij(l)
            w.writerow([l, i, j, "even" if (i + j) % 2 == 0 else "odd", int(mask[l])])


def export_diagnostics(rows, path) -> None:
    """rows: iterables of ``(t, theta, delta, R, ratio1, theta_h)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "delta", "R", "ratio1", "theta_h"])
        for row in rows:
            w.writerow(["" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))
                        for v in row])
