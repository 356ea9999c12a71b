"""Adaptive GRID computation of pseudospectra.

The resolvent norm is sampled at the vertices of a triangulation of a window
in the complex plane. Triangles whose vertex values straddle one of the target
level sets are red-refined, hanging nodes are closed by green bisection, and
the level sets are finally traced by marching triangles in log10 scale.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import as_operator, fov_boundary

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 8
DEFAULT_BUDGET = 200_000
INF_DECADES = 3.0
# Lanczos stopping tolerance for grid samples; far below the contouring error
GRID_RTOL = 1e-6


class GridEvaluationError(RuntimeError):
    pass


def _workers() -> int:
    env = os.environ.get("HELMPSEUDO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class ComplexGrid:
    """Conforming triangulation of a complex window with resolvent-norm samples.

    ``values`` holds NaN for vertices not yet evaluated. ``parent`` is -1 for
    ordinary triangles and holds the bisected parent's vertices for the two
    halves of a green closure triangle.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    values: np.ndarray
    depth: np.ndarray
    vdepth: np.ndarray
    parent: np.ndarray
    midpoints: dict = field(default_factory=dict)
    evaluations: int = 0
    warning: str | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (np.conj(d1) * d2).imag

    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return np.max(np.abs(p - np.roll(p, 1, axis=1)), axis=1)

    def log_values(self) -> np.ndarray:
        """log10 of the samples with infinities clamped above the finite maximum."""
        v = np.asarray(self.values, dtype=float)
        out = np.full(v.shape, np.nan)
        finite = np.isfinite(v) & (v > 0)
        out[finite] = np.log10(v[finite])
        top = np.nanmax(out) if np.any(finite) else 0.0
        out[np.isinf(v)] = top + INF_DECADES
        return out


@dataclass(frozen=True)
class LevelSpec:
    epsilons: tuple

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("epsilons must be positive")
        if any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly increasing")
        object.__setattr__(self, "epsilons", eps)

    @classmethod
    def of(cls, eps) -> "LevelSpec":
        return cls(tuple(sorted(set(float(e) for e in eps))))

    def log_levels(self) -> np.ndarray:
        """log10 of the resolvent-norm levels 1/eps."""
        return -np.log10(np.array(self.epsilons))


@dataclass
class Polyline:
    points: np.ndarray
    closed: bool


IsolineSet = dict  # epsilon -> list[Polyline]


def initial_grid(window, n: int = 16, ny: int | None = None) -> ComplexGrid:
    """Structured triangulation of window = (re_min, re_max, im_min, im_max)
    with n cells along the real axis and ny (default n) along the imaginary axis."""
    x0, x1, y0, y1 = (float(w) for w in window)
    ny = n if ny is None else ny
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate window {window}")
    if min(n, ny) < 4:
        raise ValueError("need at least 4 subdivisions per side")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = (X + 1j * Y).ravel()
    idx = np.arange((n + 1) * (ny + 1)).reshape(n + 1, ny + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    nt = len(tris)
    return ComplexGrid(verts, tris, np.full(len(verts), np.nan), np.zeros(nt, dtype=int),
                       np.zeros(len(verts), dtype=int), -np.ones((nt, 3), dtype=int))


def default_window(op, epsilons, n_angles: int = 64, fov=None) -> tuple:
    """Bounding box of the FOV dilated by twice the largest epsilon."""
    if fov is None:
        fov = fov_boundary(op, n_angles)
    x0, x1, y0, y1 = fov.bbox()
    pad = 2.0 * max(epsilons)
    return (x0 - pad, x1 + pad, y0 - pad, y1 + pad)


def _evaluate_point(op, z, rtol: float = GRID_RTOL) -> float:
    s = op.sigma_min(z, tol=rtol)
    return math.inf if s == 0.0 else 1.0 / s


def evaluate_grid(g: ComplexGrid, op, workers: int | None = None,
                  rtol: float = GRID_RTOL) -> ComplexGrid:
    """Fill missing resolvent-norm samples in place (and return the grid)."""
    sop = as_operator(op)
    todo = np.flatnonzero(np.isnan(g.values))
    if len(todo) == 0:
        return g
    workers = workers or _workers()
    for attempt in range(2):
        pts = g.vertices[todo]

        def work(z):
            try:
                return _evaluate_point(sop, z, rtol)
            except Exception as exc:  # recorded as missing, retried once
                log.warning("resolvent evaluation failed at %s: %s", z, exc)
                return math.nan

        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(workers) as pool:
                vals = list(pool.map(work, pts))
        else:
            vals = [work(z) for z in pts]
        g.values[todo] = vals
        g.evaluations += len(todo)
        todo = np.flatnonzero(np.isnan(g.values))
        if len(todo) == 0:
            return g
    raise GridEvaluationError(f"{len(todo)} grid points could not be evaluated")


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _tri_edges(t) -> tuple:
    return (_edge(t[0], t[1]), _edge(t[1], t[2]), _edge(t[2], t[0]))


def straddling(g: ComplexGrid, levels: LevelSpec) -> np.ndarray:
    """Boolean mask of triangles crossed by at least one level set."""
    f = g.log_values()[g.triangles]
    lo, hi = f.min(axis=1), f.max(axis=1)
    L = levels.log_levels()
    return np.any((lo[:, None] < L[None]) & (L[None] <= hi[:, None]), axis=1)


def _refine_round(g: ComplexGrid, marked_current: np.ndarray, max_depth: int, budget: int) -> bool:
    """One red-green refinement sweep. Returns False if nothing was refined."""
    # undo green closure: gather the red-level triangulation
    red, red_depth, rl = [], [], {}
    owner = np.empty(len(g.triangles), dtype=int)
    for i, (t, d, p) in enumerate(zip(g.triangles.tolist(), g.depth.tolist(), g.parent.tolist())):
        key = tuple(p) if p[0] >= 0 else tuple(t)
        j = rl.get(key)
        if j is None:
            j = rl[key] = len(red)
            red.append(key)
            red_depth.append(d)
        owner[i] = j
    marked = {int(owner[i]) for i in np.flatnonzero(marked_current) if red_depth[owner[i]] < max_depth}
    if not marked:
        return False

    mids = dict(g.midpoints)
    verts = list(g.vertices)
    nv0 = len(verts)
    vdepth = {}
    while marked:
        split = set()
        for j in marked:
            split.update(_tri_edges(red[j]))
        changed = True
        while changed:
            changed = False
            for j, t in enumerate(red):
                if j not in marked and _needs_red(t, mids, split):
                    marked.add(j)
                    split.update(_tri_edges(t))
                    changed = True
        for e in sorted(split):
            if e not in mids:
                mids[e] = len(verts)
                verts.append(0.5 * (verts[e[0]] + verts[e[1]]))
        nred, ndepth = [], []
        for j, t in enumerate(red):
            d = red_depth[j]
            if j not in marked:
                nred.append(t)
                ndepth.append(d)
                continue
            a, b, c = t
            mab, mbc, mca = mids[_edge(a, b)], mids[_edge(b, c)], mids[_edge(c, a)]
            nred += [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
            ndepth += [d + 1] * 4
            for m in (mab, mbc, mca):
                if m >= nv0:
                    vdepth[m] = max(vdepth.get(m, 0), d + 1)
        red, red_depth = nred, ndepth
        # leaves next to much finer neighbours need another red split
        marked = {j for j, t in enumerate(red) if _needs_red(t, mids, ())}

    n_new = len(verts) - nv0
    if g.evaluations + n_new > budget:
        g.warning = f"evaluation budget {budget} exhausted"
        log.warning(g.warning)
        return False

    tris, depth, parent = [], [], []
    for t, d in zip(red, red_depth):
        hanging = [k for k in range(3) if _edge(t[k], t[(k + 1) % 3]) in mids]
        if hanging:
            k = hanging[0]
            p, q, r = t[k], t[(k + 1) % 3], t[(k + 2) % 3]
            m = mids[_edge(p, q)]
            tris += [(p, m, r), (m, q, r)]
            depth += [d, d]
            parent += [t, t]
        else:
            tris.append(t)
            depth.append(d)
            parent.append((-1, -1, -1))
    g.midpoints = mids
    g.vertices = np.array(verts, dtype=complex)
    g.values = np.concatenate([g.values, np.full(n_new, np.nan)])
    g.vdepth = np.concatenate([g.vdepth, np.array([vdepth.get(nv0 + k, 0) for k in range(n_new)], dtype=int)])
    g.triangles = np.array(tris, dtype=int)
    g.depth = np.array(depth, dtype=int)
    g.parent = np.array(parent, dtype=int)
    return True


def _needs_red(t, mids: dict, split) -> bool:
    """A leaf must be split red if two edges are cut or a cut edge is cut twice."""
    cut = 0
    for e in _tri_edges(t):
        if e in mids:
            cut += 1
            m = mids[e]
            for h in (_edge(e[0], m), _edge(m, e[1])):
                if h in mids or h in split:
                    return True
        elif e in split:
            cut += 1
    return cut >= 2


def refine_adaptive(g: ComplexGrid, levels: LevelSpec, op, max_depth: int = DEFAULT_MAX_DEPTH,
                    budget: int = DEFAULT_BUDGET, workers: int | None = None) -> ComplexGrid:
    """Refine triangles crossed by the level sets until they reach ``max_depth``.

    Stops early, with ``g.warning`` set, if the next sweep would exceed
    ``budget`` resolvent evaluations in total.
    """
    evaluate_grid(g, op, workers)
    while True:
        mask = straddling(g, levels)
        if not _refine_round(g, mask, max_depth, budget):
            return g
        evaluate_grid(g, op, workers)


def extract_isolines(g: ComplexGrid, levels: LevelSpec) -> IsolineSet:
    """Trace each level set by marching triangles on log10 of the samples."""
    f = g.log_values()
    out = {}
    for eps, L in zip(levels.epsilons, levels.log_levels()):
        inside = f >= L
        points = {}
        adj = {}
        for t in g.triangles.tolist():
            s = [inside[v] for v in t]
            if s[0] == s[1] == s[2]:
                continue
            keys = []
            for k in range(3):
                a, b = t[k], t[(k + 1) % 3]
                if s[k] != s[(k + 1) % 3]:
                    e = _edge(a, b)
                    if e not in points:
                        i, j = e
                        w = (L - f[i]) / (f[j] - f[i])
                        points[e] = g.vertices[i] + w * (g.vertices[j] - g.vertices[i])
                    keys.append(e)
            u, v = keys
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, []).append(u)
        out[eps] = _chain(points, adj)
    return out


def _chain(points: dict, adj: dict) -> list:
    seen = set()
    lines = []

    def walk(start):
        path = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [n for n in adj[cur] if n != prev and n not in seen]
            if not nxt:
                closed = len(path) > 2 and start in adj[cur] and prev is not None
                return path, closed
            prev, cur = cur, nxt[0]
            seen.add(cur)
            path.append(cur)

    for start in sorted(k for k in adj if len(adj[k]) == 1):
        if start not in seen:
            path, _ = walk(start)
            lines.append(Polyline(np.array([points[k] for k in path]), False))
    for start in sorted(adj):
        if start not in seen:
            path, closed = walk(start)
            lines.append(Polyline(np.array([points[k] for k in path]), closed))
    return lines


def contains(op, z: complex, eps: float) -> bool:
    """True iff z lies in the eps-pseudospectrum."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return as_operator(op).sigma_min(z) <= eps


@dataclass
class PseudospectrumResult:
    grid: ComplexGrid
    isolines: IsolineSet
    levels: LevelSpec
    window: tuple

    @property
    def warning(self):
        return self.grid.warning

    def finest_diameter(self) -> float:
        return float(self.grid.diameters().min())


def square_cells(window, n: int) -> tuple[int, int]:
    """Cell counts giving n cells on the shorter window side and near-square cells."""
    w, h = window[1] - window[0], window[3] - window[2]
    if w >= h:
        return max(n, round(n * w / h)), n
    return n, max(n, round(n * h / w))


def compute_pseudospectrum(op, epsilons, window=None, n: int = 16,
                           max_depth: int = DEFAULT_MAX_DEPTH, budget: int = DEFAULT_BUDGET,
                           workers: int | None = None) -> PseudospectrumResult:
    """GRID pipeline; ``n`` counts initial cells along the shorter window side."""
    sop = as_operator(op)
    levels = LevelSpec.of(epsilons)
    if window is None:
        window = default_window(op, levels.epsilons)
    g = initial_grid(window, *square_cells(window, n))
    refine_adaptive(g, levels, sop, max_depth, budget, workers)
    return PseudospectrumResult(g, extract_isolines(g, levels), levels, tuple(window))


# ---------------------------------------------------------------------------
# CSV artifacts


def write_grid_csv(g: ComplexGrid, path: str | Path) -> None:
    """Vertex samples to ``path``; triangles to the sibling ``*.tri.csv``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "resnorm", "depth"])
        for z, v, d in zip(g.vertices, g.values, g.vdepth):
            w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(v)), int(d)])
    with open(_tri_path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v0", "v1", "v2", "depth", "p0", "p1", "p2"])
        for t, d, p in zip(g.triangles.tolist(), g.depth.tolist(), g.parent.tolist()):
            w.writerow([*t, d, *p])


def _tri_path(path: Path) -> Path:
    return path.with_name(path.stem + ".tri.csv")


def read_grid_csv(path: str | Path) -> ComplexGrid:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    verts = np.array([complex(float(r[0]), float(r[1])) for r in rows])
    vals = np.array([float(r[2]) for r in rows])
    vd = np.array([int(r[3]) for r in rows], dtype=int)
    tris = np.zeros((0, 3), dtype=int)
    depth = np.zeros(0, dtype=int)
    parent = np.zeros((0, 3), dtype=int)
    tp = _tri_path(path)
    if tp.exists():
        with open(tp, newline="") as fh:
            trows = np.array([[int(v) for v in r] for r in list(csv.reader(fh))[1:]], dtype=int).reshape(-1, 7)
        tris, depth, parent = trows[:, :3], trows[:, 3], trows[:, 4:]
    g = ComplexGrid(verts, tris, vals, depth, vd, parent)
    g.evaluations = int(np.isfinite(vals).sum() + np.isinf(vals).sum())
    # rebuild the midpoint table from green parents and vertex coordinates
    index = {complex(z): i for i, z in enumerate(verts)}
    edges = set()
    for t in tris.tolist():
        edges.update(_tri_edges(t))
    for p in parent.tolist():
        if p[0] >= 0:
            edges.update(_tri_edges(p))
    for a, b in edges:
        m = index.get(complex(0.5 * (verts[a] + verts[b])))
        if m is not None:
            g.midpoints[(a, b)] = m
    return g


def write_isolines_csv(iso: IsolineSet, path: str | Path) -> None:
    """Closed polylines repeat their first point at the end."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "polyline_id", "point_index", "re", "im"])
        for eps in sorted(iso):
            for pid, line in enumerate(iso[eps]):
                pts = list(line.points) + ([line.points[0]] if line.closed else [])
                for k, z in enumerate(pts):
                    w.writerow([repr(float(eps)), pid, k, repr(float(z.real)), repr(float(z.imag))])


def read_isolines_csv(path: str | Path) -> IsolineSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    groups = {}
    for eps, pid, _, re, im in rows:
        groups.setdefault(float(eps), {}).setdefault(int(pid), []).append(complex(float(re), float(im)))
    out = {}
    for eps, lines in groups.items():
        out[eps] = []
        for pid in sorted(lines):
            pts = lines[pid]
            closed = len(pts) > 3 and pts[0] == pts[-1]
            out[eps].append(Polyline(np.array(pts[:-1] if closed else pts), closed))
    return out
