"""Polygonal meshes: construction, generators, JSON I/O and regularity checks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .errors import MeshError

TAGS = ("D", "N", "inner", "outer")


def signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(xy: np.ndarray) -> np.ndarray:
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def polygon_diameter(xy: np.ndarray) -> float:
    d = xy[:, None, :] - xy[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def is_simple(xy: np.ndarray) -> bool:
    """True when no two non-adjacent edges of the closed loop cross."""
    n = len(xy)
    if n < 3:
        return False
    if len({tuple(p) for p in xy}) < n:
        return False
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(xy[i], xy[(i + 1) % n], xy[j], xy[(j + 1) % n]):
                return False
    return True


def centroid_sees_all_edges(xy: np.ndarray, centroid: np.ndarray | None = None) -> bool:
    """Whether the (CCW) polygon is star-shaped with respect to its centroid."""
    c = polygon_centroid(xy) if centroid is None else centroid
    nxt = np.roll(xy, -1, axis=0)
    cross = (nxt[:, 0] - xy[:, 0]) * (c[1] - xy[:, 1]) - (nxt[:, 1] - xy[:, 1]) * (c[0] - xy[:, 0])
    return bool(np.all(cross > 0.0))


@dataclass(frozen=True)
class BoundaryPartition:
    """Splits boundary tags into Dirichlet and Neumann sets for one sub-problem."""

    dirichlet: frozenset[str]

    def __init__(self, dirichlet: Iterable[str]):
        object.__setattr__(self, "dirichlet", frozenset(dirichlet))

    def is_dirichlet(self, tag: str) -> bool:
        return tag in self.dirichlet

    def check(self, mesh: "PolygonalMesh") -> None:
        tags = set(mesh.boundary_tags.values())
        if not tags & self.dirichlet:
            raise MeshError(
                f"Dirichlet part is empty: tags {sorted(self.dirichlet)} not found on boundary "
                f"(available: {sorted(tags)})"
            )


class PolygonalMesh:
    """Conforming 2D polygonal mesh with counter-clockwise element loops.

    Edges are stored once, oriented from the smaller to the larger vertex
    index. ``edge_elements[e]`` holds the (up to) two incident elements,
    ``-1`` marking the missing neighbour of a boundary edge. Every boundary
    edge carries exactly one tag from ``boundary_tags``.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        elements: Sequence[Sequence[int]],
        boundary_tags: Mapping[tuple[int, int], str] | Callable[[np.ndarray], str],
    ):
        verts = np.array(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        loops = []
        reoriented = []
        for k, el in enumerate(elements):
            loop = [int(i) for i in el]
            if len(loop) < 3:
                raise MeshError(f"element {k} has fewer than 3 vertices")
            if min(loop) < 0 or max(loop) >= len(verts):
                raise MeshError(f"element {k} references a missing vertex")
            a = signed_area(verts[loop])
            if a < 0:
                loop = loop[::-1]
                reoriented.append(k)
            elif a == 0:
                raise MeshError(f"element {k} has zero area")
            if not is_simple(verts[loop]):
                raise MeshError(f"element {k} is not a simple polygon")
            loops.append(np.array(loop, dtype=np.int64))
        self.vertices = verts
        self.elements = loops
        self.reoriented = tuple(reoriented)

        edge_index: dict[tuple[int, int], int] = {}
        edges: list[tuple[int, int]] = []
        incidence: list[list[int]] = []
        elem_edges = []
        elem_signs = []
        for k, loop in enumerate(loops):
            ids, signs = [], []
            for a, b in zip(loop, np.roll(loop, -1)):
                key = (min(a, b), max(a, b))
                e = edge_index.get(key)
                if e is None:
                    e = len(edges)
                    edge_index[key] = e
                    edges.append(key)
                    incidence.append([])
                incidence[e].append(k)
                ids.append(e)
                signs.append(1 if a < b else -1)
            elem_edges.append(np.array(ids, dtype=np.int64))
            elem_signs.append(np.array(signs, dtype=np.int64))
        for e, inc in enumerate(incidence):
            if len(inc) > 2:
                raise MeshError(f"edge {edges[e]} is shared by {len(inc)} elements (non-conforming)")
            if len(inc) == 2 and inc[0] == inc[1]:
                raise MeshError(f"edge {edges[e]} appears twice in element {inc[0]}")
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.edge_elements = np.array([inc + [-1] * (2 - len(inc)) for inc in incidence], dtype=np.int64)
        self.element_edges = elem_edges
        self.element_edge_signs = elem_signs
        self._edge_index = edge_index

        bnd = np.flatnonzero(self.edge_elements[:, 1] < 0)
        tags: dict[int, str] = {}
        for e in bnd:
            a, b = self.edges[e]
            if callable(boundary_tags):
                tag = boundary_tags(0.5 * (verts[a] + verts[b]))
            else:
                tag = boundary_tags.get((a, b), boundary_tags.get((b, a)))
            if tag is None:
                raise MeshError(f"boundary edge {(int(a), int(b))} has no tag")
            if tag not in TAGS:
                raise MeshError(f"unknown boundary tag {tag!r} on edge {(int(a), int(b))}")
            tags[int(e)] = tag
        if not callable(boundary_tags):
            for key in boundary_tags:
                e = edge_index.get((min(key), max(key)))
                if e is None or self.edge_elements[e, 1] >= 0:
                    raise MeshError(f"tagged edge {tuple(key)} is not a boundary edge")
        self.boundary_edges = bnd
        self.boundary_tags = tags

        self.areas = np.array([signed_area(verts[l]) for l in loops])
        self.centroids = np.array([polygon_centroid(verts[l]) for l in loops])
        self.diameters = np.array([polygon_diameter(verts[l]) for l in loops])
        self.edge_lengths = np.linalg.norm(verts[self.edges[:, 1]] - verts[self.edges[:, 0]], axis=1)
        for arr in (self.vertices, self.edges, self.edge_elements, self.areas,
                    self.centroids, self.diameters, self.edge_lengths):
            arr.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def element_coords(self, k: int) -> np.ndarray:
        return self.vertices[self.elements[k]]

    def edge_id(self, a: int, b: int) -> int:
        return self._edge_index[(min(a, b), max(a, b))]

    def edges_with_tags(self, tags: Iterable[str]) -> np.ndarray:
        tags = set(tags)
        return np.array(sorted(e for e, t in self.boundary_tags.items() if t in tags), dtype=np.int64)

    def retag(self, tagger: Callable[[np.ndarray], str]) -> "PolygonalMesh":
        """Copy of the mesh with boundary tags recomputed from edge midpoints."""
        return PolygonalMesh(self.vertices, self.elements, tagger)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolygonalMesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and len(self.elements) == len(other.elements)
            and all(np.array_equal(a, b) for a, b in zip(self.elements, other.elements))
            and self._tag_pairs() == other._tag_pairs()
        )

    def _tag_pairs(self) -> dict:
        return {tuple(int(i) for i in self.edges[e]): t for e, t in self.boundary_tags.items()}

    def __repr__(self) -> str:
        return f"PolygonalMesh(N_v={self.n_vertices}, N_e={self.n_edges}, N_E={self.n_elements}, h={self.h:.4g})"


# --------------------------------------------------------------------------- tagging

def rectangle_tagger(domain=((0.0, 1.0), (0.0, 1.0)), dirichlet_sides=("left", "bottom")) -> Callable:
    """Tag edges on the listed rectangle sides ``D`` and the rest ``N``."""
    (x0, x1), (y0, y1) = domain
    tol = 1e-9 * max(x1 - x0, y1 - y0)

    def tag(mid):
        side = None
        if abs(mid[0] - x0) < tol:
            side = "left"
        elif abs(mid[0] - x1) < tol:
            side = "right"
        elif abs(mid[1] - y0) < tol:
            side = "bottom"
        elif abs(mid[1] - y1) < tol:
            side = "top"
        return "D" if side in dirichlet_sides else "N"

    return tag


# --------------------------------------------------------------------------- generators

def _grid_vertices(n, domain):
    (x0, x1), (y0, y1) = domain
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def generate_square_mesh(n: int, domain=((0.0, 1.0), (0.0, 1.0)), tagger=None) -> PolygonalMesh:
    if n < 1:
        raise ValueError("n must be >= 1")
    verts = _grid_vertices(n, domain)
    vid = lambda i, j: j * (n + 1) + i
    elements = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)] for j in range(n) for i in range(n)]
    return PolygonalMesh(verts, elements, tagger or rectangle_tagger(domain))


def generate_crossed_mesh(n: int, domain=((0.0, 1.0), (0.0, 1.0)), tagger=None) -> PolygonalMesh:
    """Each grid square cut into four triangles through its centre."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = _grid_vertices(n, domain)
    (x0, x1), (y0, y1) = domain
    hx, hy = (x1 - x0) / n, (y1 - y0) / n
    centres = np.array([[x0 + (i + 0.5) * hx, y0 + (j + 0.5) * hy] for j in range(n) for i in range(n)])
    verts = np.vstack([grid, centres])
    vid = lambda i, j: j * (n + 1) + i
    elements = []
    for j in range(n):
        for i in range(n):
            c = len(grid) + j * n + i
            a, b, cc, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            elements += [[a, b, c], [b, cc, c], [cc, d, c], [d, a, c]]
    return PolygonalMesh(verts, elements, tagger or rectangle_tagger(domain))


def generate_nonconvex_mesh(n: int, domain=((0.0, 1.0), (0.0, 1.0)), depth: float = 0.2, tagger=None) -> PolygonalMesh:
    """Grid cells split into two non-convex hexagons by a zig-zag cut.

    The cut runs from the midpoint of the left side to the midpoint of the
    right side through (1/3, 1/2 + depth) and (2/3, 1/2 - depth) in cell
    coordinates, so neighbouring cells share the side midpoints.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < depth < 0.5:
        raise ValueError("depth must lie in (0, 0.5)")
    (x0, x1), (y0, y1) = domain
    hx, hy = (x1 - x0) / n, (y1 - y0) / n
    verts: list[tuple[float, float]] = []
    index: dict[tuple, int] = {}

    def vid(key, xy):
        if key not in index:
            index[key] = len(verts)
            verts.append(xy)
        return index[key]

    elements = []
    for j in range(n):
        for i in range(n):
            X = lambda s: x0 + (i + s) * hx
            Y = lambda t: y0 + (j + t) * hy
            c00 = vid(("g", i, j), (X(0), Y(0)))
            c10 = vid(("g", i + 1, j), (X(1), Y(0)))
            c11 = vid(("g", i + 1, j + 1), (X(1), Y(1)))
            c01 = vid(("g", i, j + 1), (X(0), Y(1)))
            ml = vid(("m", i, j), (X(0), Y(0.5)))
            mr = vid(("m", i + 1, j), (X(1), Y(0.5)))
            z1 = vid(("z1", i, j), (X(1 / 3), Y(0.5 + depth)))
            z2 = vid(("z2", i, j), (X(2 / 3), Y(0.5 - depth)))
            elements.append([c00, c10, mr, z2, z1, ml])
            elements.append([ml, z1, z2, mr, c11, c01])
    return PolygonalMesh(np.array(verts), elements, tagger or rectangle_tagger(domain))


def _merge_close(points: np.ndarray, tol: float) -> np.ndarray:
    """Representative index for each point, merging clusters closer than ``tol``."""
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(points).query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    return np.array([find(i) for i in range(len(points))])


def _voronoi_cells(seeds: np.ndarray, mirrors: np.ndarray, tol: float):
    """Voronoi cells of ``seeds`` with ``mirrors`` acting as boundary ghosts.

    Returns (vertices, loops) with near-coincident Voronoi vertices merged.
    """
    allpts = np.vstack([seeds, mirrors])
    if len(np.unique(np.round(seeds / tol).astype(np.int64), axis=0)) < len(seeds):
        raise MeshError("duplicate seeds: Voronoi diagram is degenerate")
    try:
        vor = Voronoi(allpts)
    except Exception as exc:  # qhull raises its own error type
        raise MeshError(f"Voronoi construction failed (degenerate seeds?): {exc}") from exc
    rep = _merge_close(vor.vertices, tol)
    loops = []
    for s in range(len(seeds)):
        region = vor.regions[vor.point_region[s]]
        if not region or -1 in region:
            raise MeshError(f"Voronoi cell of seed {s} is unbounded; boundary ghosts do not enclose it")
        pts = vor.vertices[region]
        ang = np.arctan2(pts[:, 1] - seeds[s, 1], pts[:, 0] - seeds[s, 0])
        ordered = [rep[region[i]] for i in np.argsort(ang)]
        loop = [v for i, v in enumerate(ordered) if v != ordered[i - 1]]
        if len(loop) < 3:
            raise MeshError(f"Voronoi cell of seed {s} collapsed")
        loops.append(loop)
    used = sorted({v for l in loops for v in l})
    remap = {v: i for i, v in enumerate(used)}
    return vor.vertices[used].copy(), [[remap[v] for v in l] for l in loops]


def _rect_mirrors(seeds, domain):
    (x0, x1), (y0, y1) = domain
    x, y = seeds[:, 0], seeds[:, 1]
    return np.vstack([
        np.column_stack([2 * x0 - x, y]),
        np.column_stack([2 * x1 - x, y]),
        np.column_stack([x, 2 * y0 - y]),
        np.column_stack([x, 2 * y1 - y]),
    ])


def _snap_rect(verts, domain, tol):
    (x0, x1), (y0, y1) = domain
    v = verts.copy()
    for col, lo, hi in ((0, x0, x1), (1, y0, y1)):
        v[np.abs(v[:, col] - lo) < tol, col] = lo
        v[np.abs(v[:, col] - hi) < tol, col] = hi
    return v


def _cell_centroids(verts, loops):
    return np.array([polygon_centroid(verts[l]) for l in loops])


def generate_voronoi_mesh(
    n_seeds: int,
    domain=((0.0, 1.0), (0.0, 1.0)),
    rng_seed: int = 0,
    lloyd_iterations: int = 0,
    perturbation: float = 0.0,
    tagger=None,
) -> PolygonalMesh:
    """Voronoi mesh of a rectangle built from random seeds.

    Seeds are mirrored across the four sides so that the cells of the
    original seeds tile the rectangle exactly. ``lloyd_iterations`` moves
    seeds to cell centroids; ``perturbation`` then jitters interior vertices
    by up to that fraction of their shortest incident edge.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if not 0.0 <= perturbation < 0.5:
        raise ValueError("perturbation must lie in [0, 0.5)")
    (x0, x1), (y0, y1) = domain
    L = max(x1 - x0, y1 - y0)
    tol = 1e-9 * L
    rng = np.random.default_rng(rng_seed)
    seeds = np.column_stack([rng.uniform(x0, x1, n_seeds), rng.uniform(y0, y1, n_seeds)])
    for _ in range(lloyd_iterations + 1):
        verts, loops = _voronoi_cells(seeds, _rect_mirrors(seeds, domain), tol)
        verts = _snap_rect(verts, domain, 1e-7 * L)
        seeds = _cell_centroids(verts, loops)
    if perturbation > 0:
        verts = _perturb(verts, loops, perturbation, rng, fixed=_on_rect_boundary(verts, domain))
    return PolygonalMesh(verts, loops, tagger or rectangle_tagger(domain))


def _on_rect_boundary(verts, domain):
    (x0, x1), (y0, y1) = domain
    return (verts[:, 0] == x0) | (verts[:, 0] == x1) | (verts[:, 1] == y0) | (verts[:, 1] == y1)


def _perturb(verts, loops, fraction, rng, fixed):
    shortest = np.full(len(verts), np.inf)
    owners: list[list[int]] = [[] for _ in verts]
    for k, l in enumerate(loops):
        for a, b in zip(l, l[1:] + l[:1]):
            d = np.linalg.norm(verts[a] - verts[b])
            shortest[a] = min(shortest[a], d)
            shortest[b] = min(shortest[b], d)
            owners[a].append(k)
    out = verts.copy()
    r = fraction * shortest * rng.uniform(0.0, 1.0, len(verts))
    t = rng.uniform(0.0, 2 * np.pi, len(verts))
    for v in np.flatnonzero(~fixed):
        trial = verts[v] + r[v] * np.array([np.cos(t[v]), np.sin(t[v])])
        old = out[v].copy()
        out[v] = trial
        if any(signed_area(out[loops[k]]) <= 0 or not is_simple(out[loops[k]]) for k in owners[v]):
            out[v] = old
    return out


def generate_annulus_mesh(
    rho_i: float = 1.0,
    rho_o: float = 5.0,
    n_seeds: int = 500,
    rng_seed: int = 0,
    lloyd_iterations: int = 20,
) -> PolygonalMesh:
    """Voronoi mesh of the annulus rho_i < |x| < rho_o centred at the origin.

    Seeds are reflected through both circles; the polygonal boundary is
    made of bisectors between seeds and their reflections. Boundary edges
    are tagged ``inner`` or ``outer`` by their midpoint radius.
    """
    if not 0.0 < rho_i < rho_o:
        raise ValueError("need 0 < rho_i < rho_o")
    if n_seeds < 3:
        raise ValueError("n_seeds must be >= 3")
    rng = np.random.default_rng(rng_seed)
    r = np.sqrt(rng.uniform(rho_i**2, rho_o**2, n_seeds))
    t = rng.uniform(0.0, 2 * np.pi, n_seeds)
    seeds = np.column_stack([r * np.cos(t), r * np.sin(t)])
    tol = 1e-9 * rho_o

    def mirrors(s):
        rad = np.linalg.norm(s, axis=1)
        unit = s / rad[:, None]
        near = rad < 2 * rho_i
        inner = unit[near] * (2 * rho_i - rad[near])[:, None]
        return np.vstack([unit * (2 * rho_o - rad)[:, None], inner, np.zeros((1, 2))])

    for _ in range(lloyd_iterations + 1):
        verts, loops = _voronoi_cells(seeds, mirrors(seeds), tol)
        seeds = _cell_centroids(verts, loops)
    mid = 0.5 * (rho_i + rho_o)
    return PolygonalMesh(verts, loops, lambda m: "inner" if np.hypot(*m) < mid else "outer")


# --------------------------------------------------------------------------- I/O

def mesh_to_dict(mesh: PolygonalMesh) -> dict:
    return {
        "vertices": mesh.vertices.tolist(),
        "elements": [l.tolist() for l in mesh.elements],
        "boundary": [
            {"edge": [int(i) for i in mesh.edges[e]], "tag": t} for e, t in sorted(mesh.boundary_tags.items())
        ],
    }


def mesh_from_dict(data: Mapping) -> PolygonalMesh:
    try:
        verts = np.array(data["vertices"], dtype=float)
        elements = [list(map(int, el)) for el in data["elements"]]
        tags = {}
        for item in data["boundary"]:
            a, b = (int(i) for i in item["edge"])
            if (a, b) in tags or (b, a) in tags:
                raise MeshError(f"boundary edge {(a, b)} tagged more than once")
            tags[(a, b)] = item["tag"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MeshError(f"malformed mesh data: {exc}") from exc
    return PolygonalMesh(verts, elements, tags)


def save_mesh(mesh: PolygonalMesh, path) -> None:
    with open(path, "w") as fh:
        json.dump(mesh_to_dict(mesh), fh)


def load_mesh(path) -> PolygonalMesh:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeshError(f"{path}: not valid JSON ({exc})") from exc
    return mesh_from_dict(data)


# --------------------------------------------------------------------------- regularity

@dataclass
class RegularityReport:
    rho: float
    edge_ratio: np.ndarray
    star_from_centroid: np.ndarray
    convex: np.ndarray
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _is_convex(xy):
    nxt, prv = np.roll(xy, -1, axis=0), np.roll(xy, 1, axis=0)
    cross = (xy[:, 0] - prv[:, 0]) * (nxt[:, 1] - xy[:, 1]) - (xy[:, 1] - prv[:, 1]) * (nxt[:, 0] - xy[:, 0])
    return bool(np.all(cross > 0))


def validate_regularity(mesh: PolygonalMesh, rho: float = 0.0) -> RegularityReport:
    """Per-element worst edge ratio min_e h_e / h_E and a centroid star test.

    Convex elements are star-shaped from any interior point, so the test is
    exact there; for non-convex ones only visibility from the centroid is
    checked.
    """
    ratios, star, convex, bad = [], [], [], []
    for k in range(mesh.n_elements):
        xy = mesh.element_coords(k)
        r = mesh.edge_lengths[mesh.element_edges[k]].min() / mesh.diameters[k]
        cvx = _is_convex(xy)
        s = cvx or centroid_sees_all_edges(xy, mesh.centroids[k])
        ratios.append(r)
        star.append(s)
        convex.append(cvx)
        if r < rho:
            bad.append((k, "edge_ratio", float(r)))
        if not s:
            bad.append((k, "not_star_from_centroid", None))
    return RegularityReport(rho, np.array(ratios), np.array(star), np.array(convex), bad)
