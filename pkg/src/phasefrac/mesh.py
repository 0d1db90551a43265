"""Benchmark geometry generators, 9-node quadrilaterals and quadrature.

Three built-in geometries: a unit square with a centred circular hole
(block-structured O-grid, hole-adjacent mid-edge nodes exactly on the
circle), a unit square with a zero-thickness edge slit at mid-height for
shear loading, and a rectangle with a centre-left edge slit for dynamic
loading.  Slits duplicate the nodes on both faces; the slit tip node is
shared.

Element node ordering (biquadratic Lagrange): corners counterclockwise,
then edge midside nodes (bottom, right, top, left), then the centre node.
Generation is deterministic: identical inputs give identical arrays.
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

#: Local coordinates (xi, eta) of the 9 nodes.
LOCAL_NODES = np.array(
    [
        [-1.0, -1.0],
        [1.0, -1.0],
        [1.0, 1.0],
        [-1.0, 1.0],
        [0.0, -1.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [-1.0, 0.0],
        [0.0, 0.0],
    ]
)

#: Element edges as (corner, midside, corner) local indices.
EDGES = ((0, 4, 1), (1, 5, 2), (2, 6, 3), (3, 7, 0))

# 1D index pair (a, b) per node into the quadratic Lagrange basis
_AB = np.array([[0, 0], [2, 0], [2, 2], [0, 2], [1, 0], [2, 1], [1, 2], [0, 1], [1, 1]])


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray


def quadrature(order: int = 3) -> QuadratureRule:
    """Tensor-product Gauss rule on the biunit square (order 2 or 3)."""
    if order not in (2, 3):
        raise ValueError(f"unsupported quadrature order {order}; use 2 or 3")
    x, w = np.polynomial.legendre.leggauss(order)
    pts = np.array([[xi, yi] for yi in x for xi in x])
    wts = np.array([wx * wy for wy in w for wx in w])
    return QuadratureRule(pts, wts)


def _lag(x):
    return np.array([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)])


def _dlag(x):
    return np.array([x - 0.5, -2.0 * x, x + 0.5])


def shape_eval(xi: float, eta: float):
    """Biquadratic basis: values ``N`` (9,) and local gradients ``dN`` (9, 2)."""
    lx, ly = _lag(xi), _lag(eta)
    dlx, dly = _dlag(xi), _dlag(eta)
    N = lx[_AB[:, 0]] * ly[_AB[:, 1]]
    dN = np.column_stack([dlx[_AB[:, 0]] * ly[_AB[:, 1]], lx[_AB[:, 0]] * dly[_AB[:, 1]]])
    return N, dN


@dataclass
class Mesh:
    nodes: np.ndarray  # (n_nodes, 2)
    elements: np.ndarray  # (n_el, 9) int64
    boundary_nodes: Dict[str, np.ndarray] = field(default_factory=dict)
    boundary_edges: Dict[str, np.ndarray] = field(default_factory=dict)  # (n, 2): element, local edge
    characteristic_size: float = 0.0

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]


def element_areas(mesh: Mesh, rule: QuadratureRule = None) -> np.ndarray:
    """Quadrature of unity per element; also validates Jacobian positivity."""
    rule = rule or quadrature(3)
    areas = np.zeros(mesh.n_elements)
    dN_all = [shape_eval(*p)[1] for p in rule.points]
    for e, conn in enumerate(mesh.elements):
        X = mesh.nodes[conn]
        acc = 0.0
        for dN, w in zip(dN_all, rule.weights):
            J = X.T @ dN
            det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
            acc += w * det
        areas[e] = acc
    return areas


def check_jacobians(mesh: Mesh, rule: QuadratureRule = None) -> float:
    """Minimum Jacobian determinant over all elements and gauss points."""
    rule = rule or quadrature(3)
    dN_all = [shape_eval(*p)[1] for p in rule.points]
    worst = np.inf
    for conn in mesh.elements:
        X = mesh.nodes[conn]
        for dN in dN_all:
            J = X.T @ dN
            det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
            worst = min(worst, det)
    return float(worst)


def _collect_boundary(mesh: Mesh, name: str, mask_fn):
    ids = np.nonzero(mask_fn(mesh.nodes))[0]
    mesh.boundary_nodes[name] = ids.astype(np.int64)
    on = np.zeros(mesh.n_nodes, bool)
    on[ids] = True
    edges = []
    for e, conn in enumerate(mesh.elements):
        for le, (i, m, j) in enumerate(EDGES):
            if on[conn[i]] and on[conn[m]] and on[conn[j]]:
                edges.append((e, le))
    mesh.boundary_edges[name] = np.array(edges, dtype=np.int64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# Structured rectangle (basis for the slit geometries)
# ---------------------------------------------------------------------------


def _structured_rectangle(width, height, nx, ny):
    fx, fy = 2 * nx + 1, 2 * ny + 1
    xs = np.linspace(0.0, width, fx)
    ys = np.linspace(0.0, height, fy)
    nodes = np.column_stack([np.tile(xs, fy), np.repeat(ys, fx)])
    elements = np.zeros((nx * ny, 9), dtype=np.int64)
    for ey in range(ny):
        for ex in range(nx):
            bi, bj = 2 * ex, 2 * ey
            ids = [(bj + b) * fx + (bi + a) for a, b in _AB]
            elements[ey * nx + ex] = ids
    return nodes, elements, fx, fy


def _slit_rectangle(width, height, nx, ny, notch_len, tag):
    """Rectangle with a horizontal zero-thickness slit at mid-height.

    The slit runs from the left edge to ``notch_len`` (snapped to the
    element grid); nodes on the open segment are duplicated, the tip node
    is shared.  Elements below the slit keep the original nodes, elements
    above reference the duplicates.
    """
    if ny % 2 != 0:
        raise ValueError("ny must be even so the slit lies on an element boundary")
    nodes, elements, fx, fy = _structured_rectangle(width, height, nx, ny)
    jn = ny  # fine row index of mid-height
    n_notch = int(round(notch_len / (width / nx)))
    if not 0 < n_notch < nx:
        raise ValueError("notch length must resolve to at least one element and less than the width")
    tip_fi = 2 * n_notch

    orig = [jn * fx + fi for fi in range(tip_fi)]
    dup_ids = np.arange(len(orig)) + nodes.shape[0]
    nodes = np.vstack([nodes, nodes[orig]])
    remap = dict(zip(orig, dup_ids))

    # elements whose bottom edge lies on the slit line use the duplicates
    for ey in range(ny // 2, ny // 2 + 1):
        for ex in range(nx):
            el = ey * nx + ex
            for k, nid in enumerate(elements[el]):
                if nid in remap:
                    elements[el, k] = remap[nid]

    mesh = Mesh(nodes, elements, characteristic_size=width / nx)
    tol = 1e-9 * max(width, height)
    _collect_boundary(mesh, "bottom", lambda n: np.abs(n[:, 1]) < tol)
    _collect_boundary(mesh, "top", lambda n: np.abs(n[:, 1] - height) < tol)
    _collect_boundary(mesh, "left", lambda n: np.abs(n[:, 0]) < tol)
    _collect_boundary(mesh, "right", lambda n: np.abs(n[:, 0] - width) < tol)
    lower = np.array(orig, dtype=np.int64)
    upper = dup_ids.astype(np.int64)
    mesh.boundary_nodes["notch_lower"] = lower
    mesh.boundary_nodes["notch_upper"] = upper
    mesh.boundary_nodes["notch_faces"] = np.concatenate([lower, upper])
    return mesh


def generate_sent(target_dx: float) -> Mesh:
    """Unit square with an edge slit from the left boundary to the centre."""
    if target_dx <= 0:
        raise ValueError("target_dx must be positive")
    n = max(2, int(round(1.0 / target_dx)))
    if n % 2 != 0:
        n += 1
    return _slit_rectangle(1.0, 1.0, n, n, 0.5, "sent")


def generate_dynamic_plate(
    target_dx: float, width: float = 1.0, height: float = 0.5, notch_len: float = 0.25
) -> Mesh:
    """Rectangle with a centre-left edge slit, loaded by edge tractions."""
    if target_dx <= 0:
        raise ValueError("target_dx must be positive")
    if not 0.0 < notch_len < width:
        raise ValueError("notch_len must lie inside the plate width")
    nx = max(2, int(round(width / target_dx)))
    ny = max(2, int(round(height / target_dx)))
    if ny % 2 != 0:
        ny += 1
    return _slit_rectangle(width, height, nx, ny, notch_len, "dynamic")


def unit_square(nx: int, ny: int, width: float = 1.0, height: float = 1.0) -> Mesh:
    """Plain structured rectangle (test helper and patch-test meshes)."""
    nodes, elements, _, _ = _structured_rectangle(width, height, nx, ny)
    mesh = Mesh(nodes, elements, characteristic_size=width / nx)
    tol = 1e-9 * max(width, height)
    _collect_boundary(mesh, "bottom", lambda n: np.abs(n[:, 1]) < tol)
    _collect_boundary(mesh, "top", lambda n: np.abs(n[:, 1] - height) < tol)
    _collect_boundary(mesh, "left", lambda n: np.abs(n[:, 0]) < tol)
    _collect_boundary(mesh, "right", lambda n: np.abs(n[:, 0] - width) < tol)
    return mesh


# ---------------------------------------------------------------------------
# Plate with hole (block-structured O-grid)
# ---------------------------------------------------------------------------


def _radial_fractions(L: float, dx: float, cap: float = 2.0):
    """Element-boundary fractions with geometric grading.

    First layer is about ``dx`` thick, layer growth capped so the last
    layer is at most ``cap`` times the first.
    """
    n_uni = int(np.ceil(L / dx))
    if n_uni * dx <= L * 1.0000001 and n_uni >= 1 and L / n_uni <= dx * 1.3:
        n = n_uni
        fr = np.linspace(0.0, 1.0, n + 1)
        return fr
    n = max(2, int(np.ceil(2.0 * L / ((1.0 + cap) * dx))))
    for _ in range(20):
        lo, hi = 1.0 + 1e-12, 4.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            h1 = L * (mid - 1.0) / (mid**n - 1.0)
            if h1 > dx:
                lo = mid
            else:
                hi = mid
        rho = 0.5 * (lo + hi)
        if rho ** (n - 1) <= cap * 1.0001:
            break
        n += 1
    layers = dx * rho ** np.arange(n)
    fr = np.concatenate([[0.0], np.cumsum(layers)])
    return fr / fr[-1]


def generate_plate_with_hole(target_dx: float) -> Mesh:
    """Unit square with a centred hole of diameter 0.2 m.

    Four transfinite blocks blend from quarter arcs of the hole to the
    four outer edges (the hole itself closes the block ring).  All nodes
    of the innermost ring lie exactly on the circle, including midside
    nodes.  Radial spacing starts at ``target_dx`` at the hole and grows
    geometrically by at most a factor two.
    """
    if not 0.0 < target_dx < 0.1:
        raise ValueError("target_dx must be in (0, 0.1)")
    R = 0.1
    cx = cy = 0.5
    quarter_arc = 0.5 * np.pi * R
    n_t = max(1, int(round(quarter_arc / target_dx)))
    if 4 * n_t < 8:
        raise ValueError("target_dx too large: fewer than 8 elements around the hole")
    # radial fractions shared by all blocks; mid-block distance hole -> edge
    fr = _radial_fractions(0.4, target_dx)
    n_r = len(fr) - 1
    f_fine = np.zeros(2 * n_r + 1)
    f_fine[0::2] = fr
    f_fine[1::2] = 0.5 * (fr[:-1] + fr[1:])

    corners = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0], [1.0, 0.0]])
    theta0 = np.array([-0.25, 0.25, 0.75, 1.25]) * np.pi

    ns_f = 2 * n_t + 1
    nr_f = 2 * n_r + 1
    blocks = []
    for b in range(4):
        ang = theta0[b] + (np.arange(ns_f) / (ns_f - 1)) * 0.5 * np.pi
        A = np.column_stack([cx + R * np.cos(ang), cy + R * np.sin(ang)])
        t_par = (np.arange(ns_f) / (ns_f - 1))[:, None]
        B = corners[b] * (1.0 - t_par) + corners[b + 1] * t_par
        P = np.zeros((ns_f, nr_f, 2))
        # corner-level nodes on the straight blend lines
        for js in range(0, ns_f, 2):
            for jt in range(0, nr_f, 2):
                f = f_fine[jt]
                P[js, jt] = (1.0 - f) * A[js] + f * B[js]
        # hole ring: every node exactly on the circle
        for js in range(ns_f):
            P[js, 0] = A[js]
        # arc-direction midside nodes (straight-edge midpoints beyond the ring)
        for js in range(1, ns_f, 2):
            for jt in range(2, nr_f, 2):
                P[js, jt] = 0.5 * (P[js - 1, jt] + P[js + 1, jt])
        # radial midside nodes
        for js in range(0, ns_f, 2):
            for jt in range(1, nr_f, 2):
                P[js, jt] = 0.5 * (P[js, jt - 1] + P[js, jt + 1])
        # centre nodes: serendipity average of the surrounding 8
        for js in range(1, ns_f, 2):
            for jt in range(1, nr_f, 2):
                mids = P[js - 1, jt] + P[js + 1, jt] + P[js, jt - 1] + P[js, jt + 1]
                crns = (
                    P[js - 1, jt - 1] + P[js + 1, jt - 1] + P[js + 1, jt + 1] + P[js - 1, jt + 1]
                )
                P[js, jt] = 0.5 * mids - 0.25 * crns
        blocks.append(P)

    # global numbering with seam welding: block b shares its last arc column
    # with block (b+1) % 4's first column
    node_ids = [np.full((ns_f, nr_f), -1, dtype=np.int64) for _ in range(4)]
    coords = []

    def new_node(pt):
        coords.append(pt)
        return len(coords) - 1

    for b in range(4):
        ids = node_ids[b]
        for js in range(ns_f):
            if js == 0 and b > 0:
                node_ids[b][0, :] = node_ids[b - 1][ns_f - 1, :]
                continue
            if js == ns_f - 1 and b == 3:
                node_ids[3][ns_f - 1, :] = node_ids[0][0, :]
                continue
            for jt in range(nr_f):
                ids[js, jt] = new_node(blocks[b][js, jt])

    nodes = np.array(coords)
    elements = []
    for b in range(4):
        ids = node_ids[b]
        for it in range(n_t):
            for ir in range(n_r):
                bs, bt = 2 * it, 2 * ir
                # local xi along radial, eta along arc (counterclockwise positive)
                conn = [
                    ids[bs, bt],
                    ids[bs, bt + 2],
                    ids[bs + 2, bt + 2],
                    ids[bs + 2, bt],
                    ids[bs, bt + 1],
                    ids[bs + 1, bt + 2],
                    ids[bs + 2, bt + 1],
                    ids[bs + 1, bt],
                    ids[bs + 1, bt + 1],
                ]
                elements.append(conn)
    mesh = Mesh(nodes, np.array(elements, dtype=np.int64), characteristic_size=target_dx)

    tol = 1e-9
    _collect_boundary(mesh, "bottom", lambda n: np.abs(n[:, 1]) < tol)
    _collect_boundary(mesh, "top", lambda n: np.abs(n[:, 1] - 1.0) < tol)
    _collect_boundary(mesh, "left", lambda n: np.abs(n[:, 0]) < tol)
    _collect_boundary(mesh, "right", lambda n: np.abs(n[:, 0] - 1.0) < tol)
    _collect_boundary(
        mesh, "hole", lambda n: np.abs(np.hypot(n[:, 0] - cx, n[:, 1] - cy) - R) < 1e-11
    )

    if check_jacobians(mesh) <= 0.0:
        raise RuntimeError("plate-with-hole generator produced a non-positive Jacobian")
    return mesh


# ---------------------------------------------------------------------------
# Plain-text export / import
# ---------------------------------------------------------------------------


def save_text(mesh: Mesh, path: str) -> None:
    """Columnar text format: nodes, elements, then named node/edge sets."""
    with open(path, "w") as f:
        f.write("# phasefrac mesh v1\n")
        f.write(f"characteristic_size {mesh.characteristic_size!r}\n")
        f.write(f"nodes {mesh.n_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes):
            f.write(f"{i} {x!r} {y!r}\n")
        f.write(f"elements {mesh.n_elements}\n")
        for i, conn in enumerate(mesh.elements):
            f.write(f"{i} " + " ".join(str(int(n)) for n in conn) + "\n")
        for name, ids in mesh.boundary_nodes.items():
            f.write(f"nodeset {name} {len(ids)}\n")
            f.write(" ".join(str(int(i)) for i in ids) + "\n")
        for name, edges in mesh.boundary_edges.items():
            f.write(f"edgeset {name} {len(edges)}\n")
            for e, le in edges:
                f.write(f"{int(e)} {int(le)}\n")


def load_text(path: str) -> Mesh:
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip() and not ln.startswith("#")]
    pos = 0

    def take():
        nonlocal pos
        ln = lines[pos]
        pos += 1
        return ln

    header = take().split()
    char = float(header[1]) if header[0] == "characteristic_size" else 0.0
    n_nodes = int(take().split()[1])
    nodes = np.zeros((n_nodes, 2))
    for _ in range(n_nodes):
        i, x, y = take().split()
        nodes[int(i)] = (float(x), float(y))
    n_el = int(take().split()[1])
    elements = np.zeros((n_el, 9), dtype=np.int64)
    for _ in range(n_el):
        parts = take().split()
        elements[int(parts[0])] = [int(p) for p in parts[1:10]]
    mesh = Mesh(nodes, elements, characteristic_size=char)
    while pos < len(lines):
        kind, name, count = take().split()
        count = int(count)
        if kind == "nodeset":
            ids = []
            while len(ids) < count:
                ids.extend(int(t) for t in take().split())
            mesh.boundary_nodes[name] = np.array(ids, dtype=np.int64)
        elif kind == "edgeset":
            edges = [tuple(int(t) for t in take().split()) for _ in range(count)]
            mesh.boundary_edges[name] = np.array(edges, dtype=np.int64).reshape(-1, 2)
        else:
            raise ValueError(f"unknown section {kind!r} in mesh file")
    return mesh
