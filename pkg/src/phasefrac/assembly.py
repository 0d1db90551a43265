"""Element assembly for the momentum and phase-field systems.

Per-mesh geometry factors (shape gradients, Jacobian weights, consistent
mass, strain-displacement blocks) are precomputed once; every assembly
then reduces to one kernel call plus a scatter through a prebuilt sparse
pattern, which keeps repeated Newton/staggered assemblies cheap and makes
the accumulation order deterministic.
"""

import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp

from . import kernels
from .constitutive import MaterialParams, ReturnMapError
from .mesh import EDGES, Mesh, QuadratureRule, quadrature, shape_eval

SQRT2 = np.sqrt(2.0)


@dataclass
class DofMap:
    """Node-based dof numbering: u dofs ``2*node + comp``, phi dofs ``node``."""

    n_nodes: int

    @property
    def n_udof(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_phidof(self) -> int:
        return self.n_nodes

    def u_dofs(self, nodes: np.ndarray, component: int) -> np.ndarray:
        return 2 * np.asarray(nodes, dtype=np.int64) + component


@dataclass
class SystemVectors:
    """Nodal displacement, rates and phase-field."""

    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    phi: np.ndarray

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "SystemVectors":
        return cls(
            np.zeros(dofmap.n_udof),
            np.zeros(dofmap.n_udof),
            np.zeros(dofmap.n_udof),
            np.zeros(dofmap.n_phidof),
        )


class SparsePattern:
    """Canonical CSR pattern for repeated assembly of element blocks.

    Entry order, duplicate grouping and the final CSR layout are fixed at
    construction, so assembling new numerical data is a permutation plus a
    segmented sum; bitwise deterministic for identical inputs.
    """

    def __init__(self, row_dofs: np.ndarray, col_dofs: np.ndarray, shape):
        rows = row_dofs.ravel()
        cols = col_dofs.ravel()
        keep = (rows >= 0) & (cols >= 0)
        self._keep = keep if not keep.all() else None
        rows = rows[keep]
        cols = cols[keep]
        order = np.lexsort((cols, rows))
        rs, cs = rows[order], cols[order]
        boundary = np.empty(len(rs), dtype=bool)
        boundary[0] = True
        boundary[1:] = (rs[1:] != rs[:-1]) | (cs[1:] != cs[:-1])
        self._order = order
        self._starts = np.nonzero(boundary)[0]
        ur, uc = rs[boundary], cs[boundary]
        counts = np.bincount(ur, minlength=shape[0])
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self._indices = uc.astype(np.int32)
        self._shape = shape

    @classmethod
    def from_blocks(cls, dofs: np.ndarray, ndof: int, free_map: Optional[np.ndarray] = None):
        """Pattern from per-element dof arrays ``(nel, k)``.

        With ``free_map`` (full-dof -> reduced index, -1 for fixed) the
        pattern covers only the free-free block.
        """
        d = dofs if free_map is None else free_map[dofs]
        nel, k = d.shape
        rows = np.repeat(d, k, axis=1)
        cols = np.tile(d, (1, k))
        n = ndof if free_map is None else int(free_map.max()) + 1
        return cls(rows, cols, (n, n))

    def assemble(self, block_data: np.ndarray) -> sp.csr_matrix:
        data = block_data.ravel()
        if self._keep is not None:
            data = data[self._keep]
        sums = np.add.reduceat(data[self._order], self._starts)
        return sp.csr_matrix((sums, self._indices, self._indptr), shape=self._shape)


@dataclass
class ElementData:
    """Precomputed per-mesh quantities for assembly."""

    mesh: Mesh
    dofmap: DofMap
    rule: QuadratureRule
    N: np.ndarray  # (nip, 9)
    dNdx: np.ndarray  # (nel, nip, 9, 2)
    wdet: np.ndarray  # (nel, nip)
    B3: np.ndarray  # (nel, nip, 3, 18) Mandel rows (xx, yy, sqrt2*xy)
    conn: np.ndarray  # (nel, 9)
    dofs: np.ndarray  # (nel, 18)
    Me: np.ndarray  # (nel, 18, 18), includes density
    u_pattern: SparsePattern = None
    phi_pattern: SparsePattern = None
    _reduced: Dict[bytes, tuple] = field(default_factory=dict)

    @property
    def n_elements(self):
        return self.mesh.n_elements

    @property
    def nip(self):
        return self.N.shape[0]

    def reduced_pattern(self, free_mask: np.ndarray):
        """Free-free pattern plus dof index map, cached per mask."""
        key = np.packbits(free_mask).tobytes()
        if key not in self._reduced:
            free_map = np.full(self.dofmap.n_udof, -1, dtype=np.int64)
            free_idx = np.nonzero(free_mask)[0]
            free_map[free_idx] = np.arange(len(free_idx))
            pattern = SparsePattern.from_blocks(self.dofs, self.dofmap.n_udof, free_map)
            self._reduced[key] = (pattern, free_idx, free_map)
        return self._reduced[key]


def build_element_data(mesh: Mesh, rho: float, order: int = 3) -> ElementData:
    rule = quadrature(order)
    nip = len(rule.weights)
    nel = mesh.n_elements
    N = np.zeros((nip, 9))
    dN_loc = np.zeros((nip, 9, 2))
    for i, (xi, eta) in enumerate(rule.points):
        N[i], dN_loc[i] = shape_eval(xi, eta)

    X = mesh.nodes[mesh.elements]  # (nel, 9, 2)
    # J[e,i] = X[e]^T dN_loc[i]  -> (nel, nip, 2, 2)
    J = np.einsum("ena,inb->eiab", X, dN_loc)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0.0):
        raise ValueError("non-positive Jacobian in mesh")
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1]
    inv[..., 1, 1] = J[..., 0, 0]
    inv[..., 0, 1] = -J[..., 0, 1]
    inv[..., 1, 0] = -J[..., 1, 0]
    inv /= det[..., None, None]
    # dNdx[e,i,n,a] = dN_loc[i,n,b] * inv[e,i,b,a]
    dNdx = np.einsum("inb,eiba->eina", dN_loc, inv)
    wdet = det * rule.weights[None, :]

    B3 = np.zeros((nel, nip, 3, 18))
    B3[..., 0, 0::2] = dNdx[..., 0]
    B3[..., 1, 1::2] = dNdx[..., 1]
    B3[..., 2, 0::2] = dNdx[..., 1] / SQRT2
    B3[..., 2, 1::2] = dNdx[..., 0] / SQRT2

    conn = np.ascontiguousarray(mesh.elements, dtype=np.int64)
    dofs = np.empty((nel, 18), dtype=np.int64)
    dofs[:, 0::2] = 2 * conn
    dofs[:, 1::2] = 2 * conn + 1

    # consistent mass with density folded in; both displacement components
    NN = np.einsum("ei,ia,ib->eab", wdet, N, N) * rho  # (nel, 9, 9)
    Me = np.zeros((nel, 18, 18))
    Me[:, 0::2, 0::2] = NN
    Me[:, 1::2, 1::2] = NN

    dofmap = DofMap(mesh.n_nodes)
    ed = ElementData(mesh, dofmap, rule, N, dNdx, wdet, B3, conn, dofs, Me)
    ed.u_pattern = SparsePattern.from_blocks(dofs, dofmap.n_udof)
    ed.phi_pattern = SparsePattern.from_blocks(conn, dofmap.n_phidof)
    return ed


@dataclass
class IPBatch:
    """Per-integration-point results of one momentum assembly."""

    eps: np.ndarray  # (nel, nip, 6)
    sigma: np.ndarray  # (nel, nip, 6)
    lam: np.ndarray  # (nel, nip, 2)
    driving_force: np.ndarray  # (nel, nip)
    active: np.ndarray  # (nel, nip, 2)
    phi: np.ndarray  # (nel, nip)


def strain_at_ip(eldata: ElementData, element: int, u: np.ndarray, ip: int) -> np.ndarray:
    """Plane-strain Mandel strain at one quadrature point."""
    ue = u[eldata.dofs[element]]
    e3 = eldata.B3[element, ip] @ ue
    out = np.zeros(6)
    out[0], out[1], out[5] = e3
    return out


def momentum_batch(
    eldata: ElementData,
    params: MaterialParams,
    u: np.ndarray,
    v: np.ndarray,
    a: np.ndarray,
    phi: np.ndarray,
    dt: Optional[float] = None,
    newmark_beta: float = 0.5625,
    newmark_gamma: float = 1.0,
):
    """Element stiffness/residual blocks plus per-ip constitutive results.

    With ``dt`` set, inertia and damping enter the residual and the
    Newmark-effective factors enter the stiffness; ``dt=None`` assembles
    the static operator.
    """
    kp = kernels.pack_params(params)
    dyn = dt is not None
    if dyn:
        mass_fac = 1.0 / (newmark_beta * dt * dt) + params.damping * newmark_gamma / (
            newmark_beta * dt
        )
    else:
        mass_fac = 0.0
    Ke, re, ip_eps, ip_sig, ip_lam, ip_fd, ip_act, ip_phi, err = kernels.momentum_kernel(
        eldata.B3,
        eldata.wdet,
        eldata.N,
        eldata.conn,
        eldata.dofs,
        eldata.Me,
        u,
        v,
        a,
        phi,
        *kp,
        dyn,
        mass_fac,
        params.damping,
    )
    if err.any():
        bad = np.argwhere(err.reshape(eldata.n_elements, eldata.nip))
        e0, i0 = bad[0]
        raise ReturnMapError(
            f"return map failed at element {e0}, integration point {i0} "
            f"({len(bad)} points total)"
        )
    ip = IPBatch(ip_eps, ip_sig, ip_lam, ip_fd, ip_act, ip_phi)
    return Ke, re, ip


def assemble_vector(eldata: ElementData, re: np.ndarray) -> np.ndarray:
    r = np.zeros(eldata.dofmap.n_udof)
    np.add.at(r, eldata.dofs.ravel(), re.ravel())
    return r


def phasefield_batch(eldata: ElementData, params: MaterialParams, F_ip: np.ndarray):
    """Assembled SPD system (matrix, rhs) of the phase-field equation."""
    Ae, be = kernels.phasefield_kernel(
        eldata.N, eldata.dNdx, eldata.wdet, F_ip, params.G_c, params.ell, params.kappa
    )
    A = eldata.phi_pattern.assemble(Ae)
    b = np.zeros(eldata.dofmap.n_phidof)
    np.add.at(b, eldata.conn.ravel(), be.ravel())
    return A, b


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------


class Constraints:
    """Dirichlet constraints on displacement components of named node sets.

    Rows/columns of fixed dofs are eliminated symmetrically from the solve;
    reactions are recovered as the assembled residual on the eliminated
    rows.
    """

    def __init__(self, mesh: Mesh, dofmap: DofMap):
        self.mesh = mesh
        self.dofmap = dofmap
        self._sets = []  # (name, component, dofs array)
        self._mask = np.zeros(dofmap.n_udof, dtype=bool)

    def fix(self, set_name: str, component: int, value: float = 0.0):
        if set_name not in self.mesh.boundary_nodes:
            raise KeyError(f"unknown boundary set {set_name!r}")
        nodes = self.mesh.boundary_nodes[set_name]
        if len(nodes) == 0:
            warnings.warn(f"boundary set {set_name!r} is empty; constraint ignored")
            return
        dofs = self.dofmap.u_dofs(nodes, component)
        self._sets.append([set_name, component, dofs, float(value)])
        self._mask[dofs] = True

    def set_value(self, set_name: str, component: int, value: float):
        found = False
        for entry in self._sets:
            if entry[0] == set_name and entry[1] == component:
                entry[3] = float(value)
                found = True
        if not found:
            raise KeyError(f"no constraint on {set_name!r} component {component}")

    @property
    def fixed_mask(self) -> np.ndarray:
        return self._mask

    @property
    def free_mask(self) -> np.ndarray:
        return ~self._mask

    def apply_values(self, u: np.ndarray) -> None:
        for _, _, dofs, value in self._sets:
            u[dofs] = value

    def reaction(self, residual: np.ndarray, set_name: str, component: int) -> float:
        """Sum of eliminated-row residuals on one constrained set/component."""
        nodes = self.mesh.boundary_nodes[set_name]
        dofs = self.dofmap.u_dofs(nodes, component)
        return float(residual[dofs].sum())


def external_traction(eldata: ElementData, set_name: str, traction) -> np.ndarray:
    """Consistent nodal load vector of a constant traction on an edge set.

    Quadratic edges give the 1/6 - 2/3 - 1/6 nodal split of the resultant.
    """
    mesh = eldata.mesh
    if set_name not in mesh.boundary_edges:
        raise KeyError(f"unknown boundary edge set {set_name!r}")
    tau = np.asarray(traction, dtype=float)
    F = np.zeros(eldata.dofmap.n_udof)
    gauss_x, gauss_w = np.polynomial.legendre.leggauss(3)
    for e, le in mesh.boundary_edges[set_name]:
        tri = EDGES[le]
        node_ids = mesh.elements[e][list(tri)]
        X = mesh.nodes[node_ids]
        for s, w in zip(gauss_x, gauss_w):
            Nl = np.array([0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)])
            dNl = np.array([s - 0.5, -2.0 * s, s + 0.5])
            dx = dNl @ X
            jac = np.hypot(dx[0], dx[1])
            for a in range(3):
                F[2 * node_ids[a]] += w * Nl[a] * tau[0] * jac
                F[2 * node_ids[a] + 1] += w * Nl[a] * tau[1] * jac
    return F


# ---------------------------------------------------------------------------
# Per-element wrappers (unit-test surface)
# ---------------------------------------------------------------------------


def momentum_element(
    eldata: ElementData,
    element: int,
    params: MaterialParams,
    u: np.ndarray,
    v: np.ndarray = None,
    a: np.ndarray = None,
    phi: np.ndarray = None,
    dt: Optional[float] = None,
    newmark_beta: float = 0.5625,
    newmark_gamma: float = 1.0,
):
    """Residual, stiffness and ip results of a single element."""
    nu = eldata.dofmap.n_udof
    v = np.zeros(nu) if v is None else v
    a = np.zeros(nu) if a is None else a
    phi = np.zeros(eldata.dofmap.n_phidof) if phi is None else phi
    sub = _single_element_view(eldata, element)
    Ke, re, ip = momentum_batch(sub, params, u, v, a, phi, dt, newmark_beta, newmark_gamma)
    return re[0], Ke[0], ip


def phasefield_element(eldata: ElementData, element: int, params: MaterialParams, F_ip: np.ndarray):
    """(matrix, rhs) of a single element of the phase-field system."""
    Ae, be = kernels.phasefield_kernel(
        eldata.N,
        eldata.dNdx[element : element + 1],
        eldata.wdet[element : element + 1],
        np.asarray(F_ip, dtype=float).reshape(1, -1),
        params.G_c,
        params.ell,
        params.kappa,
    )
    return Ae[0], be[0]


def _single_element_view(eldata: ElementData, e: int) -> ElementData:
    return ElementData(
        eldata.mesh,
        eldata.dofmap,
        eldata.rule,
        eldata.N,
        eldata.dNdx[e : e + 1],
        eldata.wdet[e : e + 1],
        eldata.B3[e : e + 1],
        eldata.conn[e : e + 1],
        eldata.dofs[e : e + 1],
        eldata.Me[e : e + 1],
    )
