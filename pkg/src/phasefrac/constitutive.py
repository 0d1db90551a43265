"""Integration-point constitutive model: eigenstrain return mapping.

Given total strain, phase-field value and material parameters, resolve the
fracture-eigenstrain multipliers so the stress stays on or within the
(degraded) strength surface, and return stress, eigenstrain, crack driving
force and the consistent tangent.

Two criteria are implemented:

``r1``
    Two independent directions: a volumetric direction capped by the
    tensile strength (with a huge non-degradable penalty slope under
    compression that enforces non-penetration) and a deviatoric direction
    capped by the shear strength.
``dp``
    One direction.  Under dilation the eigenstrain follows the full strain
    and the strength is an ellipse in (tr, dev) space; under compression it
    follows the strain deviator with a pressure-dependent strengthening
    factor ``(1 - tr(eps)/eps_ref)`` (Drucker-Prager-like cone).

Both potentials are positively homogeneous of degree one in the
eigenstrain, so on a fixed branch the active-direction equations are
affine in the multipliers and the active-set solve is exact.  A general
Newton iteration on (stress, multipliers) is retained behind
``method="newton"`` for future nonlinear bulk laws.

The consistent tangent is the exact derivative of the returned stress with
respect to the total strain.  On top of the rank-one/Schur update of the
fixed-direction problem this includes the curvature of the strain-driven
direction fields (and for the pressure-dependent branch the strength
gradient), which is what makes global Newton convergence quadratic and
finite-difference checks pass.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .mandel import DEV_PROJ, IDENTITY, ElasticModuli, elastic_stiffness

#: Strain norms below this are treated as directionless (direction unavailable).
DEGENERATE_TOL = 1e-14

#: Residual tolerance of the Newton fallback, relative to the tensile strength.
NEWTON_RTOL = 1e-10

_CRITERIA = ("r1", "dp")


@dataclass(frozen=True)
class MaterialParams:
    """All material constants plus the criterion selector.

    Units: strengths in Pa, fracture energy in J/m^2, length in m, density
    in kg/m^3, damping coefficient in 1/s.  ``eps_ref`` only matters for
    the ``dp`` criterion; ``compressive_penalty`` is the non-degradable
    slope factor of the volumetric compression branch of ``r1``.
    """

    moduli: ElasticModuli
    f_t: float = 150e6
    f_s: float = 150e6
    G_c: float = 100e3
    ell: float = 0.05
    rho: float = 8000.0
    damping: float = 1e6
    kappa: float = 1e-3
    kappa_t: float = 1e-9
    criterion: str = "r1"
    eps_ref: float = 1.0
    compressive_penalty: float = 1e6

    def __post_init__(self):
        if self.criterion not in _CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        for name in ("f_t", "f_s", "G_c", "ell"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must be in (0, 1)")
        if not 0.0 < self.kappa_t < 1.0:
            raise ValueError("kappa_t must be in (0, 1)")
        if self.criterion == "dp" and self.eps_ref <= 0.0:
            raise ValueError("eps_ref must be positive for the dp criterion")

    @classmethod
    def default(cls, **overrides) -> "MaterialParams":
        """Reference steel-like parameter set used by the benchmark cases."""
        moduli = overrides.pop("moduli", ElasticModuli(E=200e9, nu=0.3))
        return cls(moduli=moduli, **overrides)

    def with_(self, **overrides) -> "MaterialParams":
        return replace(self, **overrides)


@dataclass
class IPState:
    """Per-integration-point persistent state.

    ``history`` is the maximum crack driving force reached over committed
    steps (non-decreasing); ``warm_start`` holds the last converged
    multipliers and is only an initial guess for the Newton path - results
    are independent of it.
    """

    history: float = 0.0
    warm_start: np.ndarray = field(default_factory=lambda: np.zeros(2))


class StrengthProjection(NamedTuple):
    """Projected strength split into the degradable and permanent parts.

    The surface seen by direction ``i`` is ``d(phi)*degradable + permanent``.
    """

    degradable: float
    permanent: float


@dataclass
class ReturnMapResult:
    sigma: np.ndarray
    lam: np.ndarray
    eta: np.ndarray
    tangent: np.ndarray
    driving_force: float
    active: tuple
    iterations: int = 0


class ReturnMapError(RuntimeError):
    """Raised on NaN input or a non-converged inner iteration."""

    def __init__(self, message, last_lam=None, residual=None):
        super().__init__(message)
        self.last_lam = last_lam
        self.residual = residual


def degradation(phi: float, kappa: float) -> float:
    """Degradation ``(1-kappa)(1-phi)^2 + kappa`` with phi clamped to [0, 1].

    Clamping absorbs small overshoots of the linear phase-field solve and
    keeps the result in ``[kappa, 1]``.
    """
    p = min(max(phi, 0.0), 1.0)
    return (1.0 - kappa) * (1.0 - p) ** 2 + kappa


def update_history(state: IPState, driving_force: float) -> float:
    """New history value ``max(driving_force, old)``; caller commits it."""
    return max(float(driving_force), state.history)


# ---------------------------------------------------------------------------
# Eigenstrain directions
# ---------------------------------------------------------------------------


def directions_r1(eps: np.ndarray):
    """Volumetric and deviatoric directions for the r1 criterion.

    Returns ``(G1, G2, dev_available)``.  The volumetric direction is
    ``sign(tr eps)/3 * I`` with the tie ``tr eps = 0`` resolved to +1; the
    deviatoric direction is the unit deviator, unavailable (zero) when the
    deviator norm falls below ``DEGENERATE_TOL``.
    """
    eps = np.asarray(eps, dtype=float)
    tre = eps[0] + eps[1] + eps[2]
    sign = 1.0 if tre >= 0.0 else -1.0
    g1 = (sign / 3.0) * IDENTITY
    dev = eps.copy()
    dev[:3] -= tre / 3.0
    nd = np.linalg.norm(dev)
    if nd < DEGENERATE_TOL:
        return g1, np.zeros(6), False
    return g1, dev / nd, True


def direction_dp(eps: np.ndarray):
    """Single direction for the Drucker-Prager-like criterion.

    ``tr eps >= 0``: the normalized full strain; ``tr eps < 0``: the unit
    deviator.  Returns ``(G, available)``; unavailable for a zero strain or
    a purely volumetric compressive strain.
    """
    eps = np.asarray(eps, dtype=float)
    tre = eps[0] + eps[1] + eps[2]
    if tre >= 0.0:
        r = np.linalg.norm(eps)
        if r < DEGENERATE_TOL:
            return np.zeros(6), False
        return eps / r, True
    dev = eps.copy()
    dev[:3] -= tre / 3.0
    nd = np.linalg.norm(dev)
    if nd < DEGENERATE_TOL:
        return np.zeros(6), False
    return dev / nd, True


def projected_strength(eps: np.ndarray, direction: int, params: MaterialParams) -> StrengthProjection:
    """Strength-surface projection onto eigenstrain direction ``direction``.

    The value is the derivative of the strength potential contracted with
    the direction tensor; by degree-one homogeneity it does not depend on
    the multiplier magnitude, only on the branch selected by the input
    strain.  Degradation weighting of the ``degradable`` part is the
    caller's job.
    """
    eps = np.asarray(eps, dtype=float)
    tre = eps[0] + eps[1] + eps[2]
    if params.criterion == "r1":
        if direction == 0:
            if tre >= 0.0:
                return StrengthProjection(params.f_t, 0.0)
            return StrengthProjection(0.0, params.compressive_penalty * params.f_t)
        if direction == 1:
            _, _, ok = directions_r1(eps)
            if not ok:
                raise ReturnMapError("deviatoric direction unavailable for this strain")
            return StrengthProjection(params.f_s, 0.0)
        raise ValueError(f"r1 has directions 0 and 1, got {direction}")
    if direction != 0:
        raise ValueError(f"dp has a single direction 0, got {direction}")
    g, ok = direction_dp(eps)
    if not ok:
        raise ReturnMapError("dp direction unavailable for this strain")
    if tre >= 0.0:
        trg = g[0] + g[1] + g[2]
        ndg = np.linalg.norm(g - (trg / 3.0) * IDENTITY)
        s = np.sqrt((params.f_t * trg) ** 2 + (params.f_s * ndg) ** 2)
        return StrengthProjection(float(s), 0.0)
    return StrengthProjection(params.f_s * (1.0 - tre / params.eps_ref), 0.0)


# ---------------------------------------------------------------------------
# Return mapping (reference implementation; hot loops live in .kernels)
# ---------------------------------------------------------------------------


def _tangent_r1(eps, lam1, lam2, p: MaterialParams):
    """Exact tangent for r1: rank-one downdates plus deviator curvature."""
    K, mu = p.moduli.K, p.moduli.mu
    D = elastic_stiffness(p.moduli)
    if lam1 > 0.0:
        D = D - (K / (1.0 + p.kappa_t)) * np.outer(IDENTITY, IDENTITY)
    if lam2 > 0.0:
        dev = deviator_of(eps)
        nd = np.linalg.norm(dev)
        g2 = dev / nd
        D = D - (2.0 * mu) ** 2 / (2.0 * mu + p.kappa_t * K) * np.outer(g2, g2)
        D = D - 2.0 * mu * (lam2 / nd) * (DEV_PROJ - np.outer(g2, g2))
    return D


def _tangent_dp(eps, d, lam, p: MaterialParams):
    """Exact tangent for dp, including direction and strength gradients."""
    K, mu = p.moduli.K, p.moduli.mu
    C = elastic_stiffness(p.moduli)
    if lam <= 0.0:
        return C.copy()
    tre = eps[0] + eps[1] + eps[2]
    dev = deviator_of(eps)
    nd = np.linalg.norm(dev)
    if tre >= 0.0:
        r = np.linalg.norm(eps)
        g = eps / r
        q = np.sqrt((p.f_t * tre) ** 2 + (p.f_s * nd) ** 2)
        c = (K * tre * tre + 2.0 * mu * nd * nd) / (r * r)
        cg = C @ g
        grad_q = (p.f_t**2 * tre * IDENTITY + p.f_s**2 * dev) / q
        dlam = (
            2.0 * (1.0 - lam / r) * cg
            - (d / r) * grad_q
            + (lam * (c - p.kappa_t * K) / r) * g
        ) / (c + p.kappa_t * K)
        return C - np.outer(cg, dlam) - (lam / r) * (C - np.outer(cg, g))
    g = dev / nd
    cg = 2.0 * mu * g
    dlam = (cg + (d * p.f_s / p.eps_ref) * IDENTITY) / (2.0 * mu + p.kappa_t * K)
    return C - np.outer(cg, dlam) - 2.0 * mu * (lam / nd) * (DEV_PROJ - np.outer(g, g))


def deviator_of(eps):
    dev = np.array(eps, dtype=float)
    tre = dev[0] + dev[1] + dev[2]
    dev[:3] -= tre / 3.0
    return dev


def _solve_r1(eps, d, p: MaterialParams):
    K, mu = p.moduli.K, p.moduli.mu
    tre = eps[0] + eps[1] + eps[2]
    sign = 1.0 if tre >= 0.0 else -1.0
    dev = eps.copy()
    dev[:3] -= tre / 3.0
    nd = np.linalg.norm(dev)

    # volumetric direction: degraded tensile cap / permanent compressive penalty
    trial1 = K * abs(tre)
    strength1 = d * p.f_t if sign > 0.0 else p.compressive_penalty * p.f_t
    lam1 = 0.0
    if trial1 > strength1:
        lam1 = (trial1 - strength1) / (K * (1.0 + p.kappa_t))

    # deviatoric direction
    lam2 = 0.0
    g2 = np.zeros(6)
    if nd >= DEGENERATE_TOL:
        g2 = dev / nd
        trial2 = 2.0 * mu * nd
        strength2 = d * p.f_s
        if trial2 > strength2:
            lam2 = (trial2 - strength2) / (2.0 * mu + p.kappa_t * K)

    eta = lam1 * (sign / 3.0) * IDENTITY + lam2 * g2
    tr_el = tre - sign * lam1
    sig = 2.0 * mu * (dev - lam2 * g2)
    sig[:3] += K * tr_el
    tr_eta = sign * lam1
    f_d = p.f_t * max(tr_eta, 0.0) + p.f_s * lam2
    D = _tangent_r1(eps, lam1, lam2, p)
    return sig, np.array([lam1, lam2]), eta, D, f_d, (lam1 > 0.0, lam2 > 0.0)


def _solve_dp(eps, d, p: MaterialParams):
    K, mu = p.moduli.K, p.moduli.mu
    C = elastic_stiffness(p.moduli)
    tre = eps[0] + eps[1] + eps[2]
    dev = eps.copy()
    dev[:3] -= tre / 3.0
    nd = np.linalg.norm(dev)

    if tre >= 0.0:
        r = np.linalg.norm(eps)
        if r < DEGENERATE_TOL:
            return eps * 0.0, np.zeros(2), np.zeros(6), C.copy(), 0.0, (False, False)
        g = eps / r
        q = np.sqrt((p.f_t * tre) ** 2 + (p.f_s * nd) ** 2)
        s = q / r
        c = (K * tre * tre + 2.0 * mu * nd * nd) / (r * r)
        trial = r * c
        if trial <= d * s:
            sig = C @ eps
            return sig, np.zeros(2), np.zeros(6), C.copy(), 0.0, (False, False)
        lam = (trial - d * s) / (c + p.kappa_t * K)
        eta = lam * g
        sig = (1.0 - lam / r) * (C @ eps)
        f_d = lam * s
        D = _tangent_dp(eps, d, lam, p)
        return sig, np.array([lam, 0.0]), eta, D, f_d, (True, False)

    # compression: deviatoric flow with pressure strengthening
    if nd < DEGENERATE_TOL:
        sig = C @ eps
        return sig, np.zeros(2), np.zeros(6), C.copy(), 0.0, (False, False)
    g = dev / nd
    beta = 1.0 - tre / p.eps_ref
    trial = 2.0 * mu * nd
    strength = d * p.f_s * beta
    if trial <= strength:
        sig = C @ eps
        return sig, np.zeros(2), np.zeros(6), C.copy(), 0.0, (False, False)
    lam = (trial - strength) / (2.0 * mu + p.kappa_t * K)
    eta = lam * g
    sig = 2.0 * mu * (dev - lam * g)
    sig[:3] += K * tre
    f_d = lam * p.f_s * beta
    D = _tangent_dp(eps, d, lam, p)
    return sig, np.array([lam, 0.0]), eta, D, f_d, (True, False)


def return_map(
    eps: np.ndarray,
    phi: float,
    params: MaterialParams,
    state: Optional[IPState] = None,
    method: str = "active_set",
) -> ReturnMapResult:
    """Resolve the eigenstrain multipliers for one integration point.

    ``method="active_set"`` (default) uses the exact linear solve per
    active set; ``method="newton"`` runs the iterative scheme on
    (stress, multipliers) with branch switching and is retained for future
    nonlinear bulk behaviour.  Both give identical results for linear
    elasticity to round-off.
    """
    eps = np.asarray(eps, dtype=float)
    if not np.all(np.isfinite(eps)) or not np.isfinite(phi):
        raise ReturnMapError("non-finite strain or phase-field input")
    d = degradation(phi, params.kappa)
    if method == "newton":
        return _return_map_newton(eps, d, params, state)
    if params.criterion == "r1":
        sig, lam, eta, D, f_d, active = _solve_r1(eps, d, params)
    else:
        sig, lam, eta, D, f_d, active = _solve_dp(eps, d, params)
    return ReturnMapResult(sig, lam, eta, D, f_d, active, iterations=1)


def _return_map_newton(eps, d, p: MaterialParams, state):
    """Iterative scheme on (sigma, lambda) with active-row switching."""
    K = p.moduli.K
    C = elastic_stiffness(p.moduli)
    if p.criterion == "r1":
        g1, g2, ok2 = directions_r1(eps)
        dirs = [g1, g2]
        avail = [True, ok2]
        proj = [projected_strength(eps, 0, p), None]
        if ok2:
            proj[1] = projected_strength(eps, 1, p)
    else:
        g, ok = direction_dp(eps)
        dirs = [g, np.zeros(6)]
        avail = [ok, False]
        proj = [projected_strength(eps, 0, p) if ok else None, None]

    lam = np.zeros(2)
    if state is not None and state.warm_start is not None:
        lam = np.clip(np.asarray(state.warm_start, dtype=float)[:2], 0.0, None)
        lam = np.where(avail, lam, 0.0)
    sig = C @ (eps - lam[0] * dirs[0] - lam[1] * dirs[1])

    tol_sig = NEWTON_RTOL * p.f_t
    tol_lam = 1e-14 + NEWTON_RTOL * float(np.linalg.norm(eps))
    n = 8
    res = np.zeros(n)
    for it in range(50):
        surf = np.zeros(2)
        active = [False, False]
        for i in range(2):
            if not avail[i]:
                continue
            strength = d * proj[i].degradable + proj[i].permanent
            surf[i] = strength - float(dirs[i] @ sig)
            active[i] = surf[i] <= 0.0 or lam[i] > tol_lam

        res[:6] = sig - C @ (eps - lam[0] * dirs[0] - lam[1] * dirs[1])
        for i in range(2):
            res[6 + i] = surf[i] + p.kappa_t * K * lam[i] if (avail[i] and active[i]) else lam[i]

        ok_sig = np.max(np.abs(res[:6])) <= tol_sig
        ok_lam = all(
            (abs(res[6 + i]) <= tol_sig if (avail[i] and active[i]) else abs(lam[i]) <= tol_lam)
            for i in range(2)
        )
        if ok_sig and ok_lam and np.all(lam >= -tol_lam):
            lam = np.clip(lam, 0.0, None)
            eta = lam[0] * dirs[0] + lam[1] * dirs[1]
            if p.criterion == "r1":
                D = _tangent_r1(eps, lam[0], lam[1], p)
            else:
                D = _tangent_dp(eps, d, lam[0], p)
            return ReturnMapResult(
                sig, lam, eta, D, _driving_force(eps, lam, p), tuple(v > 0.0 for v in lam), it + 1
            )

        J = np.zeros((n, n))
        J[:6, :6] = np.eye(6)
        J[:6, 6] = C @ dirs[0]
        J[:6, 7] = C @ dirs[1]
        for i in range(2):
            if avail[i] and active[i]:
                J[6 + i, :6] = -dirs[i]
                J[6 + i, 6 + i] = p.kappa_t * K
            else:
                J[6 + i, 6 + i] = 1.0
        try:
            dx = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as exc:
            raise ReturnMapError(f"singular return-map Jacobian: {exc}", last_lam=lam.copy(), residual=res.copy())
        sig = sig + dx[:6]
        lam = lam + dx[6:]
        lam = np.where([avail[0], avail[1]], lam, 0.0)
        # a multiplier driven negative means the direction unloads
        lam = np.clip(lam, 0.0, None)
    raise ReturnMapError(
        "return map did not converge in 50 iterations",
        last_lam=lam.copy(),
        residual=res.copy(),
    )


def _driving_force(eps, lam, p: MaterialParams):
    if p.criterion == "r1":
        g1, g2, _ = directions_r1(eps)
        eta = lam[0] * g1 + lam[1] * g2
        tr_eta = eta[0] + eta[1] + eta[2]
        return p.f_t * max(tr_eta, 0.0) + p.f_s * lam[1]
    tre = eps[0] + eps[1] + eps[2]
    if tre >= 0.0:
        s = projected_strength(eps, 0, p).degradable if lam[0] > 0.0 else 0.0
        return lam[0] * s
    return lam[0] * p.f_s * (1.0 - tre / p.eps_ref)


def batch_surface_check(eps, sigma, lam, phi, params: MaterialParams):
    """Vectorized admissibility sweep over committed integration points.

    Returns ``(max_margin, min_tr_eta)`` where margin is the projected
    stress minus the (degraded, ``kappa_t``-extended) strength per
    available direction; admissible states have margin <= 0 up to solver
    tolerance.  ``tr_eta`` is the eigenstrain trace (non-penetration
    indicator).
    """
    eps = np.asarray(eps, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lam = np.asarray(lam, dtype=float)
    phi = np.asarray(phi, dtype=float)
    K = params.moduli.K
    kt = params.kappa_t
    p = np.clip(phi, 0.0, 1.0)
    d = (1.0 - params.kappa) * (1.0 - p) ** 2 + params.kappa

    tre = eps[:, 0] + eps[:, 1] + eps[:, 2]
    dev = eps.copy()
    dev[:, :3] -= (tre / 3.0)[:, None]
    nd = np.linalg.norm(dev, axis=1)
    dev_ok = nd >= DEGENERATE_TOL
    nd_safe = np.where(dev_ok, nd, 1.0)
    tr_sig = sigma[:, 0] + sigma[:, 1] + sigma[:, 2]
    dev_sig = sigma.copy()
    dev_sig[:, :3] -= (tr_sig / 3.0)[:, None]

    if params.criterion == "r1":
        sign = np.where(tre >= 0.0, 1.0, -1.0)
        proj1 = sign * tr_sig / 3.0
        strength1 = np.where(sign > 0.0, d * params.f_t, params.compressive_penalty * params.f_t)
        margin = np.max(proj1 - strength1 - kt * K * lam[:, 0])
        proj2 = np.einsum("na,na->n", dev_sig, dev / nd_safe[:, None])
        m2 = proj2 - d * params.f_s - kt * K * lam[:, 1]
        if dev_ok.any():
            margin = max(margin, float(np.max(m2[dev_ok])))
        tr_eta = sign * lam[:, 0]
        return float(margin), float(tr_eta.min())

    r = np.linalg.norm(eps, axis=1)
    tension = tre >= 0.0
    t_ok = tension & (r >= DEGENERATE_TOL)
    r_safe = np.where(t_ok, r, 1.0)
    g_t = eps / r_safe[:, None]
    proj_t = np.einsum("na,na->n", sigma, g_t)
    q = np.sqrt((params.f_t * tre) ** 2 + (params.f_s * nd) ** 2)
    s_t = q / r_safe
    m_t = proj_t - d * s_t - kt * K * lam[:, 0]

    c_ok = (~tension) & dev_ok
    proj_c = np.einsum("na,na->n", dev_sig, dev / nd_safe[:, None])
    m_c = proj_c - d * params.f_s * (1.0 - tre / params.eps_ref) - kt * K * lam[:, 0]

    margin = -np.inf
    if t_ok.any():
        margin = max(margin, float(np.max(m_t[t_ok])))
    if c_ok.any():
        margin = max(margin, float(np.max(m_c[c_ok])))
    tr_g = np.where(t_ok, g_t[:, 0] + g_t[:, 1] + g_t[:, 2], 0.0)
    tr_eta = lam[:, 0] * tr_g
    return float(margin), float(tr_eta.min() if len(tr_eta) else 0.0)


# ---------------------------------------------------------------------------
# Pointwise energy (oracle support)
# ---------------------------------------------------------------------------


def pointwise_energy(eps: np.ndarray, lam, phi: float, params: MaterialParams) -> float:
    """Energy density ``1/2 K tr^2(e) + mu |dev e|^2 + d F_d + F_i``.

    ``e = eps - eta`` with ``eta = sum_i lam_i G_i(eps)``.  The strength
    potentials are evaluated literally (Macaulay brackets on ``tr eta`` for
    r1, strain-trace branch for dp), so minimizing this function over the
    multipliers reproduces the return map up to the ``kappa_t`` surface
    extension.

    Eigenstrain invariants are formed from the multipliers and exact
    direction invariants (``tr G1 = +-1``, ``tr G2 = 0``) rather than from
    the reassembled 6-vector: the compressive penalty slope would amplify
    round-off in a reconstructed trace into energy noise larger than the
    curvature being minimized.
    """
    eps = np.asarray(eps, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    K, mu = params.moduli.K, params.moduli.mu
    if np.any(lam < 0.0):
        raise ValueError("multipliers must be non-negative")
    d = degradation(phi, params.kappa)
    tre = eps[0] + eps[1] + eps[2]

    if params.criterion == "r1":
        g1, g2, dev_ok = directions_r1(eps)
        lam2 = lam[1] if lam.size > 1 else 0.0
        if not dev_ok:
            lam2 = 0.0
        sign = 1.0 if tre >= 0.0 else -1.0
        e = eps - lam[0] * g1 - lam2 * g2
        tr_eta = sign * lam[0]
        f_d = params.f_t * max(tr_eta, 0.0) + params.f_s * lam2
        f_i = -params.compressive_penalty * params.f_t * min(tr_eta, 0.0)
    else:
        g, ok = direction_dp(eps)
        lam0 = lam[0] if ok else 0.0
        e = eps - lam0 * g
        if tre >= 0.0:
            tr_g = g[0] + g[1] + g[2]
            nd_g = float(np.linalg.norm(g - (tr_g / 3.0) * IDENTITY))
            f_d = lam0 * np.sqrt((params.f_t * tr_g) ** 2 + (params.f_s * nd_g) ** 2)
        else:
            f_d = params.f_s * (1.0 - tre / params.eps_ref) * lam0
        f_i = 0.0

    tr_e = e[0] + e[1] + e[2]
    dev_e = e.copy()
    dev_e[:3] -= tr_e / 3.0
    psi = 0.5 * K * tr_e * tr_e + mu * float(dev_e @ dev_e)
    return float(psi + d * f_d + f_i)
