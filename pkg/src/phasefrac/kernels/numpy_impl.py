"""Vectorized numpy implementation of the hot kernels.

Fallback path for environments without numba (or with
``PHASEFRAC_PURE_NUMPY=1``).  Semantics match ``numba_impl`` exactly; only
floating-point summation order differs.
"""

import numpy as np

SQRT2 = np.sqrt(2.0)
_M = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
_VOL = np.outer(_M, _M) / 3.0
_DEV = np.eye(6) - _VOL


def _stiffness(K, mu):
    return 3.0 * K * _VOL + 2.0 * mu * _DEV


def return_map_batch(eps, phi, K, mu, ft, fs, kappa, kappa_t, pen, eps_ref, crit):
    """Return map over a batch of points.

    Parameters
    ----------
    eps : (n, 6) Mandel strains.
    phi : (n,) phase-field values.

    Returns
    -------
    sigma : (n, 6), lam : (n, 2), tangent : (n, 6, 6), fd : (n,),
    active : (n, 2) uint8, err : (n,) uint8 (1 marks non-finite input).
    """
    eps = np.ascontiguousarray(eps, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = eps.shape[0]
    C = _stiffness(K, mu)

    err = (~(np.isfinite(eps).all(axis=1) & np.isfinite(phi))).astype(np.uint8)
    eps = np.where(np.isfinite(eps), eps, 0.0)
    phi_c = np.clip(np.where(np.isfinite(phi), phi, 0.0), 0.0, 1.0)
    d = (1.0 - kappa) * (1.0 - phi_c) ** 2 + kappa

    tre = eps[:, 0] + eps[:, 1] + eps[:, 2]
    dev = eps.copy()
    dev[:, :3] -= (tre / 3.0)[:, None]
    nd = np.linalg.norm(dev, axis=1)

    sigma = np.empty((n, 6))
    lam = np.zeros((n, 2))
    fd = np.zeros(n)
    active = np.zeros((n, 2), dtype=np.uint8)
    D = np.tile(C, (n, 1, 1))

    if crit == 0:
        sign = np.where(tre >= 0.0, 1.0, -1.0)
        strength1 = np.where(sign > 0.0, d * ft, pen * ft)
        trial1 = K * np.abs(tre)
        lam1 = np.maximum(trial1 - strength1, 0.0) / (K * (1.0 + kappa_t))

        dev_ok = nd >= 1e-14
        nd_safe = np.where(dev_ok, nd, 1.0)
        g2 = dev / nd_safe[:, None]
        trial2 = 2.0 * mu * nd
        lam2 = np.where(
            dev_ok,
            np.maximum(trial2 - d * fs, 0.0) / (2.0 * mu + kappa_t * K),
            0.0,
        )

        tr_el = tre - sign * lam1
        sigma = 2.0 * mu * (dev - lam2[:, None] * g2)
        sigma[:, :3] += (K * tr_el)[:, None]
        fd = ft * np.maximum(sign * lam1, 0.0) + fs * lam2
        lam[:, 0] = lam1
        lam[:, 1] = lam2
        active[:, 0] = lam1 > 0.0
        active[:, 1] = lam2 > 0.0

        a1 = active[:, 0].astype(bool)
        D[a1, :3, :3] -= K / (1.0 + kappa_t)
        a2 = active[:, 1].astype(bool)
        if a2.any():
            gg = np.einsum("na,nb->nab", g2[a2], g2[a2])
            coef_s = (2.0 * mu) ** 2 / (2.0 * mu + kappa_t * K)
            coef_c = 2.0 * mu * lam2[a2] / nd[a2]
            D[a2] -= (coef_s - coef_c)[:, None, None] * gg
            D[a2] -= coef_c[:, None, None] * _DEV
    else:
        tension = tre >= 0.0
        r = np.linalg.norm(eps, axis=1)

        # tension branch: eta along eps/|eps|
        t_ok = tension & (r >= 1e-14)
        rt = np.where(t_ok, r, 1.0)
        q = np.sqrt((ft * tre) ** 2 + (fs * nd) ** 2)
        s_t = q / rt
        c_t = (K * tre**2 + 2.0 * mu * nd**2) / rt**2
        trial_t = rt * c_t
        lam_t = np.where(
            t_ok, np.maximum(trial_t - d * s_t, 0.0) / (c_t + kappa_t * K), 0.0
        )

        # compression branch: deviatoric eta with pressure strengthening
        c_ok = (~tension) & (nd >= 1e-14)
        nd_safe = np.where(nd >= 1e-14, nd, 1.0)
        beta = 1.0 - tre / eps_ref
        trial_c = 2.0 * mu * nd
        lam_c = np.where(
            c_ok,
            np.maximum(trial_c - d * fs * beta, 0.0) / (2.0 * mu + kappa_t * K),
            0.0,
        )

        lam0 = np.where(tension, lam_t, lam_c)
        lam[:, 0] = lam0
        active[:, 0] = lam0 > 0.0

        sig_el = eps @ C.T
        g_t = eps / rt[:, None]
        sigma = np.where(tension[:, None], (1.0 - lam_t / rt)[:, None] * sig_el, 0.0)
        sig_c = 2.0 * mu * (dev - lam_c[:, None] * dev / nd_safe[:, None])
        sig_c[:, :3] += (K * tre)[:, None]
        sigma += np.where(tension[:, None], 0.0, sig_c)
        fd = np.where(tension, lam_t * s_t, lam_c * fs * beta)

        at = (lam_t > 0.0) & tension
        if at.any():
            g = g_t[at]
            cg = g @ C.T
            q_safe = np.where(q[at] > 0.0, q[at], 1.0)
            grad_q = (ft**2 * tre[at, None] * _M + fs**2 * dev[at]) / q_safe[:, None]
            la, ra, ca, da = lam_t[at], r[at], c_t[at], d[at]
            dlam = (
                2.0 * (1.0 - la / ra)[:, None] * cg
                - (da / ra)[:, None] * grad_q
                + (la * (ca - kappa_t * K) / ra)[:, None] * g
            ) / (ca + kappa_t * K)[:, None]
            D[at] -= np.einsum("na,nb->nab", cg, dlam)
            D[at] -= (la / ra)[:, None, None] * (C - np.einsum("na,nb->nab", cg, g))

        ac = (lam_c > 0.0) & (~tension)
        if ac.any():
            g = dev[ac] / nd[ac, None]
            cg = 2.0 * mu * g
            dlam = (cg + (d[ac] * fs / eps_ref)[:, None] * _M) / (2.0 * mu + kappa_t * K)
            coef_c = 2.0 * mu * lam_c[ac] / nd[ac]
            D[ac] -= np.einsum("na,nb->nab", cg, dlam)
            D[ac] -= coef_c[:, None, None] * (_DEV - np.einsum("na,nb->nab", g, g))

    sigma[err == 1] = 0.0
    return sigma, lam, D, fd, active, err


def momentum_kernel(
    B3,
    wdet,
    N,
    conn,
    dofs,
    Me,
    u,
    v,
    a,
    phi,
    K,
    mu,
    ft,
    fs,
    kappa,
    kappa_t,
    pen,
    eps_ref,
    crit,
    dyn,
    mass_fac,
    c_damp,
):
    """Element residuals/stiffness for the momentum system (vectorized).

    ``B3``: (nel, nip, 3, 18) strain-displacement blocks in Mandel rows
    (xx, yy, sqrt(2)xy); ``Me``: (nel, 18, 18) consistent mass (already
    scaled by density); ``mass_fac`` multiplies ``Me`` into the effective
    stiffness (Newmark), ``c_damp`` is the damping coefficient.
    """
    nel, nip = wdet.shape
    ue = u[dofs]
    phie = phi[conn]

    eps3 = np.einsum("eiap,ep->eia", B3, ue)
    eps6 = np.zeros((nel, nip, 6))
    eps6[..., 0] = eps3[..., 0]
    eps6[..., 1] = eps3[..., 1]
    eps6[..., 5] = eps3[..., 2]
    phi_ip = np.einsum("ia,ea->ei", N, phie)

    flat_eps = eps6.reshape(-1, 6)
    flat_phi = phi_ip.reshape(-1)
    sig, lam, D, fd, act, err = return_map_batch(
        flat_eps, flat_phi, K, mu, ft, fs, kappa, kappa_t, pen, eps_ref, crit
    )

    idx = np.array([0, 1, 5])
    sig3 = sig[:, idx].reshape(nel, nip, 3)
    D3 = D[np.ix_(np.arange(D.shape[0]), idx, idx)].reshape(nel, nip, 3, 3)

    w3 = wdet[..., None]
    re = np.einsum("eiap,eia->ep", B3, sig3 * w3)
    Ke = np.einsum("eiap,eiab,eibq->epq", B3, D3 * w3[..., None], B3)

    if dyn:
        ve = v[dofs]
        ae = a[dofs]
        Ke = Ke + mass_fac * Me
        re = re + np.einsum("epq,eq->ep", Me, ae + c_damp * ve)

    return (
        Ke,
        re,
        eps6,
        sig.reshape(nel, nip, 6),
        lam.reshape(nel, nip, 2),
        fd.reshape(nel, nip),
        act.reshape(nel, nip, 2),
        phi_ip,
        err.reshape(nel, nip),
    )


def phasefield_kernel(N, dNdx, wdet, F_ip, Gc, ell, kappa):
    """Element matrices/rhs of the phase-field system (vectorized).

    Matrix: ``(Gc/ell) N N^T + Gc ell grad N grad N^T + 2 (1-kappa) F N N^T``
    integrated with ``wdet``; rhs: ``2 (1-kappa) F N``.
    """
    NN = np.einsum("ia,ib->iab", N, N)
    fac = (Gc / ell + 2.0 * (1.0 - kappa) * F_ip) * wdet
    Ae = np.einsum("ei,iab->eab", fac, NN)
    Ae += Gc * ell * np.einsum("ei,eiax,eibx->eab", wdet, dNdx, dNdx)
    be = np.einsum("ei,ia->ea", 2.0 * (1.0 - kappa) * F_ip * wdet, N)
    return Ae, be
