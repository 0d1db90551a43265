"""Numba-compiled per-point loops for the hot kernels.

Formulas match ``numpy_impl``; loops are scalar per integration point and
cached to disk so repeated processes skip recompilation.
"""

import numpy as np
from numba import njit

SQRT2 = np.sqrt(2.0)


@njit(cache=True)
def _fill_stiffness(K, mu, C):
    for i in range(6):
        for j in range(6):
            C[i, j] = 0.0
    off = K - 2.0 * mu / 3.0
    for i in range(3):
        for j in range(3):
            C[i, j] = off
        C[i, i] += 2.0 * mu
        C[i + 3, i + 3] = 2.0 * mu


@njit(cache=True)
def _rm_point(eps, phi, K, mu, ft, fs, kappa, kappa_t, pen, eps_ref, crit, sig, D):
    """Single-point return map; fills sig (6,) and D (6,6).

    Returns (lam1, lam2, fd, act1, act2, err).
    """
    for k in range(6):
        if not np.isfinite(eps[k]):
            for i in range(6):
                sig[i] = 0.0
            return 0.0, 0.0, 0.0, 0, 0, 1
    if not np.isfinite(phi):
        for i in range(6):
            sig[i] = 0.0
        return 0.0, 0.0, 0.0, 0, 0, 1

    p = phi
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    d = (1.0 - kappa) * (1.0 - p) ** 2 + kappa

    tre = eps[0] + eps[1] + eps[2]
    dev0 = eps[0] - tre / 3.0
    dev1 = eps[1] - tre / 3.0
    dev2 = eps[2] - tre / 3.0
    nd2 = dev0 * dev0 + dev1 * dev1 + dev2 * dev2
    for k in range(3, 6):
        nd2 += eps[k] * eps[k]
    nd = np.sqrt(nd2)

    _fill_stiffness(K, mu, D)

    if crit == 0:
        sign = 1.0 if tre >= 0.0 else -1.0
        strength1 = d * ft if sign > 0.0 else pen * ft
        trial1 = K * (tre if tre >= 0.0 else -tre)
        lam1 = 0.0
        if trial1 > strength1:
            lam1 = (trial1 - strength1) / (K * (1.0 + kappa_t))

        lam2 = 0.0
        dev_ok = nd >= 1e-14
        if dev_ok:
            trial2 = 2.0 * mu * nd
            if trial2 > d * fs:
                lam2 = (trial2 - d * fs) / (2.0 * mu + kappa_t * K)

        tr_el = tre - sign * lam1
        scale2 = 1.0 - (lam2 / nd if dev_ok else 0.0)
        sig[0] = 2.0 * mu * dev0 * scale2 + K * tr_el
        sig[1] = 2.0 * mu * dev1 * scale2 + K * tr_el
        sig[2] = 2.0 * mu * dev2 * scale2 + K * tr_el
        for k in range(3, 6):
            sig[k] = 2.0 * mu * eps[k] * scale2

        tr_eta = sign * lam1
        fd = ft * (tr_eta if tr_eta > 0.0 else 0.0) + fs * lam2

        if lam1 > 0.0:
            cvol = K / (1.0 + kappa_t)
            for i in range(3):
                for j in range(3):
                    D[i, j] -= cvol
        if lam2 > 0.0:
            coef_s = (2.0 * mu) ** 2 / (2.0 * mu + kappa_t * K)
            coef_c = 2.0 * mu * lam2 / nd
            g = np.empty(6)
            g[0] = dev0 / nd
            g[1] = dev1 / nd
            g[2] = dev2 / nd
            for k in range(3, 6):
                g[k] = eps[k] / nd
            for i in range(6):
                for j in range(6):
                    D[i, j] -= (coef_s - coef_c) * g[i] * g[j]
            for i in range(3):
                for j in range(3):
                    D[i, j] -= coef_c * (-1.0 / 3.0)
                D[i, i] -= coef_c
                D[i + 3, i + 3] -= coef_c
        return lam1, lam2, fd, (1 if lam1 > 0.0 else 0), (1 if lam2 > 0.0 else 0), 0

    # Drucker-Prager-like, single direction
    if tre >= 0.0:
        r2 = nd2 + tre * tre / 3.0
        # |eps|^2 = |dev|^2 + tr^2/3
        r = np.sqrt(r2)
        if r < 1e-14:
            for k in range(6):
                sig[k] = 0.0
            return 0.0, 0.0, 0.0, 0, 0, 0
        q = np.sqrt((ft * tre) ** 2 + (fs * nd) ** 2)
        s = q / r
        c = (K * tre * tre + 2.0 * mu * nd2) / r2
        trial = r * c
        # elastic stress
        sig[0] = 2.0 * mu * dev0 + K * tre
        sig[1] = 2.0 * mu * dev1 + K * tre
        sig[2] = 2.0 * mu * dev2 + K * tre
        for k in range(3, 6):
            sig[k] = 2.0 * mu * eps[k]
        if trial <= d * s:
            return 0.0, 0.0, 0.0, 0, 0, 0
        lam = (trial - d * s) / (c + kappa_t * K)
        scale = 1.0 - lam / r
        for k in range(6):
            sig[k] *= scale
        fd = lam * s

        g = np.empty(6)
        cg = np.empty(6)
        grad_q = np.empty(6)
        dev_full = np.empty(6)
        dev_full[0] = dev0
        dev_full[1] = dev1
        dev_full[2] = dev2
        for k in range(3, 6):
            dev_full[k] = eps[k]
        for k in range(6):
            g[k] = eps[k] / r
            grad_q[k] = (fs * fs * dev_full[k]) / q
        for k in range(3):
            grad_q[k] += (ft * ft * tre) / q
        trg = g[0] + g[1] + g[2]
        for k in range(3):
            cg[k] = 2.0 * mu * (g[k] - trg / 3.0) + K * trg
        for k in range(3, 6):
            cg[k] = 2.0 * mu * g[k]
        den = c + kappa_t * K
        for k in range(6):
            dlam_k = (
                2.0 * (1.0 - lam / r) * cg[k]
                - (d / r) * grad_q[k]
                + (lam * (c - kappa_t * K) / r) * g[k]
            ) / den
            grad_q[k] = dlam_k  # reuse buffer as dlam
        lr = lam / r
        for i in range(6):
            for j in range(6):
                D[i, j] = (1.0 - lr) * D[i, j] - cg[i] * grad_q[j] + lr * cg[i] * g[j]
        return lam, 0.0, fd, 1, 0, 0

    # compression
    sig[0] = 2.0 * mu * dev0 + K * tre
    sig[1] = 2.0 * mu * dev1 + K * tre
    sig[2] = 2.0 * mu * dev2 + K * tre
    for k in range(3, 6):
        sig[k] = 2.0 * mu * eps[k]
    if nd < 1e-14:
        return 0.0, 0.0, 0.0, 0, 0, 0
    beta = 1.0 - tre / eps_ref
    trial = 2.0 * mu * nd
    strength = d * fs * beta
    if trial <= strength:
        return 0.0, 0.0, 0.0, 0, 0, 0
    lam = (trial - strength) / (2.0 * mu + kappa_t * K)
    scale = 1.0 - lam / nd
    sig[0] = 2.0 * mu * dev0 * scale + K * tre
    sig[1] = 2.0 * mu * dev1 * scale + K * tre
    sig[2] = 2.0 * mu * dev2 * scale + K * tre
    for k in range(3, 6):
        sig[k] = 2.0 * mu * eps[k] * scale
    fd = lam * fs * beta

    g = np.empty(6)
    g[0] = dev0 / nd
    g[1] = dev1 / nd
    g[2] = dev2 / nd
    for k in range(3, 6):
        g[k] = eps[k] / nd
    den = 2.0 * mu + kappa_t * K
    coef_c = 2.0 * mu * lam / nd
    for i in range(6):
        cgi = 2.0 * mu * g[i]
        for j in range(6):
            dlam_j = (2.0 * mu * g[j] + (d * fs / eps_ref) * (1.0 if j < 3 else 0.0)) / den
            D[i, j] -= cgi * dlam_j - coef_c * g[i] * g[j]
    for i in range(3):
        for j in range(3):
            D[i, j] -= coef_c * (-1.0 / 3.0)
        D[i, i] -= coef_c
        D[i + 3, i + 3] -= coef_c
    return lam, 0.0, fd, 1, 0, 0


@njit(cache=True)
def return_map_batch(eps, phi, K, mu, ft, fs, kappa, kappa_t, pen, eps_ref, crit):
    n = eps.shape[0]
    sigma = np.empty((n, 6))
    lam = np.zeros((n, 2))
    D = np.empty((n, 6, 6))
    fd = np.zeros(n)
    active = np.zeros((n, 2), dtype=np.uint8)
    err = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        l1, l2, f, a1, a2, e = _rm_point(
            eps[i], phi[i], K, mu, ft, fs, kappa, kappa_t, pen, eps_ref, crit,
            sigma[i], D[i],
        )
        lam[i, 0] = l1
        lam[i, 1] = l2
        fd[i] = f
        active[i, 0] = a1
        active[i, 1] = a2
        err[i] = e
    return sigma, lam, D, fd, active, err


@njit(cache=True)
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
    nel, nip = wdet.shape
    Ke = np.zeros((nel, 18, 18))
    re = np.zeros((nel, 18))
    ip_eps = np.zeros((nel, nip, 6))
    ip_sig = np.zeros((nel, nip, 6))
    ip_lam = np.zeros((nel, nip, 2))
    ip_fd = np.zeros((nel, nip))
    ip_act = np.zeros((nel, nip, 2), dtype=np.uint8)
    ip_phi = np.zeros((nel, nip))
    err = np.zeros((nel, nip), dtype=np.uint8)

    eps = np.empty(6)
    sig = np.empty(6)
    D = np.empty((6, 6))
    D3 = np.empty((3, 3))
    tmp = np.empty((3, 18))
    ue = np.empty(18)
    ve = np.empty(18)
    ae = np.empty(18)
    phie = np.empty(9)

    for e in range(nel):
        for p in range(18):
            ue[p] = u[dofs[e, p]]
        if dyn:
            for p in range(18):
                ve[p] = v[dofs[e, p]]
                ae[p] = a[dofs[e, p]]
        for q in range(9):
            phie[q] = phi[conn[e, q]]

        for ip in range(nip):
            e0 = 0.0
            e1 = 0.0
            e5 = 0.0
            for q in range(9):
                bx = B3[e, ip, 0, 2 * q]
                by = B3[e, ip, 1, 2 * q + 1]
                e0 += bx * ue[2 * q]
                e1 += by * ue[2 * q + 1]
                e5 += B3[e, ip, 2, 2 * q] * ue[2 * q] + B3[e, ip, 2, 2 * q + 1] * ue[2 * q + 1]
            eps[0] = e0
            eps[1] = e1
            eps[2] = 0.0
            eps[3] = 0.0
            eps[4] = 0.0
            eps[5] = e5

            p_ip = 0.0
            for q in range(9):
                p_ip += N[ip, q] * phie[q]

            l1, l2, f, a1, a2, er = _rm_point(
                eps, p_ip, K, mu, ft, fs, kappa, kappa_t, pen, eps_ref, crit, sig, D
            )
            for k in range(6):
                ip_eps[e, ip, k] = eps[k]
                ip_sig[e, ip, k] = sig[k]
            ip_lam[e, ip, 0] = l1
            ip_lam[e, ip, 1] = l2
            ip_fd[e, ip] = f
            ip_act[e, ip, 0] = a1
            ip_act[e, ip, 1] = a2
            ip_phi[e, ip] = p_ip
            err[e, ip] = er

            w = wdet[e, ip]
            D3[0, 0] = D[0, 0]
            D3[0, 1] = D[0, 1]
            D3[0, 2] = D[0, 5]
            D3[1, 0] = D[1, 0]
            D3[1, 1] = D[1, 1]
            D3[1, 2] = D[1, 5]
            D3[2, 0] = D[5, 0]
            D3[2, 1] = D[5, 1]
            D3[2, 2] = D[5, 5]

            # tmp = D3 @ B3ip ; Ke += w * B3ip^T tmp ; re += w * B3ip^T sig3
            for jcol in range(18):
                b0 = B3[e, ip, 0, jcol]
                b1 = B3[e, ip, 1, jcol]
                b2 = B3[e, ip, 2, jcol]
                tmp[0, jcol] = D3[0, 0] * b0 + D3[0, 1] * b1 + D3[0, 2] * b2
                tmp[1, jcol] = D3[1, 0] * b0 + D3[1, 1] * b1 + D3[1, 2] * b2
                tmp[2, jcol] = D3[2, 0] * b0 + D3[2, 1] * b1 + D3[2, 2] * b2
            s0 = sig[0]
            s1 = sig[1]
            s2 = sig[5]
            for irow in range(18):
                b0 = B3[e, ip, 0, irow]
                b1 = B3[e, ip, 1, irow]
                b2 = B3[e, ip, 2, irow]
                re[e, irow] += w * (b0 * s0 + b1 * s1 + b2 * s2)
                for jcol in range(18):
                    Ke[e, irow, jcol] += w * (
                        b0 * tmp[0, jcol] + b1 * tmp[1, jcol] + b2 * tmp[2, jcol]
                    )

        if dyn:
            for irow in range(18):
                acc = 0.0
                for jcol in range(18):
                    m = Me[e, irow, jcol]
                    Ke[e, irow, jcol] += mass_fac * m
                    acc += m * (ae[jcol] + c_damp * ve[jcol])
                re[e, irow] += acc

    return Ke, re, ip_eps, ip_sig, ip_lam, ip_fd, ip_act, ip_phi, err


@njit(cache=True)
def phasefield_kernel(N, dNdx, wdet, F_ip, Gc, ell, kappa):
    nel, nip = wdet.shape
    Ae = np.zeros((nel, 9, 9))
    be = np.zeros((nel, 9))
    for e in range(nel):
        for ip in range(nip):
            w = wdet[e, ip]
            fac = (Gc / ell + 2.0 * (1.0 - kappa) * F_ip[e, ip]) * w
            grad_fac = Gc * ell * w
            src = 2.0 * (1.0 - kappa) * F_ip[e, ip] * w
            for ia in range(9):
                na = N[ip, ia]
                be[e, ia] += src * na
                for ib in range(9):
                    Ae[e, ia, ib] += fac * na * N[ip, ib] + grad_fac * (
                        dNdx[e, ip, ia, 0] * dNdx[e, ip, ib, 0]
                        + dNdx[e, ip, ia, 1] * dNdx[e, ip, ib, 1]
                    )
    return Ae, be
