"""Compiled inner loops of the cavitation and coupled ring solvers.

Everything here works on arrays of shape ``(n1, n2)`` indexed ``[i, j]``
with ``i`` along x1. Region labels: 0 full film, 1 cavity not connected to
the combustion-chamber edge, 2 cavity connected to it.
"""

import numpy as np
from numba import njit

FULL_FILM = 0
CAVITY_PLAIN = 1
CAVITY_RIGHT = 2

MODEL_EXTENDED = 0
MODEL_REYNOLDS = 1


@njit(cache=True)
def flood_right(theta, periodic, threshold, labels, queue):
    """Label the connected components of {theta < threshold} touching i = n1-1.

    Returns True if the flooded region reaches the i = 0 column.
    """
    n1, n2 = theta.shape
    for i in range(n1):
        for j in range(n2):
            labels[i, j] = CAVITY_PLAIN if theta[i, j] < threshold else FULL_FILM
    head = 0
    tail = 0
    last = n1 - 1
    for j in range(n2):
        if labels[last, j] == CAVITY_PLAIN:
            labels[last, j] = CAVITY_RIGHT
            queue[tail] = last * n2 + j
            tail += 1
    touches_left = False
    while head < tail:
        k = queue[head]
        head += 1
        i = k // n2
        j = k - i * n2
        if i == 0:
            touches_left = True
        for d in range(4):
            ii = i
            jj = j
            if d == 0:
                ii = i - 1
            elif d == 1:
                ii = i + 1
            elif d == 2:
                jj = j - 1
            else:
                jj = j + 1
            if ii < 0 or ii >= n1:
                continue
            if jj < 0 or jj >= n2:
                if not periodic or n2 == 1:
                    continue
                jj = jj % n2
            if labels[ii, jj] == CAVITY_PLAIN:
                labels[ii, jj] = CAVITY_RIGHT
                queue[tail] = ii * n2 + jj
                tail += 1
    return touches_left


@njit(cache=True)
def build_T(labels, pcc, extension, periodic, T):
    n1, n2 = labels.shape
    for i in range(n1):
        for j in range(n2):
            T[i, j] = 0.0
    if pcc == 0.0:
        return
    for i in range(n1):
        for j in range(n2):
            lab = labels[i, j]
            if lab == CAVITY_RIGHT:
                T[i, j] = pcc
            elif lab == FULL_FILM and extension:
                hit = False
                if i > 0 and labels[i - 1, j] == CAVITY_RIGHT:
                    hit = True
                elif i < n1 - 1 and labels[i + 1, j] == CAVITY_RIGHT:
                    hit = True
                elif n2 > 1:
                    if j > 0 or periodic:
                        if labels[i, (j - 1) % n2] == CAVITY_RIGHT:
                            hit = True
                    if not hit and (j < n2 - 1 or periodic):
                        if labels[i, (j + 1) % n2] == CAVITY_RIGHT:
                            hit = True
                if hit:
                    T[i, j] = pcc


@njit(cache=True)
def _cell_terms(p, theta, h, hL, hR, i, j, u, dx1, q2, periodic, h_feed, p_left, p_right, reynolds):
    """Return (a00, C_without_storage, h_up_theta_up_coef) for cell (i, j).

    C excludes the previous-step storage f; the caller adds it.
    """
    n1, n2 = h.shape
    hc3 = h[i, j] ** 3
    a00 = 0.0
    C = 0.0
    # x1 faces; half-cell distance to the Dirichlet edges
    if i > 0:
        s = 0.5 * (h[i - 1, j] ** 3 + hc3)
        a00 += s
        C += s * p[i - 1, j]
    else:
        s = hL[j] ** 3 + hc3
        a00 += s
        C += s * p_left
    if i < n1 - 1:
        s = 0.5 * (h[i + 1, j] ** 3 + hc3)
        a00 += s
        C += s * p[i + 1, j]
    else:
        s = hR[j] ** 3 + hc3
        a00 += s
        C += s * p_right
    if n2 > 1:
        if j > 0 or periodic:
            jm = (j - 1) % n2
            s = q2 * 0.5 * (h[i, jm] ** 3 + hc3)
            a00 += s
            C += s * p[i, jm]
        if j < n2 - 1 or periodic:
            jp = (j + 1) % n2
            s = q2 * 0.5 * (h[i, jp] ** 3 + hc3)
            a00 += s
            C += s * p[i, jp]
    # upwind Couette inflow
    if u > 0.0:
        if i > 0:
            hth = h[i - 1, j] * (1.0 if reynolds else theta[i - 1, j])
        else:
            hth = hL[j] if reynolds else min(hL[j], h_feed)
        C += u * dx1 * hth
    elif u < 0.0:
        if i < n1 - 1:
            hth = h[i + 1, j] * (1.0 if reynolds else theta[i + 1, j])
        else:
            hth = hR[j] if reynolds else min(hR[j], h_feed)
        C += -u * dx1 * hth
    return a00, C


@njit(cache=True)
def sweep(p, theta, h, hL, hR, storage, T, u, dx1, q2, tcoef, periodic, h_feed,
          p_left, p_right, reynolds, labels, stats, threshold=1.0, omega=1.0):
    """One lexicographic Gauss-Seidel sweep of the B_T fixed-point map.

    ``storage`` holds (2 dx1^2/dt) (h theta) from the previous time step and
    ``tcoef`` is 2 dx1^2/dt. Returns (sum |dp|, sum |dtheta|, switched) where
    ``switched`` tells whether any cell crossed between full film and cavity.
    ``stats[0]`` receives the minimum pre-clamp theta over cells labelled
    CAVITY_RIGHT.
    """
    n1, n2 = h.shape
    dp = 0.0
    dth = 0.0
    switched = False
    min_pre = np.inf
    au = abs(u)
    for ii in range(n1):
        i = ii if u >= 0.0 else n1 - 1 - ii
        for j in range(n2):
            a00, C = _cell_terms(p, theta, h, hL, hR, i, j, u, dx1, q2, periodic,
                                 h_feed, p_left, p_right, reynolds)
            C += storage[i, j]
            e00 = (au * dx1 + tcoef) * h[i, j]
            p_old = p[i, j]
            th_old = theta[i, j]
            ptrial = (C - e00) / a00
            if omega != 1.0 and th_old >= threshold:
                ptrial = p_old + omega * (ptrial - p_old)
            if reynolds:
                pn = ptrial if ptrial > 0.0 else 0.0
                thn = 1.0 if pn > 0.0 else 0.0
            elif ptrial >= T[i, j]:
                pn = ptrial
                thn = 1.0
            else:
                pn = T[i, j]
                if e00 <= 0.0:
                    stats[1] = 1.0
                    thn = 0.0
                else:
                    thn = (C - a00 * pn) / e00
                if labels[i, j] == CAVITY_RIGHT and thn < min_pre:
                    min_pre = thn
                if thn < 0.0:
                    thn = 0.0
                elif thn > 1.0:
                    thn = 1.0
            if (th_old < threshold) != (thn < threshold):
                switched = True
            dp += abs(pn - p_old)
            dth += abs(thn - th_old)
            p[i, j] = pn
            theta[i, j] = thn
    stats[0] = min_pre
    return dp, dth, switched


@njit(cache=True)
def contact_pressure_scalar(h, kc, fa, fb, fc, sigma):
    lam = h / sigma
    if lam >= fb:
        return 0.0
    return kc * fa * (fb - lam) ** fc


@njit(cache=True)
def contact_sum(h, kc, fa, fb, fc, sigma):
    n1, n2 = h.shape
    acc = 0.0
    for i in range(n1):
        for j in range(n2):
            acc += contact_pressure_scalar(h[i, j], kc, fa, fb, fc, sigma)
    return acc


@njit(cache=True)
def solve_step(p, theta, base, baseL, baseR, h, hL, hR, storage, T, labels, queue,
               stats, Z_start, Z_prev, V_prev, dynamic, u, dt, dx1, q2, tcoef,
               periodic, h_feed, p_left, p_right, pcc_T, extension, threshold,
               m, W_ext, load_factor, kc, fa, fb, fc, sigma, tol, max_iters,
               reynolds, omega, line, work, full, max_active, basis, Db, Lb, Ub, rb, sm, sv):
    """Fixed-point iteration of one time step, optionally coupled with Z.

    Gap arrays ``h, hL, hR`` are overwritten as ``base + Z``. On return
    ``stats`` holds [min pre-clamp theta in the last sweep, degenerate flag,
    final change, W_h, W_con, touches_left, Z, non-positive-gap flag,
    count of line solves whose active-set loop did not settle, secant slope
    dr/dZ carried over to the next step].
    ``line`` selects block (x1-line) Gauss-Seidel instead of the pointwise
    sweep; ``work`` (12 x n1) and ``full`` (n1) are its scratch arrays.
    Before every line sweep :func:`modal_correction` runs on the x2 modes in
    the rows of ``basis`` (none when it has zero rows); ``Db, Lb, Ub`` of
    shape ``(n1, M, M)``, ``rb`` of shape ``(n1, M)``, ``sm`` and ``sv`` are
    its scratch.
    Returns the iteration count, or -1 when ``max_iters`` was exhausted.
    """
    n1, n2 = p.shape
    Z = Z_start
    for i in range(n1):
        for j in range(n2):
            h[i, j] = base[i, j] + Z
    for j in range(n2):
        hL[j] = baseL[j] + Z
        hR[j] = baseR[j] + Z
    touches_left = False
    need_flood = True
    slope = stats[9] if stats[9] < -1.0 else -1.0
    hmin0 = np.inf
    for i in range(n1):
        for j in range(n2):
            if base[i, j] < hmin0:
                hmin0 = base[i, j]
    for j in range(n2):
        if baseL[j] < hmin0:
            hmin0 = baseL[j]
        if baseR[j] < hmin0:
            hmin0 = baseR[j]
    Z_last = Z
    r_last = 0.0
    change = np.inf
    W_h = 0.0
    W_c = 0.0
    stats[1] = 0.0
    stats[7] = 0.0
    stats[8] = 0.0
    stats[0] = np.inf
    k = 0
    while k < max_iters:
        k += 1
        dZ = 0.0
        if dynamic:
            W_h = load_factor * np.sum(p)
            W_c = load_factor * contact_sum(h, kc, fa, fb, fc, sigma)
            Z_pred = Z_prev + dt * V_prev + dt * dt / (2.0 * m) * (W_h + W_c + W_ext)
            # Solve Z = Z_pred(Z) by a secant iteration on r = Z_pred - Z.
            # The plain substitution Z <- Z_pred diverges once
            # dt**2 / (2 m) |dW/dZ| > 1, which squeeze films reach easily.
            r = Z_pred - Z
            # tiny Z steps give a slope dominated by the field updates
            if k > 1 and abs(Z - Z_last) > 1e-9:
                sl = (r - r_last) / (Z - Z_last)
                if sl < -1.0:
                    slope = sl
            Z_last = Z
            r_last = r
            Z_new = Z - r / slope
            # keep at least half of the smallest gap
            floor = Z - 0.5 * (hmin0 + Z)
            if Z_new < floor:
                Z_new = floor
            dZ = abs(Z_new - Z)
            Z = Z_new
            hmin = np.inf
            for i in range(n1):
                for j in range(n2):
                    h[i, j] = base[i, j] + Z
                    if h[i, j] < hmin:
                        hmin = h[i, j]
            for j in range(n2):
                hL[j] = baseL[j] + Z
                hR[j] = baseR[j] + Z
                if hL[j] < hmin:
                    hmin = hL[j]
                if hR[j] < hmin:
                    hmin = hR[j]
            if hmin <= 0.0:
                stats[7] = 1.0
                stats[6] = Z
                return -1
        if not reynolds and need_flood:
            touches_left = flood_right(theta, periodic, threshold, labels, queue)
            build_T(labels, pcc_T, extension, periodic, T)
        if line:
            if basis.shape[0] > 0:
                modal_correction(p, theta, h, hL, hR, storage, T, u, dx1, q2, tcoef,
                                 periodic, h_feed, p_left, p_right, reynolds, threshold,
                                 basis, Db, Lb, Ub, rb, sm, sv)
            dp, dth, switched, bad, degen = line_sweep(p, theta, h, hL, hR, storage, T, u, dx1,
                                                q2, tcoef, periodic, h_feed, p_left,
                                                p_right, reynolds, threshold, work, full,
                                                max_active, omega)
            stats[8] += bad
            if degen > 0:
                stats[1] = 1.0
        else:
            dp, dth, switched = sweep(p, theta, h, hL, hR, storage, T, u, dx1, q2, tcoef,
                                      periodic, h_feed, p_left, p_right, reynolds, labels,
                                      stats, threshold, omega)
        need_flood = switched
        change = dp + dth + dZ
        if change < tol:
            if reynolds or not switched:
                break
            # accept only if re-flooding leaves T unchanged
            T_old = T.copy()
            touches_left = flood_right(theta, periodic, threshold, labels, queue)
            build_T(labels, pcc_T, extension, periodic, T)
            need_flood = False
            if np.array_equal(T, T_old):
                break
    if not reynolds:
        touches_left = flood_right(theta, periodic, threshold, labels, queue)
        build_T(labels, pcc_T, extension, periodic, T)
    stats[2] = change
    stats[3] = W_h
    stats[4] = W_c
    stats[5] = 1.0 if touches_left else 0.0
    stats[6] = Z
    if dynamic:
        stats[9] = slope
    if change >= tol:
        return -1
    return k


@njit(cache=True)
def _line_coefficients(p, h, hL, hR, storage, j, u, dx1, q2, tcoef, periodic, h_feed,
                       p_left, p_right, reynolds, work):
    """Per-row coefficients of line ``j`` with the x2 neighbours frozen.

    Rows of ``work``: 0 a00, 1 s to i-1, 2 s to i+1, 3 known part of C,
    4 e00, 5 Couette coefficient of the upwind neighbour (0 at the edge).
    """
    n1, n2 = h.shape
    c = abs(u) * dx1
    for i in range(n1):
        hc3 = h[i, j] ** 3
        a00 = 0.0
        k = storage[i, j]
        if i > 0:
            s = 0.5 * (h[i - 1, j] ** 3 + hc3)
            work[1, i] = s
        else:
            s = hL[j] ** 3 + hc3
            work[1, i] = 0.0
            k += s * p_left
        a00 += s
        if i < n1 - 1:
            s = 0.5 * (h[i + 1, j] ** 3 + hc3)
            work[2, i] = s
        else:
            s = hR[j] ** 3 + hc3
            work[2, i] = 0.0
            k += s * p_right
        a00 += s
        if n2 > 1:
            if j > 0 or periodic:
                jm = (j - 1) % n2
                s = q2 * 0.5 * (h[i, jm] ** 3 + hc3)
                a00 += s
                k += s * p[i, jm]
            if j < n2 - 1 or periodic:
                jp = (j + 1) % n2
                s = q2 * 0.5 * (h[i, jp] ** 3 + hc3)
                a00 += s
                k += s * p[i, jp]
        cu = 0.0
        if u > 0.0:
            if i > 0:
                cu = c * h[i - 1, j]
            else:
                k += c * (hL[j] if reynolds else min(hL[j], h_feed))
        elif u < 0.0:
            if i < n1 - 1:
                cu = c * h[i + 1, j]
            else:
                k += c * (hR[j] if reynolds else min(hR[j], h_feed))
        if reynolds and cu != 0.0:
            k += cu
            cu = 0.0
        work[0, i] = a00
        work[3, i] = k
        work[4, i] = (c + tcoef) * h[i, j]
        work[5, i] = cu


@njit(cache=True)
def _solve_line(p, theta, T, j, u, threshold, reynolds, full, work, max_active, omega):
    """Solve line ``j`` exactly for the complementarity problem.

    The full-film/cavity partition is found with a primal-dual active-set
    loop, one tridiagonal solve per pass. Line unknowns are p on full cells
    and theta on cavity cells (p on every cell for the Reynolds variant).
    ``omega`` over-relaxes the pressure of cells that stay full film.
    Returns (sum |dp|, sum |dtheta|, switched, converged).
    """
    n1 = p.shape[0]
    a00 = work[0]
    sm = work[1]
    sp = work[2]
    kk = work[3]
    e00 = work[4]
    cu = work[5]
    lo = work[6]
    di = work[7]
    up = work[8]
    rhs = work[9]
    cp = work[10]
    x = work[11]
    for i in range(n1):
        full[i] = theta[i, j] >= threshold
    converged = False
    for _ in range(max_active):
        for i in range(n1):
            r = kk[i]
            lo[i] = 0.0
            up[i] = 0.0
            if full[i]:
                if i > 0:
                    im = i - 1
                    if full[im]:
                        lo[i] = -sm[i]
                    else:
                        r += sm[i] * T[im, j]
                if i < n1 - 1:
                    ip = i + 1
                    if full[ip]:
                        up[i] = -sp[i]
                    else:
                        r += sp[i] * T[ip, j]
                di[i] = a00[i]
                r -= e00[i]
            elif reynolds:
                di[i] = 1.0
                r = 0.0
            else:
                if i > 0:
                    if full[i - 1]:
                        lo[i] = -sm[i]
                    else:
                        r += sm[i] * T[i - 1, j]
                if i < n1 - 1:
                    if full[i + 1]:
                        up[i] = -sp[i]
                    else:
                        r += sp[i] * T[i + 1, j]
                if e00[i] <= 0.0:
                    # no storage and no Couette term: theta is undetermined
                    di[i] = 1.0
                    lo[i] = 0.0
                    up[i] = 0.0
                    r = 0.0
                    rhs[i] = r
                    continue
                di[i] = e00[i]
                r -= a00[i] * T[i, j]
            # upwind Couette inflow: theta of the upwind cell is either
            # known (full film, theta = 1) or a line unknown
            if cu[i] != 0.0:
                iu = i - 1 if u > 0.0 else i + 1
                if full[iu]:
                    r += cu[i]
                elif u > 0.0:
                    lo[i] -= cu[i]
                else:
                    up[i] -= cu[i]
            rhs[i] = r
        cp[0] = up[0] / di[0]
        x[0] = rhs[0] / di[0]
        for i in range(1, n1):
            m = di[i] - lo[i] * cp[i - 1]
            cp[i] = up[i] / m
            x[i] = (rhs[i] - lo[i] * x[i - 1]) / m
        for i in range(n1 - 2, -1, -1):
            x[i] = x[i] - cp[i] * x[i + 1]
        flips = 0
        for i in range(n1):
            if full[i]:
                if x[i] < T[i, j]:
                    full[i] = False
                    flips += 1
            elif reynolds:
                acc = kk[i] - e00[i]
                if i > 0 and full[i - 1]:
                    acc += sm[i] * x[i - 1]
                if i < n1 - 1 and full[i + 1]:
                    acc += sp[i] * x[i + 1]
                if acc > 0.0:
                    full[i] = True
                    flips += 1
            elif x[i] > 1.0:
                full[i] = True
                flips += 1
        if flips == 0:
            converged = True
            break
    dsum_p = 0.0
    dsum_t = 0.0
    switched = False
    for i in range(n1):
        if full[i]:
            pn = x[i]
            tn = 1.0
            if omega != 1.0 and theta[i, j] >= threshold:
                pr = p[i, j] + omega * (pn - p[i, j])
                if pr >= T[i, j]:
                    pn = pr
        elif reynolds:
            pn = 0.0
            tn = 0.0
        else:
            pn = T[i, j]
            tn = x[i]
            if tn < 0.0:
                tn = 0.0
            elif tn > 1.0:
                tn = 1.0
        if (theta[i, j] < threshold) != (tn < threshold):
            switched = True
        dsum_p += abs(pn - p[i, j])
        dsum_t += abs(tn - theta[i, j])
        p[i, j] = pn
        theta[i, j] = tn
    return dsum_p, dsum_t, switched, converged


@njit(cache=True)
def line_sweep(p, theta, h, hL, hR, storage, T, u, dx1, q2, tcoef, periodic, h_feed,
               p_left, p_right, reynolds, threshold, work, full, max_active, omega=1.0):
    """One block Gauss-Seidel pass over the x1-lines.

    Returns (sum |dp|, sum |dtheta|, switched, number of lines whose
    active-set loop hit ``max_active``, number of degenerate cavity cells).
    """
    n1, n2 = h.shape
    dp = 0.0
    dth = 0.0
    switched = False
    bad = 0
    degenerate = 0
    for j in range(n2):
        _line_coefficients(p, h, hL, hR, storage, j, u, dx1, q2, tcoef, periodic,
                           h_feed, p_left, p_right, reynolds, work)
        a, b, sw, ok = _solve_line(p, theta, T, j, u, threshold, reynolds, full, work,
                                   max_active, omega)
        dp += a
        dth += b
        if sw:
            switched = True
        if not ok:
            bad += 1
        for i in range(n1):
            if work[4, i] <= 0.0 and theta[i, j] < threshold:
                degenerate += 1
    return dp, dth, switched, bad, degenerate



@njit(cache=True)
def _invert_spd(A, W):
    """Invert the small symmetric positive definite matrix ``A`` in place.

    Gauss-Jordan without pivoting; ``W`` is scratch of the same shape.
    """
    M = A.shape[0]
    for m in range(M):
        for n in range(M):
            W[m, n] = 1.0 if m == n else 0.0
    for k in range(M):
        piv = A[k, k]
        for n in range(M):
            A[k, n] /= piv
            W[k, n] /= piv
        for m in range(M):
            if m != k:
                f = A[m, k]
                if f != 0.0:
                    for n in range(M):
                        A[m, n] -= f * A[k, n]
                        W[m, n] -= f * W[k, n]
    for m in range(M):
        for n in range(M):
            A[m, n] = W[m, n]


@njit(cache=True)
def modal_correction(p, theta, h, hL, hR, storage, T, u, dx1, q2, tcoef, periodic, h_feed,
                     p_left, p_right, reynolds, threshold, basis, Db, Lb, Ub, rb, sm, sv):
    """Galerkin pressure correction on a few x2 modes of every x1-column.

    Line sweeps along x1 damp errors that are smooth in x1 and vary slowly
    along x2 very poorly when the x2 coupling is strong. This step projects
    the full-film residual onto the rows of ``basis`` (shape ``(M, n2)``)
    column by column, solves the block-tridiagonal coarse system (symmetric
    positive definite, blocks ``M x M``) and adds the correction to p on
    full-film cells. Cavity cells are left alone. The correction vanishes
    at a converged solution. ``sm`` (2, M, M) and ``sv`` (M) are scratch.
    """
    n1, n2 = h.shape
    M = basis.shape[0]
    c = abs(u) * dx1
    for i in range(n1):
        for m in range(M):
            rb[i, m] = 0.0
            for n in range(M):
                Db[i, m, n] = 0.0
                Lb[i, m, n] = 0.0
                Ub[i, m, n] = 0.0
    for i in range(n1):
        for j in range(n2):
            if theta[i, j] < threshold:
                continue
            hc3 = h[i, j] ** 3
            a00 = 0.0
            K = storage[i, j]
            flux = 0.0
            if i > 0:
                s = 0.5 * (h[i - 1, j] ** 3 + hc3)
                flux += s * p[i - 1, j]
                if theta[i - 1, j] >= threshold:
                    for m in range(M):
                        bs = basis[m, j] * s
                        for n in range(M):
                            Lb[i, m, n] -= bs * basis[n, j]
            else:
                s = hL[j] ** 3 + hc3
                K += s * p_left
            a00 += s
            if i < n1 - 1:
                s = 0.5 * (h[i + 1, j] ** 3 + hc3)
                flux += s * p[i + 1, j]
                if theta[i + 1, j] >= threshold:
                    for m in range(M):
                        bs = basis[m, j] * s
                        for n in range(M):
                            Ub[i, m, n] -= bs * basis[n, j]
            else:
                s = hR[j] ** 3 + hc3
                K += s * p_right
            a00 += s
            if n2 > 1:
                for d in range(2):
                    if d == 0:
                        if not (j > 0 or periodic):
                            continue
                        jj = (j - 1) % n2
                    else:
                        if not (j < n2 - 1 or periodic):
                            continue
                        jj = (j + 1) % n2
                    s = q2 * 0.5 * (h[i, jj] ** 3 + hc3)
                    a00 += s
                    flux += s * p[i, jj]
                    if theta[i, jj] >= threshold:
                        for m in range(M):
                            bs = basis[m, j] * s
                            for n in range(M):
                                Db[i, m, n] -= bs * basis[n, jj]
            if u > 0.0:
                if i > 0:
                    K += c * h[i - 1, j] * (1.0 if reynolds else theta[i - 1, j])
                else:
                    K += c * (hL[j] if reynolds else min(hL[j], h_feed))
            elif u < 0.0:
                if i < n1 - 1:
                    K += c * h[i + 1, j] * (1.0 if reynolds else theta[i + 1, j])
                else:
                    K += c * (hR[j] if reynolds else min(hR[j], h_feed))
            R = K + flux - a00 * p[i, j] - (c + tcoef) * h[i, j]
            for m in range(M):
                bm = basis[m, j]
                rb[i, m] += bm * R
                ba = bm * a00
                for n in range(M):
                    Db[i, m, n] += ba * basis[n, j]
    # modes that vanish on the full cells of a column leave zero rows
    for i in range(n1):
        tr = 0.0
        for m in range(M):
            tr += Db[i, m, m]
        reg = 1e-10 * tr / M if tr > 0.0 else 1.0
        for m in range(M):
            Db[i, m, m] += reg
    # block Thomas; Db[i] is replaced by the inverse of the pivot block
    G = sm[0]
    _invert_spd(Db[0], sm[1])
    for i in range(1, n1):
        # G = L_i D_{i-1}^{-1}
        for m in range(M):
            for n in range(M):
                acc = 0.0
                for k in range(M):
                    acc += Lb[i, m, k] * Db[i - 1, k, n]
                G[m, n] = acc
        for m in range(M):
            for n in range(M):
                acc = 0.0
                for k in range(M):
                    acc += G[m, k] * Ub[i - 1, k, n]
                Db[i, m, n] -= acc
            acc = 0.0
            for k in range(M):
                acc += G[m, k] * rb[i - 1, k]
            sv[m] = acc
        for m in range(M):
            rb[i, m] -= sv[m]
        _invert_spd(Db[i], sm[1])
    for i in range(n1 - 1, -1, -1):
        for m in range(M):
            acc = rb[i, m]
            if i < n1 - 1:
                for k in range(M):
                    acc -= Ub[i, m, k] * rb[i + 1, k]
            sv[m] = acc
        for m in range(M):
            acc = 0.0
            for k in range(M):
                acc += Db[i, m, k] * sv[k]
            rb[i, m] = acc
    for i in range(n1):
        for j in range(n2):
            if theta[i, j] >= threshold:
                acc = 0.0
                for m in range(M):
                    acc += basis[m, j] * rb[i, m]
                p[i, j] += acc
