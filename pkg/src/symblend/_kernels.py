"""Compiled scalar kernels for the twist maps and their compositions.

Maps are described by flat float64 parameter vectors so a single compiled
kernel serves every family.  Status codes: 0 ok, 1 Newton failure, 2 left
the annulus.

T0 parameter layout (P0):
    0 kind (0 generating-function twist, 1 integrable frequency twist)
    1 beta_hi   2 beta_lo   3 angle = 2 pi beta
    4 tau       5 mu3       6 newton_tol   7 max_iter
    8 A         9 G0        10 fast_tol
T1 parameter layout (P1):
    0 kind (0 polynomial rotation, 1 frequency rotation)
    1 eps       2 b (rotation at J' = 0)
    3 A         4 G0        5 number of polynomial terms
    6..9 coefficients of J'^1 .. J'^4
"""
import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
OK, NEWTON_FAIL, LEFT_DOMAIN = 0, 1, 2
P0_SIZE = 11
P1_SIZE = 10


@njit(cache=True)
def wrap_2pi(x):
    y = x - TWO_PI * math.floor(x / TWO_PI)
    if y >= TWO_PI:
        y -= TWO_PI
    return y


@njit(cache=True)
def wrap_pi(x):
    y = wrap_2pi(x + math.pi) - math.pi
    return y


@njit(cache=True)
def freq_delta(A, G0, J):
    """omega(G0 + J) - omega(G0) for omega(G) = -A / G**4, without cancellation."""
    G = G0 + J
    num = J * (4.0 * G0 ** 3 + 6.0 * G0 * G0 * J + 4.0 * G0 * J * J + J ** 3)
    return A * num / (G ** 4 * G0 ** 4)


@njit(cache=True)
def frac_mult(hi, lo, k):
    """frac(k (hi + lo)) for integer-valued k; hi is a multiple of 2**-26."""
    k_low = k - 67108864.0 * math.floor(k / 67108864.0)
    a = k_low * hi
    b = k * lo
    f = (a - math.floor(a)) + (b - math.floor(b))
    return f - math.floor(f)


@njit(cache=True)
def t0_step(P0, phi, J):
    if P0[0] == 1.0:
        return wrap_2pi(phi + P0[3] + freq_delta(P0[8], P0[9], J)), J, OK
    tau = P0[4]
    mu3 = P0[5]
    tol = P0[6]
    s = math.sin(phi)
    c = math.cos(phi)
    Jp = J
    status = NEWTON_FAIL
    for _ in range(int(P0[7])):
        f = Jp - mu3 * Jp ** 3 * s - J
        df = 1.0 - 3.0 * mu3 * Jp * Jp * s
        d = f / df
        Jp -= d
        if abs(d) <= tol * abs(Jp) + 1e-300:
            status = OK
            break
    if not math.isfinite(Jp):
        status = NEWTON_FAIL
    phin = phi + P0[3] + tau * Jp + 3.0 * mu3 * Jp * Jp * c
    return wrap_2pi(phin), Jp, status


@njit(cache=True)
def t0_inv_step(P0, phi1, J1):
    if P0[0] == 1.0:
        return wrap_2pi(phi1 - P0[3] - freq_delta(P0[8], P0[9], J1)), J1, OK
    tau = P0[4]
    mu3 = P0[5]
    tol = P0[6]
    base = phi1 - P0[3] - tau * J1
    q = 3.0 * mu3 * J1 * J1
    phi = base - q * math.cos(base)
    status = NEWTON_FAIL
    for _ in range(int(P0[7])):
        f = phi + q * math.cos(phi) - base
        df = 1.0 - q * math.sin(phi)
        d = f / df
        phi -= d
        if abs(d) <= tol * (1.0 + abs(phi)):
            status = OK
            break
    J = J1 - mu3 * J1 ** 3 * math.sin(phi)
    return wrap_2pi(phi), J, status


@njit(cache=True)
def t0_fast_ok(P0, J, k):
    """Whether k iterates of the generating-function twist equal the linear twist to fast_tol."""
    if P0[0] == 1.0:
        return True
    mu3 = abs(P0[5])
    if mu3 == 0.0:
        return True
    tau = P0[4]
    theta = P0[3] + tau * J
    s = abs(math.sin(0.5 * theta))
    if s < 1e-3:
        return False
    aJ = abs(J)
    kk = abs(k)
    bphi = 2.0 * (3.0 * mu3 * aJ * aJ + tau * mu3 * aJ ** 3 * kk) / s
    bJ = 2.0 * mu3 * aJ * aJ / s
    tol = P0[10]
    return bphi <= tol and bJ <= tol


@njit(cache=True)
def t0_power(P0, phi, J, k, allow_fast):
    """k-th iterate of T0 (k may be negative)."""
    if k == 0:
        return phi, J, OK
    if allow_fast and t0_fast_ok(P0, J, k):
        if P0[0] == 1.0:
            drift = k * freq_delta(P0[8], P0[9], J)
        else:
            drift = k * P0[4] * J
        sgn = 1.0 if k > 0 else -1.0
        rot = frac_mult(P0[1], P0[2], float(abs(k)))
        return wrap_2pi(phi + sgn * TWO_PI * rot + drift), J, OK
    status = OK
    if k > 0:
        for _ in range(k):
            phi, J, st = t0_step(P0, phi, J)
            if st != OK:
                return phi, J, st
    else:
        for _ in range(-k):
            phi, J, st = t0_inv_step(P0, phi, J)
            if st != OK:
                return phi, J, st
    return phi, J, status


@njit(cache=True)
def t1_rotation(P1, Jp):
    if P1[0] == 1.0:
        return P1[2] + freq_delta(P1[3], P1[4], Jp)
    r = 0.0
    m = int(P1[5])
    for i in range(m - 1, -1, -1):
        r = (r + P1[6 + i]) * Jp
    return P1[2] + r


@njit(cache=True)
def t1_step(P1, phi, J):
    Jp = J + P1[1] * math.sin(phi)
    return wrap_2pi(phi + t1_rotation(P1, Jp)), Jp, OK


@njit(cache=True)
def t1_inv_step(P1, phi1, J1):
    phi = phi1 - t1_rotation(P1, J1)
    J = J1 - P1[1] * math.sin(phi)
    return wrap_2pi(phi), J, OK


@njit(cache=True)
def apply_runs(P0, P1, syms, counts, phi, J, check_domain, allow_fast):
    """Apply a run-length encoded word, first run first.

    Returns (phi, J, status, step) where step counts the symbols applied
    when a failure was detected (-1 on success).
    """
    done = 0
    for r in range(syms.shape[0]):
        c = counts[r]
        if syms[r] == 0:
            if check_domain and c > 1 and not (allow_fast and t0_fast_ok(P0, J, c)):
                for i in range(c):
                    phi, J, st = t0_step(P0, phi, J)
                    if st != OK:
                        return phi, J, st, done + i + 1
                    if abs(J) > 1.0:
                        return phi, J, LEFT_DOMAIN, done + i + 1
                done += c
                continue
            phi, J, st = t0_power(P0, phi, J, c, allow_fast)
            if st != OK:
                return phi, J, st, done + c
        else:
            for i in range(c):
                phi, J, st = t1_step(P1, phi, J)
                if check_domain and abs(J) > 1.0:
                    return phi, J, LEFT_DOMAIN, done + i + 1
        done += c
        if check_domain and abs(J) > 1.0:
            return phi, J, LEFT_DOMAIN, done
    return phi, J, OK, -1


@njit(cache=True)
def apply_runs_inverse(P0, P1, syms, counts, phi, J, allow_fast):
    """Apply the inverse of a run-length encoded word (last run inverted first)."""
    for r in range(syms.shape[0] - 1, -1, -1):
        c = counts[r]
        if syms[r] == 0:
            phi, J, st = t0_power(P0, phi, J, -c, allow_fast)
            if st != OK:
                return phi, J, st, r
        else:
            for _ in range(c):
                phi, J, st = t1_inv_step(P1, phi, J)
    return phi, J, OK, -1


@njit(cache=True)
def apply_runs_many(P0, P1, syms, counts, phis, Js, allow_fast):
    n = phis.shape[0]
    out_phi = np.empty(n)
    out_J = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        p, j, st, _ = apply_runs(P0, P1, syms, counts, phis[i], Js[i], False, allow_fast)
        out_phi[i] = p
        out_J[i] = j
        status[i] = st
    return out_phi, out_J, status


@njit(cache=True)
def apply_runs_inverse_many(P0, P1, syms, counts, phis, Js, allow_fast):
    n = phis.shape[0]
    out_phi = np.empty(n)
    out_J = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        p, j, st, _ = apply_runs_inverse(P0, P1, syms, counts, phis[i], Js[i], allow_fast)
        out_phi[i] = p
        out_J[i] = j
        status[i] = st
    return out_phi, out_J, status


# --------------------------------------------------------------------------
# charts: (xi, eta) -> (phi, J) = (center + sign * (C z)_phi, (C z)_J)
# layout: C00 C01 C10 C11 I00 I01 I10 I11 center sign

@njit(cache=True)
def chart_to(ch, xi, eta):
    dphi = ch[0] * xi + ch[1] * eta
    dJ = ch[2] * xi + ch[3] * eta
    return wrap_2pi(ch[8] + ch[9] * dphi), dJ


@njit(cache=True)
def chart_from(ch, phi, J):
    dphi = ch[9] * wrap_pi(phi - ch[8])
    return ch[4] * dphi + ch[5] * J, ch[6] * dphi + ch[7] * J


@njit(cache=True)
def family_point(P0, P1, ch, order, n, xi, eta, inverse, allow_fast):
    """One application of F_n = T0^n T1 (order 0) or G_n = T1 T0^n (order 1) in chart units."""
    phi, J = chart_to(ch, xi, eta)
    st = OK
    if not inverse:
        if order == 0:
            phi, J, st = t1_step(P1, phi, J)
            phi, J, st = t0_power(P0, phi, J, n, allow_fast)
        else:
            phi, J, st = t0_power(P0, phi, J, n, allow_fast)
            phi, J, st2 = t1_step(P1, phi, J)
    else:
        if order == 0:
            phi, J, st = t0_power(P0, phi, J, -n, allow_fast)
            phi, J, st2 = t1_inv_step(P1, phi, J)
        else:
            phi, J, st2 = t1_inv_step(P1, phi, J)
            phi, J, st = t0_power(P0, phi, J, -n, allow_fast)
    x, y = chart_from(ch, phi, J)
    return x, y, st


@njit(cache=True)
def family_many(P0, P1, ch, order, n, xis, etas, inverse, allow_fast):
    m = xis.shape[0]
    ox = np.empty(m)
    oy = np.empty(m)
    bad = 0
    for i in range(m):
        x, y, st = family_point(P0, P1, ch, order, n, xis[i], etas[i], inverse, allow_fast)
        ox[i] = x
        oy[i] = y
        if st != OK:
            bad += 1
    return ox, oy, bad


@njit(cache=True)
def family_word_many(P0, P1, ch, order, ns, xis, etas, inverse, allow_fast):
    """Apply F_{ns[0]}, then F_{ns[1]}, ... (or the inverses in reverse order)."""
    m = xis.shape[0]
    ox = xis.copy()
    oy = etas.copy()
    bad = 0
    L = ns.shape[0]
    for i in range(m):
        x = ox[i]
        y = oy[i]
        for k in range(L):
            idx = k if not inverse else L - 1 - k
            x, y, st = family_point(P0, P1, ch, order, ns[idx], x, y, inverse, allow_fast)
            if st != OK:
                bad += 1
        ox[i] = x
        oy[i] = y
    return ox, oy, bad


# --------------------------------------------------------------------------
# steering: greedy action control with rotations and kicks

@njit(cache=True)
def _in_arc(phi, lo, width):
    return wrap_2pi(phi - lo) <= width


@njit(cache=True)
def steer(P0, P1, phi, J, J_target, tol, arc_lo, arc_width, backward,
          max_rot, max_kicks, out_syms, out_counts):
    """Drive J to J_target within tol, then rotate phi into [arc_lo, arc_lo + arc_width].

    Forward: runs of T0 followed by single T1 kicks eps sin(phi).  Backward:
    T0^{-1} and T1^{-1}, whose kick is -eps sin(phi - B'(J)).  Runs are stored
    in application order.  Returns (phi, J, n_runs, status) with status
    0 ok, 1 Newton failure, 3 rotation budget exceeded, 4 kick budget
    exceeded, 5 run buffer full.
    """
    eps = P1[1]
    n_runs = 0
    cap = out_syms.shape[0]
    kicks = 0
    while True:
        d = J_target - J
        if abs(d) <= tol:
            break
        if kicks >= max_kicks:
            return phi, J, n_runs, 4
        # target interval for the kick value in units of eps
        if abs(d) > eps:
            lo, hi = 0.5, 1.0
            if d < 0:
                lo, hi = -1.0, -0.5
        else:
            lo = (d - 0.5 * tol) / eps
            hi = (d + 0.5 * tol) / eps
        rot = 0
        while True:
            if backward:
                s = -math.sin(phi - t1_rotation(P1, J))
            else:
                s = math.sin(phi)
            if lo <= s <= hi:
                break
            if rot >= max_rot:
                return phi, J, n_runs, 3
            if backward:
                phi, J, st = t0_inv_step(P0, phi, J)
            else:
                phi, J, st = t0_step(P0, phi, J)
            if st != OK:
                return phi, J, n_runs, 1
            rot += 1
        if n_runs + 2 > cap:
            return phi, J, n_runs, 5
        if rot > 0:
            out_syms[n_runs] = 0
            out_counts[n_runs] = rot
            n_runs += 1
        if backward:
            phi, J, st = t1_inv_step(P1, phi, J)
        else:
            phi, J, st = t1_step(P1, phi, J)
        out_syms[n_runs] = 1
        out_counts[n_runs] = 1
        n_runs += 1
        kicks += 1
    rot = 0
    while not _in_arc(phi, arc_lo, arc_width):
        if rot >= max_rot:
            return phi, J, n_runs, 3
        if backward:
            phi, J, st = t0_inv_step(P0, phi, J)
        else:
            phi, J, st = t0_step(P0, phi, J)
        if st != OK:
            return phi, J, n_runs, 1
        rot += 1
    if rot > 0:
        if n_runs + 1 > cap:
            return phi, J, n_runs, 5
        out_syms[n_runs] = 0
        out_counts[n_runs] = rot
        n_runs += 1
    return phi, J, n_runs, 0


# --------------------------------------------------------------------------
# skew products: F(omega, z) = T_{omega_0}(z) + (0, A sum_k delta^k g_k(phi') s_k)
# with s_k = omega_k - omega_{-k} and g_k(phi) = sin(phi + k).
# KP layout: 0 A, 1 delta, 2 K (truncation depth), 3 extension symbol.
# Sequences are run-length encoded with run starts; positions outside
# [0, total) read the extension symbol.

@njit(cache=True)
def seq_symbol(syms, starts, total, ext, pos):
    if pos < 0 or pos >= total:
        return ext
    lo = 0
    hi = starts.shape[0] - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if starts[mid] <= pos:
            lo = mid
        else:
            hi = mid - 1
    return syms[lo]


@njit(cache=True)
def skew_shear(KP, phi, s):
    """A sum_k delta^k sin(phi + k) s[k-1]."""
    A = KP[0]
    d = KP[1]
    K = int(KP[2])
    acc = 0.0
    dk = 1.0
    for k in range(1, K + 1):
        dk *= d
        if s[k - 1] != 0.0:
            acc += dk * math.sin(phi + k) * s[k - 1]
    return A * acc


@njit(cache=True)
def _seq_signs(KP, syms, starts, total, pos, s):
    K = int(KP[2])
    ext = int(KP[3])
    nz = False
    for k in range(1, K + 1):
        v = seq_symbol(syms, starts, total, ext, pos + k) - seq_symbol(syms, starts, total, ext, pos - k)
        s[k - 1] = v
        if v != 0:
            nz = True
    return nz


@njit(cache=True)
def _plain_step(P0, P1, sym, phi, J, inverse):
    if sym == 0:
        if inverse:
            return t0_inv_step(P0, phi, J)
        return t0_step(P0, phi, J)
    if inverse:
        return t1_inv_step(P1, phi, J)
    return t1_step(P1, phi, J)


@njit(cache=True)
def skew_eval(P0, P1, KP, syms, counts, starts, total, j0, j1, phi, J, inverse, allow_fast):
    """Fiber composition over positions j0 <= j < j1 (or its inverse from j1 back to j0).

    Inside a run, positions whose whole coupling window lies in the run carry
    no shear and are applied as a block.
    """
    K = int(KP[2])
    s = np.zeros(max(K, 1))
    st = OK
    nruns = starts.shape[0]
    if not inverse:
        j = j0
        while j < j1:
            sym = seq_symbol(syms, starts, total, int(KP[3]), j)
            # block of unsheared steps
            if 0 <= j < total:
                lo = 0
                hi = nruns - 1
                while lo < hi:
                    mid = (lo + hi + 1) // 2
                    if starts[mid] <= j:
                        lo = mid
                    else:
                        hi = mid - 1
                rs = starts[lo]
                re = rs + counts[lo]
                if j >= rs + K and j < re - K:
                    m = min(re - K, j1) - j
                    if sym == 0:
                        phi, J, st = t0_power(P0, phi, J, m, allow_fast)
                    else:
                        for _ in range(m):
                            phi, J, st = t1_step(P1, phi, J)
                    if st != OK:
                        return phi, J, st
                    j += m
                    continue
            phi, J, st = _plain_step(P0, P1, sym, phi, J, False)
            if st != OK:
                return phi, J, st
            if _seq_signs(KP, syms, starts, total, j, s):
                J += skew_shear(KP, phi, s)
            j += 1
    else:
        j = j1 - 1
        while j >= j0:
            sym = seq_symbol(syms, starts, total, int(KP[3]), j)
            if 0 <= j < total:
                lo = 0
                hi = nruns - 1
                while lo < hi:
                    mid = (lo + hi + 1) // 2
                    if starts[mid] <= j:
                        lo = mid
                    else:
                        hi = mid - 1
                rs = starts[lo]
                re = rs + counts[lo]
                if j >= rs + K and j < re - K:
                    m = j - max(rs + K, j0) + 1
                    if sym == 0:
                        phi, J, st = t0_power(P0, phi, J, -m, allow_fast)
                    else:
                        for _ in range(m):
                            phi, J, st = t1_inv_step(P1, phi, J)
                    if st != OK:
                        return phi, J, st
                    j -= m
                    continue
            if _seq_signs(KP, syms, starts, total, j, s):
                J -= skew_shear(KP, phi, s)
            phi, J, st = _plain_step(P0, P1, sym, phi, J, True)
            if st != OK:
                return phi, J, st
            j -= 1
    return phi, J, st


@njit(cache=True)
def skew_eval_many(P0, P1, KP, syms, counts, starts, total, j0, j1, phis, Js, inverse,
                   allow_fast):
    m = phis.shape[0]
    op = np.empty(m)
    oj = np.empty(m)
    st = np.zeros(m, np.int64)
    for i in range(m):
        op[i], oj[i], st[i] = skew_eval(P0, P1, KP, syms, counts, starts, total, j0, j1,
                                       phis[i], Js[i], inverse, allow_fast)
    return op, oj, st


@njit(cache=True)
def _buf_step(P0, P1, KP, buf, n_dec, b, phi, J, direction, s):
    """Step at buffer index b (one position in the steering direction).

    buf holds symbols in steering order; indices >= n_dec are undecided and
    read as the extension symbol.  Position offsets +k map to b + direction k.
    """
    K = int(KP[2])
    ext = int(KP[3])
    nz = False
    for k in range(1, K + 1):
        ia = b + direction * k
        ib = b - direction * k
        va = ext if (ia < 0 or ia >= n_dec) else buf[ia]
        vb = ext if (ib < 0 or ib >= n_dec) else buf[ib]
        s[k - 1] = va - vb
        if va != vb:
            nz = True
    sym = buf[b]
    if direction > 0:
        phi, J, st = _plain_step(P0, P1, sym, phi, J, False)
        if nz:
            J += skew_shear(KP, phi, s)
    else:
        if nz:
            J -= skew_shear(KP, phi, s)
        phi, J, st = _plain_step(P0, P1, sym, phi, J, True)
    return phi, J, st


@njit(cache=True)
def skew_steer(P0, P1, KP, buf, n_hist, n_forced, phi, J, J_target, tol, ch, box_x, box_y,
               backward, max_rot, max_kicks):
    """Greedy steering for the skew product with a K-step recompute window.

    buf[:n_hist] is the symbol context behind the start (in steering order,
    already applied); buf[n_hist:n_hist + n_forced] are symbols that must come
    first.  Undecided symbols read as the extension symbol; when a decision
    differs from it, the last K steps are recomputed from a ring of saved
    states.  Returns (n_dec, phi, J, status); status as in ``steer``.
    """
    K = int(KP[2])
    ext = int(KP[3])
    eps = P1[1]
    direction = -1 if backward else 1
    cap = buf.shape[0]
    R = K + 1
    ring_p = np.zeros(R)
    ring_j = np.zeros(R)
    s = np.zeros(max(K, 1))
    n_dec = n_hist
    # state before step at index b is stored at ring[b % R]
    ring_p[n_dec % R] = phi
    ring_j[n_dec % R] = J
    kicks = 0
    rot = 0
    phase = 0  # 0 forced, 1 action, 2 positioning
    lo = 0.0
    hi = 0.0
    have_window = False
    while True:
        # current tentative state: before step n_dec
        phi = ring_p[n_dec % R]
        J = ring_j[n_dec % R]
        if phase == 0:
            if n_dec - n_hist >= n_forced:
                phase = 1
                continue
            sym = buf[n_dec]
        elif phase == 1:
            d = J_target - J
            if abs(d) <= tol:
                phase = 2
                continue
            if not have_window:
                if kicks >= max_kicks:
                    return n_dec, phi, J, 4
                if abs(d) > eps:
                    lo, hi = 0.5, 1.0
                    if d < 0:
                        lo, hi = -1.0, -0.5
                else:
                    lo = (d - 0.5 * tol) / eps
                    hi = (d + 0.5 * tol) / eps
                have_window = True
                rot = 0
            if backward:
                sv = -math.sin(phi - t1_rotation(P1, J))
            else:
                sv = math.sin(phi)
            if lo <= sv <= hi:
                sym = 1
                have_window = False
                kicks += 1
            else:
                if rot >= max_rot:
                    return n_dec, phi, J, 3
                sym = 0
                rot += 1
        else:
            x, y = chart_from(ch, phi, J)
            if abs(x) <= box_x and abs(y) <= box_y:
                return n_dec, phi, J, 0
            if rot >= max_rot:
                return n_dec, phi, J, 3
            sym = 0
            rot += 1
        if n_dec + 1 >= cap:
            return n_dec, phi, J, 5
        buf[n_dec] = sym
        n_dec += 1
        first = n_dec - 1
        if sym != ext:
            first = max(n_hist, n_dec - 1 - K)
        # recompute steps first .. n_dec - 1 from saved states
        p = ring_p[first % R]
        q = ring_j[first % R]
        for b in range(first, n_dec):
            ring_p[b % R] = p
            ring_j[b % R] = q
            p, q, st = _buf_step(P0, P1, KP, buf, n_dec, b, p, q, direction, s)
            if st != OK:
                return n_dec, p, q, 1
        ring_p[n_dec % R] = p
        ring_j[n_dec % R] = q
