"""Hot numeric kernels.

Everything here is written in the numba-compatible subset of numpy so the
same source runs compiled (default) or interpreted (``CTBN_GIBBS_DISABLE_JIT=1``).
Arrays only; the object-level API lives in the other modules.

Packed model layout (see ``model.ModelPack``)::

    cim entry (j, u, a, b) -> cim_flat[cim_off[j] + (u * d_j + a) * d_j + b]
    parents of i           -> par_idx[par_ptr[i]:par_ptr[i+1]], strides alongside
    children of i          -> ch_idx[ch_ptr[i]:ch_ptr[i+1]], ch_stride = stride of i
                              inside the child's parent configuration index
    Markov blanket of i    -> mb_idx[mb_ptr[i]:mb_ptr[i+1]]

Packed joint trajectory::

    transitions of j -> tr_times/tr_states[tr_ptr[j]:tr_ptr[j+1]]  (new states)
    state at start   -> init[j]
"""
import numpy as np

from ._jit import njit

# Higham (2005) thresholds for Pade orders 3, 5, 7, 9, 13.
THETA_3 = 1.495585217958292e-2
THETA_5 = 2.539398330063230e-1
THETA_7 = 9.504178996162932e-1
THETA_9 = 2.097847961257068e0
THETA_13 = 5.371920351148152e0

# Bisection levels below this are exponentiated directly; deeper levels come
# from squaring exp(2^-L dt R), whose error stays below ~2^(L-DIRECT) eps.
DIRECT_LEVELS = 20

STATUS_OK = 0
STATUS_ZERO_START = 1
STATUS_ZERO_JUMP = 2


@njit
def one_norm(A):
    n = A.shape[0]
    best = 0.0
    for j in range(n):
        s = 0.0
        for i in range(n):
            s += abs(A[i, j])
        if s > best:
            best = s
    return best


@njit
def _pade_coefficients(m):
    if m == 3:
        return np.array([120.0, 60.0, 12.0, 1.0])
    if m == 5:
        return np.array([30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0])
    if m == 7:
        return np.array([17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0,
                         1512.0, 56.0, 1.0])
    if m == 9:
        return np.array([17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                         30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0])
    return np.array([64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                     1187353796428800.0, 129060195264000.0, 10559470521600.0,
                     670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
                     960960.0, 16380.0, 182.0, 1.0])


@njit
def _pade_low(A, m):
    n = A.shape[0]
    b = _pade_coefficients(m)
    ident = np.eye(n)
    A2 = A @ A
    U = b[1] * ident
    V = b[0] * ident
    P = ident.copy()
    for k in range(1, m // 2 + 1):
        P = P @ A2
        U = U + b[2 * k + 1] * P
        V = V + b[2 * k] * P
    U = A @ U
    return np.ascontiguousarray(np.linalg.solve(V - U, V + U))


@njit
def _pade_13(A):
    n = A.shape[0]
    b = _pade_coefficients(13)
    ident = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return np.ascontiguousarray(np.linalg.solve(V - U, V + U))


@njit
def expm(A):
    """exp(A) by scaling and squaring with a Pade approximant."""
    A = np.ascontiguousarray(A).astype(np.float64)
    nrm = one_norm(A)
    if nrm <= THETA_3:
        return _pade_low(A, 3)
    if nrm <= THETA_5:
        return _pade_low(A, 5)
    if nrm <= THETA_7:
        return _pade_low(A, 7)
    if nrm <= THETA_9:
        return _pade_low(A, 9)
    s = 0
    if nrm > THETA_13:
        s = int(np.ceil(np.log2(nrm / THETA_13)))
    X = _pade_13(A / (2.0 ** s))
    for _ in range(s):
        X = X @ X
    return X


@njit
def propagator(R, dt):
    """exp(dt * R) with roundoff negatives clamped to zero."""
    S = expm(dt * R)
    n = S.shape[0]
    for i in range(n):
        for j in range(n):
            if S[i, j] < 0.0:
                S[i, j] = 0.0
    return S


@njit
def safe_log(x):
    if x > 0.0:
        return np.log(x)
    return -np.inf


@njit
def segment_index(bounds, t):
    """Segment k with bounds[k] <= t < bounds[k+1]; the last segment is closed."""
    nseg = bounds.shape[0] - 1
    k = np.searchsorted(bounds, t, side="right") - 1
    if k < 0:
        k = 0
    if k > nseg - 1:
        k = nseg - 1
    return k


# ---------------------------------------------------------------------------
# backward pass and CDF of the first transition time


@njit
def backward_messages(bounds, R, scal, terminal):
    """Right-to-left likelihood messages over a segment timeline.

    Returns ``(vecs, logs, start_vec, start_log)`` where ``vecs[k]`` is the
    max-normalised future likelihood at the right end of segment ``k`` (child
    scaler of the following boundary already applied) and ``logs[k]`` its log
    scale. ``start_log`` is ``-inf`` when the evidence has zero likelihood.
    """
    nseg = R.shape[0]
    d = R.shape[1]
    vecs = np.zeros((nseg, d))
    logs = np.full(nseg, -np.inf)
    v = terminal.astype(np.float64).copy()
    m = v.max()
    if not m > 0.0:
        return vecs, logs, np.zeros(d), -np.inf
    v = v / m
    ls = np.log(m)
    for k in range(nseg - 1, -1, -1):
        vecs[k, :] = v
        logs[k] = ls
        S = propagator(R[k], bounds[k + 1] - bounds[k])
        v = S @ v
        if k > 0:
            v = v * scal[k - 1]
        m = v.max()
        if not m > 0.0:
            for kk in range(k):
                vecs[kk, :] = 0.0
                logs[kk] = -np.inf
            return vecs, logs, np.zeros(d), -np.inf
        v = v / m
        ls += np.log(m)
    return vecs, logs, v, ls


@njit
def log_future(x, t, bounds, R, vecs, logs):
    """log of the future likelihood of state x at time t (right limit)."""
    k = segment_index(bounds, t)
    dt = bounds[k + 1] - t
    if dt < 0.0:
        dt = 0.0
    fut = propagator(R[k], dt) @ vecs[k]
    return safe_log(fut[x]) + logs[k]


@njit
def log_past(x0, t_from, t, bounds, R, scal):
    """log-probability weight of staying in x0 on (t_from, t] given the blanket."""
    k0 = segment_index(bounds, t_from)
    k1 = segment_index(bounds, t)
    if k1 == k0:
        return R[k0, x0, x0] * (t - t_from)
    lp = R[k0, x0, x0] * (bounds[k0 + 1] - t_from)
    for k in range(k0 + 1, k1 + 1):
        lp += safe_log(scal[k - 1, x0])
        end = bounds[k + 1]
        if t < end:
            end = t
        lp += R[k, x0, x0] * (end - bounds[k])
    return lp


@njit
def cdf_value(x0, t_from, t, bounds, R, scal, vecs, logs):
    """F(t): probability of leaving x0 in (t_from, t], evaluated directly."""
    if t <= t_from:
        return 0.0
    lf0 = log_future(x0, t_from, bounds, R, vecs, logs)
    lz = log_past(x0, t_from, t, bounds, R, scal) + log_future(x0, t, bounds, R, vecs, logs) - lf0
    F = -np.expm1(lz)
    if F < 0.0:
        return 0.0
    if F > 1.0:
        return 1.0
    return F


@njit
def _ensure_levels(k, bounds, R, levels, ready, L):
    if ready[k]:
        return
    delta = bounds[k + 1] - bounds[k]
    ld = L if L < DIRECT_LEVELS else DIRECT_LEVELS
    for l in range(1, ld + 1):
        levels[k, l] = propagator(R[k], delta * 2.0 ** (-l))
    if L > ld:
        P = propagator(R[k], delta * 2.0 ** (-L))
        levels[k, L] = P
        for l in range(L - 1, ld, -1):
            P = P @ P
            levels[k, l] = P
    ready[k] = True


@njit
def find_transition(xi, x0, t_from, k_from, logfut_from, bounds, R, scal, vecs, logs,
                     levels, ready, L, out_fut):
    """Solve F(tau) = xi by a forward scan over segments then L-step bisection.

    Returns ``(tau, k, log_scale)``; ``tau < 0`` means F(window end) < xi.
    On success ``out_fut * exp(log_scale)`` is the future likelihood at tau.
    """
    nseg = R.shape[0]
    lp = 0.0
    start = t_from
    for k in range(k_from, nseg):
        rkk = R[k, x0, x0]
        seg_end = bounds[k + 1]
        lp_end = lp + rkk * (seg_end - start)
        F_end = -np.expm1(lp_end + safe_log(vecs[k, x0]) + logs[k] - logfut_from)
        if F_end >= xi:
            _ensure_levels(k, bounds, R, levels, ready, L)
            delta = seg_end - bounds[k]
            hi = seg_end
            fut = vecs[k].copy()
            lsh = logs[k]
            for l in range(1, L + 1):
                mid = hi - delta * 2.0 ** (-l)
                if mid <= start:
                    continue
                fm = levels[k, l] @ fut
                Fm = -np.expm1(lp + rkk * (mid - start) + safe_log(fm[x0]) + lsh - logfut_from)
                if Fm >= xi:
                    hi = mid
                    mx = fm.max()
                    fut = fm / mx
                    lsh += np.log(mx)
            out_fut[:] = fut
            return hi, k, lsh
        if k < nseg - 1:
            lp = lp_end + safe_log(scal[k, x0])
            start = seg_end
    return -1.0, nseg - 1, 0.0


@njit
def next_state_weights(x0, Rk, fut):
    d = fut.shape[0]
    w = np.empty(d)
    for x in range(d):
        if x == x0:
            w[x] = 0.0
        else:
            v = Rk[x0, x] * fut[x]
            w[x] = v if v > 0.0 else 0.0
    return w


@njit
def draw_categorical(w, u):
    """Index chosen by inverse CDF at u * sum(w); assumes sum(w) > 0."""
    target = u * w.sum()
    acc = 0.0
    last = 0
    for x in range(w.shape[0]):
        if w[x] > 0.0:
            last = x
            acc += w[x]
            if target < acc:
                return x
    return last


@njit
def _grow(arr, n):
    out = np.empty(2 * arr.shape[0] + 1, arr.dtype)
    out[:n] = arr[:n]
    return out


@njit
def sample_window(bounds, R, scal, terminal, x_start, init_w, rng, L):
    """Backward pass then forward sampling of one component on one window.

    Returns ``(first_state, times, states, status)``. ``x_start < 0`` draws
    the first state from ``init_w`` weighted by the start message.
    """
    nseg = R.shape[0]
    d = R.shape[1]
    empty_t = np.empty(0)
    empty_s = np.empty(0, np.int64)
    vecs, logs, m0, lm0 = backward_messages(bounds, R, scal, terminal)
    if not lm0 > -np.inf:
        return -1, empty_t, empty_s, STATUS_ZERO_START
    if x_start < 0:
        w = init_w * m0
        if not w.sum() > 0.0:
            return -1, empty_t, empty_s, STATUS_ZERO_START
        x0 = draw_categorical(w, rng.random())
    else:
        x0 = x_start
        if not m0[x0] > 0.0:
            return -1, empty_t, empty_s, STATUS_ZERO_START
    first = x0
    logfut_from = np.log(m0[x0]) + lm0
    times = np.empty(8)
    states = np.empty(8, np.int64)
    n = 0
    levels = np.empty((nseg, L + 1, d, d))
    ready = np.zeros(nseg, np.bool_)
    fut = np.empty(d)
    t_from = bounds[0]
    k_from = 0
    redraws = 0
    while True:
        xi = rng.random()
        if xi <= 0.0:
            continue
        tau, k, lsh = find_transition(xi, x0, t_from, k_from, logfut_from, bounds, R, scal,
                                      vecs, logs, levels, ready, L, fut)
        if tau < 0.0:
            break
        tol = 1e-15 * max(1.0, abs(tau))
        if (bounds[k + 1] - tau <= tol or tau - bounds[k] <= tol) and redraws < 1000:
            redraws += 1
            continue
        redraws = 0
        w = next_state_weights(x0, R[k], fut)
        if not w.sum() > 0.0:
            return first, times[:n].copy(), states[:n].copy(), STATUS_ZERO_JUMP
        x = draw_categorical(w, rng.random())
        if n == times.shape[0]:
            times = _grow(times, n)
            states = _grow(states, n)
        times[n] = tau
        states[n] = x
        n += 1
        logfut_from = np.log(fut[x]) + lsh
        x0 = x
        t_from = tau
        k_from = k
    return first, times[:n].copy(), states[:n].copy(), STATUS_OK


# ---------------------------------------------------------------------------
# packed model / trajectory helpers


@njit
def cim_entry(cim_flat, cim_off, sizes, j, u, a, b):
    d = sizes[j]
    return cim_flat[cim_off[j] + (u * d + a) * d + b]


@njit
def state_at(j, t, tr_ptr, tr_times, tr_states, init):
    lo = tr_ptr[j]
    hi = tr_ptr[j + 1]
    idx = np.searchsorted(tr_times[lo:hi], t, side="right")
    if idx == 0:
        return init[j]
    return tr_states[lo + idx - 1]


@njit
def parent_config(i, cur, par_ptr, par_idx, par_stride):
    u = 0
    for q in range(par_ptr[i], par_ptr[i + 1]):
        u += cur[par_idx[q]] * par_stride[q]
    return u


@njit
def _config_without(j, skip, cur, par_ptr, par_idx, par_stride):
    u = 0
    for q in range(par_ptr[j], par_ptr[j + 1]):
        p = par_idx[q]
        if p != skip:
            u += cur[p] * par_stride[q]
    return u


@njit
def fill_reduced(i, cur, out, sizes, cim_off, cim_flat, par_ptr, par_idx, par_stride,
                 ch_ptr, ch_idx, ch_stride):
    """Reduced rate matrix of component i for the blanket state held in cur."""
    d = sizes[i]
    u = parent_config(i, cur, par_ptr, par_idx, par_stride)
    base = cim_off[i] + u * d * d
    for a in range(d):
        for b in range(d):
            out[a, b] = cim_flat[base + a * d + b]
    for q in range(ch_ptr[i], ch_ptr[i + 1]):
        j = ch_idx[q]
        stride = ch_stride[q]
        uj = _config_without(j, i, cur, par_ptr, par_idx, par_stride)
        xj = cur[j]
        for a in range(d):
            out[a, a] += cim_entry(cim_flat, cim_off, sizes, j, uj + a * stride, xj, xj)


@njit
def child_scaler(i, q, frm, to, cur, out, sizes, cim_off, cim_flat, par_ptr, par_idx,
                 par_stride, ch_idx, ch_stride):
    """Multiply out[a] by the rate of child ch_idx[q] jumping frm->to when X_i = a."""
    j = ch_idx[q]
    stride = ch_stride[q]
    uj = _config_without(j, i, cur, par_ptr, par_idx, par_stride)
    for a in range(sizes[i]):
        out[a] *= cim_entry(cim_flat, cim_off, sizes, j, uj + a * stride, frm, to)


@njit
def build_timeline(i, s0, s1, sizes, cim_off, cim_flat, par_ptr, par_idx, par_stride,
                   ch_ptr, ch_idx, ch_stride, mb_ptr, mb_idx,
                   tr_ptr, tr_times, tr_states, init):
    """Segments of [s0, s1] cut at Markov-blanket transitions.

    Returns ``(bounds, R, scal, seg_states, bnd_comp)``: boundaries, reduced
    matrices per segment, child scalers per interior boundary (ones for
    non-child transitions), full state vector per segment (only blanket
    entries meaningful) and the first component transitioning at each boundary.
    """
    M = sizes.shape[0]
    d = sizes[i]
    cur = np.empty(M, np.int64)
    for j in range(M):
        cur[j] = state_at(j, s0, tr_ptr, tr_times, tr_states, init)
    cnt = 0
    for q in range(mb_ptr[i], mb_ptr[i + 1]):
        b = mb_idx[q]
        for e in range(tr_ptr[b], tr_ptr[b + 1]):
            t = tr_times[e]
            if s0 < t < s1:
                cnt += 1
    ev_t = np.empty(cnt)
    ev_c = np.empty(cnt, np.int64)
    ev_to = np.empty(cnt, np.int64)
    p = 0
    for q in range(mb_ptr[i], mb_ptr[i + 1]):
        b = mb_idx[q]
        for e in range(tr_ptr[b], tr_ptr[b + 1]):
            t = tr_times[e]
            if s0 < t < s1:
                ev_t[p] = t
                ev_c[p] = b
                ev_to[p] = tr_states[e]
                p += 1
    order = np.argsort(ev_t, kind="mergesort")
    nb = 0
    for r in range(cnt):
        if r == 0 or ev_t[order[r]] != ev_t[order[r - 1]]:
            nb += 1
    bounds = np.empty(nb + 2)
    R = np.empty((nb + 1, d, d))
    scal = np.ones((nb, d))
    seg_states = np.empty((nb + 1, M), np.int64)
    bnd_comp = np.empty(nb, np.int64)
    bounds[0] = s0
    bounds[nb + 1] = s1
    fill_reduced(i, cur, R[0], sizes, cim_off, cim_flat, par_ptr, par_idx, par_stride,
                 ch_ptr, ch_idx, ch_stride)
    seg_states[0, :] = cur
    k = 0
    p = 0
    while p < cnt:
        t = ev_t[order[p]]
        q_end = p
        while q_end < cnt and ev_t[order[q_end]] == t:
            q_end += 1
        k += 1
        bounds[k] = t
        bnd_comp[k - 1] = ev_c[order[p]]
        for r in range(p, q_end):
            e = order[r]
            c = ev_c[e]
            for q in range(ch_ptr[i], ch_ptr[i + 1]):
                if ch_idx[q] == c:
                    child_scaler(i, q, cur[c], ev_to[e], cur, scal[k - 1], sizes, cim_off,
                                 cim_flat, par_ptr, par_idx, par_stride, ch_idx, ch_stride)
        for r in range(p, q_end):
            e = order[r]
            cur[ev_c[e]] = ev_to[e]
        fill_reduced(i, cur, R[k], sizes, cim_off, cim_flat, par_ptr, par_idx, par_stride,
                     ch_ptr, ch_idx, ch_stride)
        seg_states[k, :] = cur
        p = q_end
    return bounds, R, scal, seg_states, bnd_comp


@njit
def resample_window(i, s0, s1, x_start, x_end, init_w, rng, L,
                    sizes, cim_off, cim_flat, par_ptr, par_idx, par_stride,
                    ch_ptr, ch_idx, ch_stride, mb_ptr, mb_idx,
                    tr_ptr, tr_times, tr_states, init):
    """Timeline construction and window sampling in one call."""
    bounds, R, scal, _, _ = build_timeline(i, s0, s1, sizes, cim_off, cim_flat, par_ptr,
                                           par_idx, par_stride, ch_ptr, ch_idx, ch_stride,
                                           mb_ptr, mb_idx, tr_ptr, tr_times, tr_states, init)
    d = sizes[i]
    if x_end >= 0:
        terminal = np.zeros(d)
        terminal[x_end] = 1.0
    else:
        terminal = np.ones(d)
    return sample_window(bounds, R, scal, terminal, x_start, init_w, rng, L)


@njit
def accumulate(T, sizes, res_off, tr_off, par_ptr, par_idx, par_stride,
               tr_ptr, tr_times, tr_states, init, t0=0.0):
    """Realised residence times and transition counts, flat per component."""
    M = sizes.shape[0]
    res = np.zeros(res_off[M])
    trn = np.zeros(tr_off[M])
    cur = np.empty(M, np.int64)
    for i in range(M):
        d = sizes[i]
        for j in range(M):
            cur[j] = init[j]
        cnt = tr_ptr[i + 1] - tr_ptr[i]
        for q in range(par_ptr[i], par_ptr[i + 1]):
            p = par_idx[q]
            cnt += tr_ptr[p + 1] - tr_ptr[p]
        ev_t = np.empty(cnt)
        ev_c = np.empty(cnt, np.int64)
        ev_to = np.empty(cnt, np.int64)
        n = 0
        # own transitions first so ties keep the parents' left limit
        for e in range(tr_ptr[i], tr_ptr[i + 1]):
            ev_t[n] = tr_times[e]
            ev_c[n] = i
            ev_to[n] = tr_states[e]
            n += 1
        for q in range(par_ptr[i], par_ptr[i + 1]):
            p = par_idx[q]
            for e in range(tr_ptr[p], tr_ptr[p + 1]):
                ev_t[n] = tr_times[e]
                ev_c[n] = p
                ev_to[n] = tr_states[e]
                n += 1
        order = np.argsort(ev_t, kind="mergesort")
        t_prev = t0
        for r in range(cnt):
            e = order[r]
            t = ev_t[e]
            u = parent_config(i, cur, par_ptr, par_idx, par_stride)
            res[res_off[i] + u * d + cur[i]] += t - t_prev
            if ev_c[e] == i:
                trn[tr_off[i] + (u * d + cur[i]) * d + ev_to[e]] += 1.0
            cur[ev_c[e]] = ev_to[e]
            t_prev = t
        u = parent_config(i, cur, par_ptr, par_idx, par_stride)
        res[res_off[i] + u * d + cur[i]] += T - t_prev
    return res, trn


# ---------------------------------------------------------------------------
# h-coarsened chain under state masks


@njit
def masked_forward(P, p0, masks, mask_ids):
    """Log-probability that the discrete chain satisfies the mask at every step.

    Returns ``(log_prob, final_filtered_distribution)``.
    """
    p = p0 * masks[mask_ids[0]]
    s = p.sum()
    if not s > 0.0:
        return -np.inf, p
    p = p / s
    logz = np.log(s)
    for n in range(1, mask_ids.shape[0]):
        p = (p @ P) * masks[mask_ids[n]]
        s = p.sum()
        if not s > 0.0:
            return -np.inf, p
        p = p / s
        logz += np.log(s)
    return logz, p


@njit
def masked_backward(P, terminal, masks, mask_ids):
    """Backward likelihood vector at step 0 (max-normalised) and its log scale."""
    N = mask_ids.shape[0] - 1
    v = terminal * masks[mask_ids[N]]
    m = v.max()
    if not m > 0.0:
        return v, -np.inf
    v = v / m
    ls = np.log(m)
    for n in range(N - 1, -1, -1):
        v = (P @ v) * masks[mask_ids[n]]
        m = v.max()
        if not m > 0.0:
            return v, -np.inf
        v = v / m
        ls += np.log(m)
    return v, ls
