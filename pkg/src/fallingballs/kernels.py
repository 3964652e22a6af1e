"""Hot loops: event scheduling, free flight, collision resolution, tangent frames.

All kernels take float64 numpy arrays and report failures through integer
status codes, because exceptions do not cross the numba boundary cleanly.
Collision labels are integers: ``0`` is the floor, ``i >= 1`` is the ball pair
``(i, i+1)`` (1-based), i.e. array slots ``i-1`` and ``i``.
"""
import math

import numpy as np

from ._accel import njit

OK = 0
NO_EVENT = 1
SINGULAR = 2
GRAZING = 3
ORDER = 4
ACCUMULATION = 5
DEGENERATE = 6

STATUS_NAMES = {
    OK: "ok",
    NO_EVENT: "no-event",
    SINGULAR: "singularity",
    GRAZING: "grazing",
    ORDER: "order-violation",
    ACCUMULATION: "accumulation",
    DEGENERATE: "degenerate-frame",
}


@njit
def floor_time(q1, v1):
    """Positive root of q1 + v1*t - t**2/2 = 0, cancellation-free."""
    if q1 < 0.0:
        q1 = 0.0
    disc = math.sqrt(v1 * v1 + 2.0 * q1)
    if v1 >= 0.0:
        return v1 + disc
    return 2.0 * q1 / (disc - v1)


@njit
def next_event(q, v, eps_sing):
    """Return (dt, label, status) for the earliest collision."""
    n = q.shape[0]
    best = floor_time(q[0], v[0])
    label = 0
    second = np.inf
    for i in range(n - 1):
        w = v[i] - v[i + 1]
        if w > 0.0:
            gap = q[i + 1] - q[i]
            if gap < 0.0:
                gap = 0.0
            dt = gap / w
            if dt < best:
                second = best
                best = dt
                label = i + 1
            elif dt < second:
                second = dt
    if not np.isfinite(best):
        return best, label, NO_EVENT
    if second - best < eps_sing * max(1.0, best):
        return best, label, SINGULAR
    return best, label, OK


@njit
def advance(q, v, dt):
    for i in range(q.shape[0]):
        q[i] = q[i] + v[i] * dt - 0.5 * dt * dt
        v[i] = v[i] - dt


@njit
def ordered(q, eps_ord):
    if q[0] < -eps_ord:
        return False
    for i in range(q.shape[0] - 1):
        if q[i + 1] - q[i] < -eps_ord:
            return False
    return True


@njit
def collide(q, v, m, label, eps_graze):
    """Resolve the collision in place; return (rho, status)."""
    if label == 0:
        if -v[0] < eps_graze:
            return -v[0], GRAZING
        v[0] = -v[0]
        q[0] = 0.0
        return v[0], OK
    i = label - 1
    w = v[i] - v[i + 1]
    if w < eps_graze:
        return w, GRAZING
    g = (m[i] - m[i + 1]) / (m[i] + m[i + 1])
    a = v[i]
    b = v[i + 1]
    v[i] = g * a + (1.0 - g) * b
    v[i + 1] = (1.0 + g) * a - g * b
    mid = 0.5 * (q[i] + q[i + 1])
    q[i] = mid
    q[i + 1] = mid
    return w, OK


@njit
def energy(q, v, m):
    h = 0.0
    for i in range(q.shape[0]):
        h += m[i] * q[i] + 0.5 * m[i] * v[i] * v[i]
    return h


@njit
def renormalize(q, v, m):
    """Rescale velocities so that H = 1; return the applied factor."""
    pot = 0.0
    kin = 0.0
    for i in range(q.shape[0]):
        pot += m[i] * q[i]
        kin += 0.5 * m[i] * v[i] * v[i]
    if kin <= 0.0 or pot >= 1.0:
        return 1.0
    s = math.sqrt((1.0 - pot) / kin)
    for i in range(q.shape[0]):
        v[i] *= s
    return s


@njit
def run_events(q, v, m, t0, max_events, max_time, eps_sing, eps_graze, eps_ord,
               acc_count, acc_window, renorm_every, record):
    """Event loop. Mutates q, v. Stops after max_events or at t0 + max_time.

    Returns (t, done, status, log_t, log_label, log_rho, log_h, states, factors);
    ``states`` rows hold (q, v) after each event when ``record`` is set.
    """
    n = q.shape[0]
    cap = max_events if max_events < 10_000_000 else 10_000_000
    log_t = np.empty(cap)
    log_label = np.empty(cap, dtype=np.int64)
    log_rho = np.empty(cap)
    log_h = np.empty(cap)
    if record:
        states = np.empty((cap, 2 * n))
    else:
        states = np.empty((0, 2 * n))
    n_fac = 0
    if renorm_every > 0:
        n_fac = cap // renorm_every + 1
    factors = np.empty(n_fac)
    ring = np.empty(max(acc_count, 1))
    t = t0
    t_end = t0 + max_time
    done = 0
    nf = 0
    status = OK
    while done < max_events:
        if done >= cap:
            # grow logs
            new_cap = 2 * cap
            log_t = _grow(log_t, new_cap)
            log_rho = _grow(log_rho, new_cap)
            log_h = _grow(log_h, new_cap)
            lab2 = np.empty(new_cap, dtype=np.int64)
            lab2[:cap] = log_label[:cap]
            log_label = lab2
            if record:
                st2 = np.empty((new_cap, 2 * n))
                st2[:cap] = states[:cap]
                states = st2
            cap = new_cap
        dt, label, st = next_event(q, v, eps_sing)
        if st == NO_EVENT:
            status = st
            break
        if t + dt > t_end:
            advance(q, v, t_end - t)
            t = t_end
            break
        if st != OK:
            status = st
            break
        advance(q, v, dt)
        t += dt
        if not ordered(q, eps_ord):
            status = ORDER
            break
        rho, st = collide(q, v, m, label, eps_graze)
        if st != OK:
            status = st
            break
        log_t[done] = t
        log_label[done] = label
        log_rho[done] = rho
        if record:
            for j in range(n):
                states[done, j] = q[j]
                states[done, n + j] = v[j]
        done += 1
        if renorm_every > 0 and done % renorm_every == 0:
            if nf >= factors.shape[0]:
                factors = _grow(factors, 2 * factors.shape[0] + 1)
            factors[nf] = renormalize(q, v, m)
            nf += 1
        log_h[done - 1] = energy(q, v, m)
        if acc_count > 0:
            slot = done % acc_count
            if done > acc_count and t - ring[slot] < acc_window:
                status = ACCUMULATION
                break
            ring[slot] = t
    return (t, done, status, log_t[:done], log_label[:done], log_rho[:done],
            log_h[:done], states[:done] if record else states, factors[:nf])


@njit
def _grow(a, new_cap):
    b = np.empty(new_cap)
    b[:a.shape[0]] = a
    return b


@njit
def apply_ball(frame, j, g, alpha):
    """Ball-pair derivative on every column of a (2n, k) frame; j is the 0-based lower slot."""
    n = frame.shape[0] // 2
    for c in range(frame.shape[1]):
        hi = frame[j, c]
        hk = frame[j + 1, c]
        vi = frame[n + j, c]
        vk = frame[n + j + 1, c]
        s = alpha * (vi - vk)
        hi = hi + s
        hk = hk - s
        frame[j, c] = g * hi + (1.0 + g) * hk
        frame[j + 1, c] = (1.0 - g) * hi - g * hk
        frame[n + j, c] = g * vi + (1.0 - g) * vk
        frame[n + j + 1, c] = (1.0 + g) * vi - g * vk


@njit
def apply_floor(frame, shear):
    n = frame.shape[0] // 2
    for c in range(frame.shape[1]):
        frame[n, c] += shear * frame[0, c]


@njit
def gram_schmidt(frame, logs):
    """Modified Gram-Schmidt in place with one re-orthogonalisation pass.

    Adds log column norms to ``logs``; returns False on a degenerate frame.
    """
    d, k = frame.shape
    for c in range(k):
        for _ in range(2):
            for p in range(c):
                dot = 0.0
                for r in range(d):
                    dot += frame[r, p] * frame[r, c]
                for r in range(d):
                    frame[r, c] -= dot * frame[r, p]
        nrm = 0.0
        for r in range(d):
            nrm += frame[r, c] * frame[r, c]
        nrm = math.sqrt(nrm)
        if nrm == 0.0 or not np.isfinite(nrm):
            return False
        logs[c] += math.log(nrm)
        for r in range(d):
            frame[r, c] /= nrm
    return True


@njit
def lyapunov_run(q, v, m, frame, n_events, renorm_every, n_blocks,
                 eps_sing, eps_graze, eps_ord):
    """Propagate the trajectory and a tangent frame through n_events collisions.

    Returns (status, done, t_total, logs, block_logs, block_times, renorms).
    ``block_logs[b]`` / ``block_times[b]`` are cumulative at the end of block b.
    """
    n = q.shape[0]
    k = frame.shape[1]
    logs = np.zeros(k)
    block_logs = np.zeros((n_blocks, k))
    block_times = np.zeros(n_blocks)
    block_len = max(n_events // n_blocks, 1)
    gam = np.empty(n - 1)
    alp = np.empty(n - 1)
    for i in range(n - 1):
        s = m[i] + m[i + 1]
        gam[i] = (m[i] - m[i + 1]) / s
        alp[i] = 2.0 * m[i] * m[i + 1] * (m[i] - m[i + 1]) / (s * s)
    t = 0.0
    done = 0
    renorms = 0
    b = 0
    status = OK
    while done < n_events:
        dt, label, st = next_event(q, v, eps_sing)
        if st != OK:
            status = st
            break
        advance(q, v, dt)
        t += dt
        if not ordered(q, eps_ord):
            status = ORDER
            break
        rho, st = collide(q, v, m, label, eps_graze)
        if st != OK:
            status = st
            break
        if label == 0:
            apply_floor(frame, 2.0 / (m[0] * rho))
        else:
            apply_ball(frame, label - 1, gam[label - 1], alp[label - 1] * rho)
        done += 1
        end_block = done % block_len == 0
        if done % renorm_every == 0 or end_block or done == n_events:
            if not gram_schmidt(frame, logs):
                status = DEGENERATE
                break
            renorms += 1
        if end_block and b < n_blocks:
            block_logs[b] = logs
            block_times[b] = t
            b += 1
    return status, done, t, logs, block_logs[:b], block_times[:b], renorms
