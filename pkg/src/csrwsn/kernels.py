"""Hot inner loops.

Each kernel has a loop implementation (compiled with numba when available)
and a pure-numpy implementation.  ``walk_packets`` and ``gle_walk`` dispatch to
whichever is active; both produce bit-identical outputs, which the test suite
checks.  Set ``CSRWSN_DISABLE_NUMBA=1`` to force the numpy path.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, jit

__all__ = [
    "NUMBA_ENABLED",
    "walk_packets",
    "walk_packets_loop",
    "walk_packets_numpy",
    "gle_walk",
    "gle_walk_loop",
    "gle_walk_numpy",
    "admm_basis_pursuit",
]


# --------------------------------------------------------------------------
# packet forwarding with in-network aggregation


def _walk_packets_py(cand_ptr, cand_idx, sink, sources, uniforms, readings):
    m = sources.shape[0]
    width = uniforms.shape[1] + 1
    paths = np.full((m, width), -1, dtype=np.int64)
    lengths = np.zeros(m, dtype=np.int64)
    y = np.zeros(m, dtype=np.float64)
    for i in range(m):
        cur = sources[i]
        paths[i, 0] = cur
        acc = readings[cur]
        length = 1
        step = 0
        while cur != sink:
            lo = cand_ptr[cur]
            deg = cand_ptr[cur + 1] - lo
            j = int(uniforms[i, step] * deg)
            if j >= deg:
                j = deg - 1
            cur = cand_idx[lo + j]
            paths[i, length] = cur
            length += 1
            if cur != sink:
                acc = acc + readings[cur]
            step += 1
        lengths[i] = length
        y[i] = acc
    return paths, lengths, y


walk_packets_loop = jit(_walk_packets_py)


def walk_packets_numpy(cand_ptr, cand_idx, sink, sources, uniforms, readings):
    """Advance all packets one hop at a time.

    Per-packet summation order is source to sink, identical to the loop
    kernel, so ``y`` matches it bit for bit.
    """
    m = sources.shape[0]
    width = uniforms.shape[1] + 1
    paths = np.full((m, width), -1, dtype=np.int64)
    lengths = np.ones(m, dtype=np.int64)
    cur = np.asarray(sources, dtype=np.int64).copy()
    paths[:, 0] = cur
    y = np.asarray(readings, dtype=np.float64)[cur].copy()
    step = 0
    active = np.flatnonzero(cur != sink)
    while active.size:
        here = cur[active]
        lo = cand_ptr[here]
        deg = cand_ptr[here + 1] - lo
        j = np.minimum((uniforms[active, step] * deg).astype(np.int64), deg - 1)
        nxt = cand_idx[lo + j]
        paths[active, lengths[active]] = nxt
        lengths[active] += 1
        keep = nxt != sink
        y[active[keep]] += readings[nxt[keep]]
        cur[active] = nxt
        active = active[keep]
        step += 1
    return paths, lengths, y


def walk_packets(cand_ptr, cand_idx, sink, sources, uniforms, readings):
    """Route ``len(sources)`` packets to ``sink`` and aggregate readings.

    Parameters
    ----------
    cand_ptr, cand_idx : int64 arrays
        CSR layout of per-node parent candidates.
    sink : int
    sources : int64 array (M,)
    uniforms : float64 array (M, max_hops)
        Pre-drawn U[0, 1) numbers; hop ``t`` of packet ``i`` picks candidate
        ``floor(uniforms[i, t] * n_candidates)``.
    readings : float64 array (n,)
        Per-node readings; the sink entry is never read.

    Returns
    -------
    paths : int64 array (M, max_hops + 1), padded with -1
    lengths : int64 array (M,), node count of each path
    y : float64 array (M,), aggregated measurements
    """
    args = (
        np.ascontiguousarray(cand_ptr, dtype=np.int64),
        np.ascontiguousarray(cand_idx, dtype=np.int64),
        int(sink),
        np.ascontiguousarray(sources, dtype=np.int64),
        np.ascontiguousarray(uniforms, dtype=np.float64),
        np.ascontiguousarray(readings, dtype=np.float64),
    )
    if NUMBA_ENABLED:
        return walk_packets_loop(*args)
    return walk_packets_numpy(*args)


# --------------------------------------------------------------------------
# graph linear embedding walk


def _gle_walk_py(adj, first):
    n = adj.shape[0]
    deg = np.zeros(n, dtype=np.int64)
    for a in range(n):
        for b in range(n):
            if adj[a, b]:
                deg[a] += 1
    in_b = np.ones(n, dtype=np.bool_)
    in_b[first] = False
    remaining = n - 1
    stack = np.empty(n, dtype=np.int64)
    stack[0] = first
    top = 0
    walk = np.empty(2 * n, dtype=np.int64)
    walk[0] = first
    wlen = 1
    while remaining > 0:
        u = stack[top]
        best = -1
        best_score = -1.0
        for v in range(n):
            if not (adj[u, v] and in_b[v]):
                continue
            common = 0
            for w in range(n):
                if adj[u, w] and adj[v, w]:
                    common += 1
            den = deg[u] + deg[v] - common
            score = 0.0
            if den > 0:
                score = (common + 2) / den
            if score > best_score:
                best_score = score
                best = v
        if best >= 0:
            in_b[best] = False
            remaining -= 1
            top += 1
            stack[top] = best
            walk[wlen] = best
            wlen += 1
        else:
            top -= 1
            if top < 0:
                return walk[:0]
            walk[wlen] = stack[top]
            wlen += 1
    return walk[:wlen].copy()


gle_walk_loop = jit(_gle_walk_py)


def gle_walk_numpy(adj, first):
    """Vectorised candidate scoring; same tie-break (lowest id wins)."""
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]
    deg = adj.sum(axis=1).astype(np.int64)
    in_b = np.ones(n, dtype=bool)
    in_b[first] = False
    remaining = n - 1
    stack = [int(first)]
    walk = [int(first)]
    while remaining > 0:
        u = stack[-1]
        cand = np.flatnonzero(adj[u] & in_b)
        if cand.size:
            common = (adj[cand] & adj[u]).sum(axis=1)
            den = deg[u] + deg[cand] - common
            score = np.where(den > 0, (common + 2) / np.maximum(den, 1), 0.0)
            best = int(cand[np.argmax(score)])
            in_b[best] = False
            remaining -= 1
            stack.append(best)
            walk.append(best)
        else:
            stack.pop()
            if not stack:
                return np.empty(0, dtype=np.int64)
            walk.append(stack[-1])
    return np.asarray(walk, dtype=np.int64)


def gle_walk(adj, first):
    """Greedy similarity walk over a dense boolean adjacency matrix.

    Returns the visit sequence including backtracking revisits, or an empty
    array if the stack empties before every vertex is reached (disconnected).
    """
    adj = np.ascontiguousarray(adj, dtype=np.bool_)
    if NUMBA_ENABLED:
        return gle_walk_loop(adj, np.int64(first))
    return gle_walk_numpy(adj, int(first))


# --------------------------------------------------------------------------
# basis pursuit by ADMM


@jit
def admm_basis_pursuit(proj, x_ls, rho, max_iters, abstol, reltol, adapt_until=500):
    """ADMM for ``min ||s||_1 s.t. A s = y``.

    ``proj`` is the null-space projector ``I - pinv(A) A`` and ``x_ls`` the
    minimum-norm solution ``pinv(A) y``.  The x-iterate is always feasible.
    Penalty ``rho`` is adapted by residual balancing every 10 iterations up
    to ``adapt_until``, then frozen; unbounded adaptation can stall.

    Returns ``(x, z, iterations, converged)``.
    """
    k = x_ls.shape[0]
    z = x_ls.copy()
    u = np.zeros(k)
    x = x_ls.copy()
    root_k = np.sqrt(k)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        x = proj @ (z - u) + x_ls
        z_old = z
        v = x + u
        thresh = 1.0 / rho
        z = np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)
        u = u + x - z
        r_norm = np.linalg.norm(x - z)
        s_norm = rho * np.linalg.norm(z - z_old)
        eps_pri = root_k * abstol + reltol * max(np.linalg.norm(x), np.linalg.norm(z))
        eps_dual = root_k * abstol + reltol * rho * np.linalg.norm(u)
        if r_norm < eps_pri and s_norm < eps_dual:
            converged = True
            break
        if it > adapt_until or it % 10 != 0:
            continue
        if r_norm > 10.0 * s_norm:
            rho *= 2.0
            u = u / 2.0
        elif s_norm > 10.0 * r_norm:
            rho /= 2.0
            u = u * 2.0
    return x, z, it, converged
