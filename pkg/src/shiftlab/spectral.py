"""Graph and spectral kernels: Perron data, cycle means, strong components.

All routines are deterministic (fixed starting vectors, fixed iteration
order) so that repeated runs produce bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NonConvergence

POWER_ITERATION_CAP = 100_000

NEG_INF = float("-inf")


def strongly_connected(adjacency: np.ndarray) -> tuple[int, np.ndarray]:
    """Labels of strongly connected components of a boolean adjacency matrix.

    Small graphs (the hot path: transfer matrices over a handful of blocks)
    use a dense transitive closure; larger ones go through scipy, whose
    sparse-matrix setup overhead only pays off past a few dozen nodes.
    """
    n = adjacency.shape[0]
    if n == 0:
        return 0, np.zeros(0, dtype=int)
    if n <= 32:
        reach = np.asarray(adjacency, dtype=bool) | np.eye(n, dtype=bool)
        while True:
            nxt = reach | (reach @ reach)
            if (nxt == reach).all():
                break
            reach = nxt
        mutual = reach & reach.T
        labels = np.full(n, -1, dtype=int)
        count = 0
        for i in range(n):
            if labels[i] < 0:
                labels[mutual[i]] = count
                count += 1
        return count, labels
    graph = csr_matrix(adjacency.astype(np.int8))
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    return n_comp, labels


def is_strongly_connected(adjacency: np.ndarray) -> bool:
    n_comp, _ = strongly_connected(adjacency)
    return n_comp == 1


def graph_period(adjacency: np.ndarray) -> int:
    """gcd of cycle lengths of a strongly connected digraph.

    Standard BFS level argument: assign dist[] from a root, then the period
    is gcd over edges (u, v) of dist[u] + 1 - dist[v].
    """
    n = adjacency.shape[0]
    dist = np.full(n, -1, dtype=int)
    dist[0] = 0
    queue = [0]
    while queue:
        u = queue.pop(0)
        for v in np.flatnonzero(adjacency[u]):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(int(v))
    g = 0
    rows, cols = np.nonzero(adjacency)
    for u, v in zip(rows, cols):
        g = math.gcd(g, int(dist[u]) + 1 - int(dist[v]))
    return abs(g)


def perron_eigendata(
    matrix: np.ndarray,
    tol: float = 1e-13,
    max_iter: int = POWER_ITERATION_CAP,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Perron value and positive right/left eigenvectors of an irreducible
    nonnegative matrix.

    Power iteration on the shifted matrix M/s + I (the shift makes any
    irreducible matrix primitive, so the iteration cannot cycle).
    Convergence is certified by the Collatz-Wielandt enclosure
    min_i (Mx)_i/x_i <= rho <= max_i (Mx)_i/x_i; the gap must fall below
    ``tol`` relative to the value.

    Raises NonConvergence when the cap is hit.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    if n == 1:
        v = np.ones(1)
        return float(m[0, 0]), v, v
    scale = float(m.max())
    if scale <= 0.0:
        raise NonConvergence("matrix has no positive entries")
    shifted = m / scale + np.eye(n)

    def _iterate(a: np.ndarray) -> tuple[float, np.ndarray]:
        x = np.ones(n)
        value = 0.0
        for _ in range(max_iter):
            y = a @ x
            ratios = y / x
            lo, hi = float(ratios.min()), float(ratios.max())
            value = 0.5 * (lo + hi)
            x = y / y.max()
            if hi - lo <= tol * max(1.0, abs(value)):
                # a few polishing sweeps for eigenvector accuracy
                for _ in range(8):
                    x = a @ x
                    x /= x.max()
                return value, x / x.sum()
        raise NonConvergence(
            f"power iteration did not converge within {max_iter} iterations"
        )

    val_r, right = _iterate(shifted)
    val_l, left = _iterate(shifted.T)
    rho = scale * (0.5 * (val_r + val_l) - 1.0)
    return rho, right, left


def spectral_radius(matrix: np.ndarray, tol: float = 1e-13) -> float:
    """Spectral radius of a nonnegative matrix via per-component Perron data.

    Works for reducible matrices: the radius is the max over strongly
    connected components (single states without self-loops contribute 0).
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    if n == 0:
        return 0.0
    n_comp, labels = strongly_connected(m > 0)
    rho = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        sub = m[np.ix_(idx, idx)]
        if len(idx) == 1 and sub[0, 0] <= 0.0:
            continue
        value, _, _ = perron_eigendata(sub, tol=tol)
        rho = max(rho, value)
    return rho


def _karp_component(adjacency: np.ndarray, weights: np.ndarray) -> float:
    """Karp's maximum cycle mean on one strongly connected component."""
    n = adjacency.shape[0]
    if n == 1:
        return float(weights[0, 0]) if adjacency[0, 0] else NEG_INF
    w = np.where(adjacency, weights, NEG_INF)
    d = np.full((n + 1, n), NEG_INF)
    d[0, 0] = 0.0
    for k in range(1, n + 1):
        prev = d[k - 1]
        reachable = prev > NEG_INF
        if not reachable.any():
            break
        cand = prev[:, None] + w
        d[k] = cand.max(axis=0)
    best = NEG_INF
    for v in range(n):
        if d[n, v] == NEG_INF:
            continue
        worst = math.inf
        for k in range(n):
            if d[k, v] == NEG_INF:
                continue
            worst = min(worst, (d[n, v] - d[k, v]) / (n - k))
        best = max(best, worst)
    return best


def max_cycle_mean(adjacency: np.ndarray, weights: np.ndarray) -> float:
    """Maximum mean of edge weights over directed cycles."""
    n_comp, labels = strongly_connected(adjacency)
    best = NEG_INF
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        sub_adj = adjacency[np.ix_(idx, idx)]
        if len(idx) == 1 and not sub_adj[0, 0]:
            continue
        best = max(best, _karp_component(sub_adj, weights[np.ix_(idx, idx)]))
    return best


def min_cycle_mean(adjacency: np.ndarray, weights: np.ndarray) -> float:
    return -max_cycle_mean(adjacency, -np.asarray(weights, dtype=float))


def extremal_mean_edges(
    adjacency: np.ndarray,
    weights: np.ndarray,
    mode: str = "max",
    tol: float = 1e-9,
) -> np.ndarray:
    """Boolean mask of edges lying on cycles of extremal mean weight.

    Reduces weights by the extremal mean (making the extremal cycle mean 0),
    computes max-plus potentials by bounded value iteration, and keeps the
    equality edges; every zero-mean cycle survives, no other cycle does.
    """
    adj = np.asarray(adjacency, dtype=bool)
    w = np.asarray(weights, dtype=float)
    if mode == "min":
        w = -w
    mstar = max_cycle_mean(adj, w)
    c = np.where(adj, w - mstar, NEG_INF)
    n = adj.shape[0]
    p = np.zeros(n)
    for _ in range(n + 1):
        p = np.maximum(p, (c + p[None, :]).max(axis=1))
    residual = p[:, None] - (c + p[None, :])
    mask = adj & (residual <= tol)
    # keep only the recurrent part of the equality subgraph
    n_comp, labels = strongly_connected(mask)
    keep = np.zeros_like(mask)
    for comp in range(n_comp):
        idx = np.flatnonzero(labels == comp)
        sub = mask[np.ix_(idx, idx)]
        if len(idx) == 1 and not sub[0, 0]:
            continue
        keep[np.ix_(idx, idx)] |= sub
    return keep


def extremal_cycle_ratio(
    adjacency: np.ndarray,
    numerator: np.ndarray,
    denominator: np.ndarray,
    mode: str = "max",
    tol: float = 1e-13,
) -> float:
    """Extremal cycle ratio sum(num)/sum(den) over directed cycles.

    Requires strictly positive denominator weights on allowed edges.
    Solved parametrically: r* is the unique root of the monotone map
    r -> extremal cycle mean of (num - r * den).
    """
    adj = np.asarray(adjacency, dtype=bool)
    num = np.asarray(numerator, dtype=float)
    den = np.asarray(denominator, dtype=float)
    if np.any(den[adj] <= 0.0):
        raise ValueError("denominator weights must be positive on allowed edges")

    lo = float(num[adj].min() / den[adj].max()) - 1.0
    hi = float(num[adj].max() / den[adj].min()) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mode == "max":
            # positive max cycle mean of num - r*den means some cycle has ratio > r
            if max_cycle_mean(adj, num - mid * den) > 0:
                lo = mid
            else:
                hi = mid
        else:
            if min_cycle_mean(adj, num - mid * den) < 0:
                hi = mid
            else:
                lo = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def simple_cycles(adjacency: np.ndarray, budget: int = 100_000) -> list[list[int]]:
    """All simple directed cycles, as vertex lists (first vertex not repeated).

    Plain DFS enumeration; intended for the small graphs this package works
    with. Raises BudgetExceeded past ``budget`` cycles.
    """
    from .errors import BudgetExceeded

    adj = np.asarray(adjacency, dtype=bool)
    n = adj.shape[0]
    out = []
    for root in range(n):
        stack = [(root, [root])]
        while stack:
            node, path = stack.pop()
            for nxt in np.flatnonzero(adj[node]):
                nxt = int(nxt)
                if nxt == root:
                    out.append(path.copy())
                    if len(out) > budget:
                        raise BudgetExceeded(
                            f"more than {budget} simple cycles"
                        )
                elif nxt > root and nxt not in path:
                    stack.append((nxt, path + [nxt]))
    return out
