"""Independent brute-force oracles. These deliberately avoid the library's
own code paths: dense linear algebra, explicit pair loops, scalar math."""

from __future__ import annotations

import math

import numpy as np


def neighbor_set_degree(pairs, n_nodes):
    """Distinct-neighbor counts via python sets, both directions."""
    nbrs = {u: set() for u in range(n_nodes)}
    for u, v in pairs:
        nbrs[int(u)].add(int(v))
        nbrs[int(v)].add(int(u))
    denom = max(n_nodes - 1, 1)
    return np.array([len(nbrs[u]) / denom for u in range(n_nodes)])


def dense_eigenvector(adj):
    """Dominant eigenvector of a symmetric adjacency by full eigendecomposition."""
    vals, vecs = np.linalg.eigh(adj)
    vec = vecs[:, np.argmax(vals)]
    if vec.sum() < 0:
        vec = -vec
    return vec / np.linalg.norm(vec)


def dense_pagerank(adj, damping):
    """Solve (I - d*M) x = (1-d)/n * 1 with dangling mass spread uniformly."""
    n = adj.shape[0]
    out_deg = adj.sum(axis=1)
    m = np.zeros((n, n))
    for u in range(n):
        if out_deg[u] == 0:
            m[:, u] = 1.0 / n
        else:
            m[:, u] = adj[u] / out_deg[u]
    return np.linalg.solve(np.eye(n) - damping * m, np.full(n, (1.0 - damping) / n))


def brute_auc(pos, neg):
    """Quadratic pair count; ties worth one half."""
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_ap(pos, neg):
    """Naive threshold loop over the descending unique scores."""
    scores = list(pos) + list(neg)
    labels = [1] * len(pos) + [0] * len(neg)
    out = 0.0
    prev_recall = 0.0
    for threshold in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if y == 1 and s >= threshold)
        fp = sum(1 for s, y in zip(scores, labels) if y == 0 and s >= threshold)
        recall = tp / len(pos)
        precision = tp / (tp + fp)
        out += (recall - prev_recall) * precision
        prev_recall = recall
    return out


def cosine(a, b):
    na, nb = math.sqrt(sum(x * x for x in a)), math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def brute_contrastive_from_sims(s_uv, s_uu, s_vv, tau):
    """Mean over the 2n anchors of -log(P / (P + inter + intra))."""
    n = len(s_uv)
    total = 0.0
    for i in range(n):
        p = math.exp(s_uv[i][i] / tau)
        inter = sum(math.exp(s_uv[i][k] / tau) for k in range(n) if k != i)
        intra = sum(math.exp(s_uu[i][k] / tau) for k in range(n) if k != i)
        total += -math.log(p / (p + inter + intra))
    for i in range(n):
        p = math.exp(s_uv[i][i] / tau)
        inter = sum(math.exp(s_uv[k][i] / tau) for k in range(n) if k != i)
        intra = sum(math.exp(s_vv[i][k] / tau) for k in range(n) if k != i)
        total += -math.log(p / (p + inter + intra))
    return total / (2 * n)


def brute_contrastive(u_rows, v_rows, tau):
    """Quadratic double loop over projected embeddings with cosine similarity."""
    n = len(u_rows)
    s_uv = [[cosine(u_rows[i], v_rows[k]) for k in range(n)] for i in range(n)]
    s_uu = [[cosine(u_rows[i], u_rows[k]) for k in range(n)] for i in range(n)]
    s_vv = [[cosine(v_rows[i], v_rows[k]) for k in range(n)] for i in range(n)]
    return brute_contrastive_from_sims(s_uv, s_uu, s_vv, tau)


def scalar_gru(x, h, w_ih, w_hh, b_ih, b_hh):
    """Step-by-step scalar GRU with sigmoid gates and tanh candidate.

    Gate layout matches the r/z/n row chunking of the stacked weights.
    """
    hidden = len(h)

    def sigmoid(v):
        return 1.0 / (1.0 + math.exp(-v))

    def affine(w, b, vec, row):
        return b[row] + sum(w[row][j] * vec[j] for j in range(len(vec)))

    out = []
    for i in range(hidden):
        r = sigmoid(affine(w_ih, b_ih, x, i) + affine(w_hh, b_hh, h, i))
        z = sigmoid(affine(w_ih, b_ih, x, hidden + i) + affine(w_hh, b_hh, h, hidden + i))
        n = math.tanh(affine(w_ih, b_ih, x, 2 * hidden + i) + r * affine(w_hh, b_hh, h, 2 * hidden + i))
        out.append((1.0 - z) * n + z * h[i])
    return out


def mp_task_loss(z_u, z_v, negatives, dps=50):
    """High-precision -log sigmoid(u.v) - sum -log sigmoid(-(u.v'))."""
    import mpmath

    with mpmath.workdps(dps):
        def logsig(x):
            return -mpmath.log(1 + mpmath.exp(-mpmath.mpf(x)))

        pos = float(np.dot(z_u, z_v))
        loss = -logsig(pos)
        for nv in negatives:
            loss -= logsig(-float(np.dot(z_u, nv)))
        return float(loss)
