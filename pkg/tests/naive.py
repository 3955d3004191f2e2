"""Loop-level reference implementations used as test oracles.

Deliberately written without numpy vectorisation or any import from the
package under test: plain nested lists, explicit windows, full sorts.
"""

import math


def ca_cfar_1d(values, train, guard, pfa):
    n = len(values)
    out = []
    for i in range(n):
        window = [j for j in range(n) if guard < abs(j - i) <= guard + train]
        if not window:
            out.append(values[i] > 0)
            continue
        s = 0.0
        for j in window:
            s += values[j]
        k = len(window)
        alpha = k * (pfa ** (-1.0 / k) - 1.0)
        out.append(values[i] > alpha * (s / k))
    return out


def step1_ca(cube, train, guard, pfa):
    """cube: nested lists [r][a][e] of floats."""
    n_r, n_a, n_e = len(cube), len(cube[0]), len(cube[0][0])
    out = [[[0.0] * n_e for _ in range(n_a)] for _ in range(n_r)]
    for a in range(n_a):
        for e in range(n_e):
            col = [cube[r][a][e] for r in range(n_r)]
            keep = ca_cfar_1d(col, train, guard, pfa)
            for r in range(n_r):
                if keep[r]:
                    out[r][a][e] = cube[r][a][e]
    return out


def top_percent(cube, percent):
    n_r, n_a, n_e = len(cube), len(cube[0]), len(cube[0][0])
    cells = []
    for r in range(n_r):
        for a in range(n_a):
            for e in range(n_e):
                cells.append(((r * n_a + a) * n_e + e, cube[r][a][e], (r, a, e)))
    cells.sort(key=lambda c: (-c[1], c[0]))
    k = math.ceil(percent * len(cells) / 100.0)
    out = [[[0.0] * n_e for _ in range(n_a)] for _ in range(n_r)]
    for _, v, (r, a, e) in cells[:k]:
        out[r][a][e] = v
    return out


def projection(cube, r):
    n_a, n_e = len(cube[0]), len(cube[0][0])
    e_t = n_e
    out = []
    for a in range(n_a):
        s = 0.0
        for e in range(n_e):
            s += (e_t - e) * cube[r][a][e]
        out.append(s)
    return out


def select_top(values, percent):
    k = math.ceil(percent * len(values) / 100.0)
    ranked = sorted(range(len(values)), key=lambda i: (-values[i], i))
    return sorted(i for i in ranked[:k] if values[i] > 0)


def cctp(cube, k1, k2=None, dr=None, da=None, train=16, guard=2, mode="ca",
         pairing="pairwise", recover_from="m1"):
    """Literal three-step pipeline; returns (m1, m2, m3, J_r, J_a, selected_pairs)."""
    n_r, n_a, n_e = len(cube), len(cube[0]), len(cube[0][0])
    m1 = step1_ca(cube, train, guard, k1 / 100.0) if mode == "ca" else top_percent(cube, k1)
    if k2 is None:
        return m1, None, None, [], [], set()
    pairs = set()
    for r in range(n_r):
        for a in select_top(projection(m1, r), k2):
            pairs.add((r, a))
    j_r = sorted({r for r, _ in pairs})
    j_a = sorted({a for _, a in pairs})

    def cond_a(r, a):
        if pairing == "separable":
            return r in j_r and a in j_a
        return (r, a) in pairs

    m2 = [[[m1[r][a][e] if cond_a(r, a) else 0.0 for e in range(n_e)]
           for a in range(n_a)] for r in range(n_r)]
    if dr is None:
        return m1, m2, None, j_r, j_a, pairs

    def cond_b(r, a):
        rs = range(r - dr, r + dr + 1)
        as_ = range(a - da, a + da + 1)
        if pairing == "separable":
            return any(j in j_r for j in rs) and any(j in j_a for j in as_)
        return any((jr, ja) in pairs for jr in rs for ja in as_)

    src = m1 if recover_from == "m1" else cube
    m3 = [[[src[r][a][e] if cond_b(r, a) else 0.0 for e in range(n_e)]
           for a in range(n_a)] for r in range(n_r)]
    return m1, m2, m3, j_r, j_a, pairs


def attention_column(tokens, query, w_q, w_k, w_v, w_o, n_heads):
    """Single-query multi-head attention for one column, list-based.

    tokens: Z lists of C floats.  Matrices: C lists of C floats, row-vector
    convention (x @ W).  Returns (output C-list, weights[head][z]).
    """
    c = len(query)
    d = c // n_heads

    def vecmat(v, m):
        return [sum(v[i] * m[i][j] for i in range(c)) for j in range(c)]

    qp = vecmat(query, w_q)
    ks = [vecmat(t, w_k) for t in tokens]
    vs = [vecmat(t, w_v) for t in tokens]
    mixed = [0.0] * c
    weights = []
    for h in range(n_heads):
        sl = range(h * d, (h + 1) * d)
        scores = [sum(qp[i] * k[i] for i in sl) / math.sqrt(d) for k in ks]
        top = max(scores)
        ex = [math.exp(s - top) for s in scores]
        tot = sum(ex)
        w = [e / tot for e in ex]
        weights.append(w)
        for i in sl:
            mixed[i] = sum(w[z] * vs[z][i] for z in range(len(tokens)))
    return vecmat(mixed, w_o), weights


def to_lists(arr):
    return arr.tolist()
