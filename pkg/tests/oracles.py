"""Reference implementations that share no code with the package.

Everything here is plain Python loops over numpy scalars: the adjacency is
built entry by entry and every matrix product is a triple loop. Slow, but
the fixtures are tiny and the point is independence.
"""

import math

import numpy as np


def mm(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    assert a.shape[1] == b.shape[0]
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for k in range(a.shape[1]):
                s += a[i, k] * b[k, j]
            out[i, j] = s
    return out


def cat(*parts):
    rows = parts[0].shape[0]
    out = []
    for i in range(rows):
        row = []
        for p in parts:
            row.extend(p[i].tolist())
        out.append(row)
    return np.array(out)


def act(name, x):
    if name == "relu":
        return np.vectorize(lambda v: v if v > 0 else 0.0)(x)
    if name == "tanh":
        return np.vectorize(math.tanh)(x)
    return np.array(x, float)


def dense_renormalized(n, edges):
    a = [[0.0] * n for _ in range(n)]
    for i, j in edges:
        if i != j:
            a[i][j] = 1.0
            a[j][i] = 1.0
    for i in range(n):
        a[i][i] = 1.0
    deg = [sum(row) for row in a]
    return np.array([[a[i][j] / math.sqrt(deg[i] * deg[j]) for j in range(n)] for i in range(n)])


def attention(h, a, w):
    return act("tanh", mm(mm(a, h), w))


def embed(kind, x, a, layers, att, activation="tanh", krylov_order=2, output_activation="identity",
          attend_input=False):
    if kind == "gcn":
        h = x
        for w in layers:
            h = act(activation, mm(mm(a, h), w))
        return h
    if kind == "snowball":
        reps = [x]
        for w in layers[:-1]:
            reps.append(act(activation, mm(mm(a, cat(*reps)), w)))
        return act(output_activation, mm(cat(*reps), layers[-1]))
    if kind == "truncated_krylov":
        h = x
        for w in layers[:-1]:
            block = [h]
            for _ in range(krylov_order - 1):
                block.append(mm(a, block[-1]))
            h = act(activation, mm(cat(*block), w))
        return act(output_activation, mm(h, layers[-1]))
    if kind == "mgcn_h":
        att = list(att)
        if attend_input:
            x = cat(x, attention(x, a, att.pop(0)))
        h = act(activation, mm(mm(a, x), layers[0]))
        for w, wa in zip(layers[1:], att):
            h = act(activation, mm(mm(a, cat(h, attention(h, a, wa))), w))
        return h
    if kind == "mgcn_g":
        h = act(activation, mm(mm(a, x), layers[0]))
        c = cat(x, h)
        for i, w in enumerate(layers[1:]):
            d = attention(c, a, att[i])
            h = act(activation, mm(mm(a, d), w))
            c = cat(h, d)
        return h
    raise ValueError(kind)


def node_logits(kind, x, a, layers, att, w_c, snowball_p=0, **kw):
    r = embed(kind, x, a, layers, att, **kw)
    if kind in ("snowball", "truncated_krylov"):
        if snowball_p == 1:
            r = mm(a, r)
        return mm(r, w_c)
    return mm(mm(a, r), w_c)


def graph_logits(kind, graphs, layers, att, head, readout="mean_max", **kw):
    """Loop over graphs one at a time, then the MLP head row by row."""
    w1, b1, w2, b2 = head
    rows = []
    for n, edges, x in graphs:
        h = embed(kind, x, dense_renormalized(n, edges), layers, att, **kw)
        mean = [sum(h[i, j] for i in range(n)) / n for j in range(h.shape[1])]
        z = mean if readout == "mean" else mean + [max(h[i, j] for i in range(n)) for j in range(h.shape[1])]
        hidden = act("relu", mm(np.array([z]), w1) + b1)
        rows.append((mm(hidden, w2) + b2)[0])
    return np.array(rows)


def softmax_xent(logits, labels):
    total = 0.0
    for row, y in zip(logits, labels):
        m = max(row)
        lse = m + math.log(sum(math.exp(v - m) for v in row))
        total += lse - row[y]
    return total / len(labels)


def central_difference(f, x, h=1e-5):
    """Gradient of scalar ``f`` at array ``x`` by central differences (x is restored)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def relative_error(a, b):
    """Norm-wise relative error; two vanishing gradients count as agreeing."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale < 1e-10:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def power_iteration_extremes(m, iters=2000, seed=0):
    """Largest-magnitude eigenvalue of symmetric ``m``, then the one at the far end of the spectrum."""
    rng = np.random.default_rng(seed)
    n = m.shape[0]

    def dominant(mat):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(iters):
            w = mat @ v
            nrm = np.linalg.norm(w)
            if nrm == 0:
                return 0.0
            v = w / nrm
            lam = float(v @ mat @ v)
        return lam

    top = dominant(m)
    other = dominant(m - top * np.eye(n)) + top
    return min(top, other), max(top, other)
