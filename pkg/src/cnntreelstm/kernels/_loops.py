"""Loop kernels shared by both backends.

Everything here sticks to the numba nopython subset (no helper calls, no
keyword-heavy numpy APIs) so that ``numba_impl`` can compile these functions
unchanged while ``numpy_impl`` runs them interpreted.

Tree layout: nodes are numbered in post-order (children before parents, root
last). ``left``/``right`` hold child node ids or -1 at leaves, ``leaf_col``
holds the sentence position of each leaf or -1 at internal nodes, ``labels``
holds the gold class or -1 for nodes excluded from the loss.

Composer gates are stacked as ``U[g, side]`` with g in (i, f_l, f_r, o, u)
and side in (left, right); the four composer biases are stacked as
``B = [b_i, b_f, b_o, b_u]`` with b_f shared by both forget gates.
"""
import numpy as np


def tree_forward(Pt, left, right, leaf_col, labels, out_mask, Wo, Wc, ao, ac, U, B, Ws, bs):
    n_nodes = left.shape[0]
    r = ao.shape[0]
    z = bs.shape[0]
    C = np.zeros((n_nodes, r))
    H = np.zeros((n_nodes, r))
    G = np.zeros((n_nodes, 5, r))
    probs = np.zeros((n_nodes, z))
    loss = 0.0
    for k in range(n_nodes):
        if left[k] < 0:
            x = Pt[leaf_col[k]]
            pre_o = np.dot(Wo, x) + ao
            e = np.exp(-np.abs(pre_o))
            o = np.where(pre_o >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
            c = np.dot(Wc, x) + ac
            G[k, 3] = o
        else:
            hl = H[left[k]]
            hr = H[right[k]]
            for g in range(5):
                if g == 0:
                    bias = B[0]
                elif g <= 2:
                    bias = B[1]
                else:
                    bias = B[g - 1]
                pre = np.dot(U[g, 0], hl) + np.dot(U[g, 1], hr) + bias
                if g == 4:
                    G[k, g] = np.tanh(pre)
                else:
                    e = np.exp(-np.abs(pre))
                    G[k, g] = np.where(pre >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
            o = G[k, 3]
            c = G[k, 0] * G[k, 4] + G[k, 1] * C[left[k]] + G[k, 2] * C[right[k]]
        C[k] = c
        H[k] = o * np.tanh(c)
        logits = np.dot(Ws, H[k] * out_mask[k]) + bs
        mx = logits.max()
        e = np.exp(logits - mx)
        s = e.sum()
        probs[k] = e / s
        if labels[k] >= 0:
            loss += np.log(s) - (logits[labels[k]] - mx)
    return C, H, G, probs, loss


def tree_backward(Pt, left, right, leaf_col, labels, out_mask, Wo, Wc, U, Ws,
                  C, H, G, probs, dPt, gWo, gWc, gao, gac, gU, gB, gWs, gbs):
    """Accumulates (+=) gradients of the node-summed NLL into the g* arrays."""
    n_nodes = left.shape[0]
    r = H.shape[1]
    dH = np.zeros((n_nodes, r))
    dC = np.zeros((n_nodes, r))
    a = np.zeros((5, r))
    for k in range(n_nodes - 1, -1, -1):
        if labels[k] >= 0:
            dlog = probs[k].copy()
            dlog[labels[k]] -= 1.0
            gWs += np.outer(dlog, H[k] * out_mask[k])
            gbs += dlog
            dH[k] += np.dot(Ws.T, dlog) * out_mask[k]
        dh = dH[k]
        o = G[k, 3]
        tc = np.tanh(C[k])
        dc = dC[k] + dh * o * (1.0 - tc * tc)
        do_pre = dh * tc * o * (1.0 - o)
        if left[k] < 0:
            col = leaf_col[k]
            x = Pt[col]
            gWo += np.outer(do_pre, x)
            gao += do_pre
            gWc += np.outer(dc, x)
            gac += dc
            dPt[col] += np.dot(Wo.T, do_pre) + np.dot(Wc.T, dc)
        else:
            lc = left[k]
            rc = right[k]
            gi = G[k, 0]
            gfl = G[k, 1]
            gfr = G[k, 2]
            gu = G[k, 4]
            a[0] = dc * gu * gi * (1.0 - gi)
            a[1] = dc * C[lc] * gfl * (1.0 - gfl)
            a[2] = dc * C[rc] * gfr * (1.0 - gfr)
            a[3] = do_pre
            a[4] = dc * gi * (1.0 - gu * gu)
            dC[lc] += dc * gfl
            dC[rc] += dc * gfr
            hl = H[lc]
            hr = H[rc]
            for g in range(5):
                gU[g, 0] += np.outer(a[g], hl)
                gU[g, 1] += np.outer(a[g], hr)
                dH[lc] += np.dot(U[g, 0].T, a[g])
                dH[rc] += np.dot(U[g, 1].T, a[g])
            gB[0] += a[0]
            gB[1] += a[1] + a[2]
            gB[2] += a[3]
            gB[3] += a[4]


def lstm_forward(Pt, W, Ur, B, out_mask, Ws, bs, label):
    """Gate stacks are ordered (write, forget, output, update)."""
    n = Pt.shape[0]
    r = B.shape[1]
    Hs = np.zeros((n + 1, r))
    Cs = np.zeros((n + 1, r))
    G = np.zeros((n, 4, r))
    for t in range(n):
        x = Pt[t]
        hp = Hs[t]
        for g in range(4):
            pre = np.dot(W[g], x) + np.dot(Ur[g], hp) + B[g]
            if g == 3:
                G[t, g] = np.tanh(pre)
            else:
                e = np.exp(-np.abs(pre))
                G[t, g] = np.where(pre >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        Cs[t + 1] = G[t, 0] * G[t, 3] + G[t, 1] * Cs[t]
        Hs[t + 1] = G[t, 2] * np.tanh(Cs[t + 1])
    logits = np.dot(Ws, Hs[n] * out_mask) + bs
    mx = logits.max()
    e = np.exp(logits - mx)
    s = e.sum()
    probs = e / s
    loss = 0.0
    if label >= 0:
        loss = np.log(s) - (logits[label] - mx)
    return Hs, Cs, G, probs, loss


def lstm_backward(Pt, label, out_mask, W, Ur, Ws, Hs, Cs, G, probs, dPt, gW, gU, gB, gWs, gbs):
    n = Pt.shape[0]
    r = Hs.shape[1]
    if label < 0:
        return
    dlog = probs.copy()
    dlog[label] -= 1.0
    gWs += np.outer(dlog, Hs[n] * out_mask)
    gbs += dlog
    dh = np.dot(Ws.T, dlog) * out_mask
    dc_next = np.zeros(r)
    a = np.zeros((4, r))
    for t in range(n - 1, -1, -1):
        gw = G[t, 0]
        gf = G[t, 1]
        go = G[t, 2]
        gu = G[t, 3]
        tc = np.tanh(Cs[t + 1])
        dc = dc_next + dh * go * (1.0 - tc * tc)
        a[0] = dc * gu * gw * (1.0 - gw)
        a[1] = dc * Cs[t] * gf * (1.0 - gf)
        a[2] = dh * tc * go * (1.0 - go)
        a[3] = dc * gw * (1.0 - gu * gu)
        x = Pt[t]
        hp = Hs[t]
        dh = np.zeros(r)
        dx = np.zeros(x.shape[0])
        for g in range(4):
            gW[g] += np.outer(a[g], x)
            gU[g] += np.outer(a[g], hp)
            gB[g] += a[g]
            dx += np.dot(W[g].T, a[g])
            dh += np.dot(Ur[g].T, a[g])
        dPt[t] += dx
        dc_next = dc * gf


def conv_forward_loops(X, W, b):
    d, n = X.shape
    m, _, width = W.shape
    pad = width // 2
    Z = np.empty((m, n))
    for v in range(m):
        for j in range(n):
            s = b[v]
            for k in range(width):
                col = j + k - pad
                if col < 0 or col >= n:
                    continue
                for q in range(d):
                    s += W[v, q, k] * X[q, col]
            Z[v, j] = s
    return Z


def conv_backward_loops(X, W, dZ):
    d, n = X.shape
    m, _, width = W.shape
    pad = width // 2
    dX = np.zeros((d, n))
    dW = np.zeros((m, d, width))
    db = np.zeros(m)
    for v in range(m):
        for j in range(n):
            g = dZ[v, j]
            if g == 0.0:
                continue
            db[v] += g
            for k in range(width):
                col = j + k - pad
                if col < 0 or col >= n:
                    continue
                for q in range(d):
                    dW[v, q, k] += g * X[q, col]
                    dX[q, col] += g * W[v, q, k]
    return dX, dW, db


def glove_epoch(W, Wc, b, bc, gW, gWc, gb, gbc, rows, cols, vals, order, x_max, alpha, lr):
    """One AdaGrad pass over the listed co-occurrence entries; returns the
    accumulated weighted squared error seen during the pass."""
    dim = W.shape[1]
    cost = 0.0
    for t in range(order.shape[0]):
        e = order[t]
        i = rows[e]
        j = cols[e]
        x = vals[e]
        diff = b[i] + bc[j] - np.log(x)
        for q in range(dim):
            diff += W[i, q] * Wc[j, q]
        if x < x_max:
            fx = (x / x_max) ** alpha
        else:
            fx = 1.0
        fdiff = fx * diff
        cost += fdiff * diff
        for q in range(dim):
            g1 = fdiff * Wc[j, q]
            g2 = fdiff * W[i, q]
            gW[i, q] += g1 * g1
            gWc[j, q] += g2 * g2
            W[i, q] -= lr * g1 / np.sqrt(gW[i, q])
            Wc[j, q] -= lr * g2 / np.sqrt(gWc[j, q])
        gb[i] += fdiff * fdiff
        gbc[j] += fdiff * fdiff
        b[i] -= lr * fdiff / np.sqrt(gb[i])
        bc[j] -= lr * fdiff / np.sqrt(gbc[j])
    return cost
