"""Pure-Python LSTM kernels.

Line-for-line twin of ``_ckernels.pyx``.  Loops are written out by hand
(no ``sum``, no numpy reductions) so that every floating-point operation
happens in the same order as in the compiled version.
"""
import math

import numpy as np

PROB_FLOOR = 1e-12


def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _affine(m, x, bias):
    out = []
    for row, bb in zip(m, bias):
        acc = 0.0
        for w, xj in zip(row, x):
            acc = acc + w * xj
        out.append(acc + bb)
    return out


def _softmax(z):
    mx = z[0]
    for v in z[1:]:
        if v > mx:
            mx = v
    e = [math.exp(v - mx) for v in z]
    s = 0.0
    for v in e:
        s = s + v
    return [v / s for v in e]


def _cell(E, W, b, x, h_prev, c_prev):
    dh = len(W) // 4
    xh = list(E[x]) + list(h_prev)
    z = _affine(W, xh, b)
    gates = [0.0] * (4 * dh)
    c = [0.0] * dh
    tc = [0.0] * dh
    h = [0.0] * dh
    for j in range(dh):
        ig = _sigmoid(z[j])
        fg = _sigmoid(z[dh + j])
        gg = math.tanh(z[2 * dh + j])
        og = _sigmoid(z[3 * dh + j])
        gates[j] = ig
        gates[dh + j] = fg
        gates[2 * dh + j] = gg
        gates[3 * dh + j] = og
        c[j] = fg * c_prev[j] + ig * gg
        tc[j] = math.tanh(c[j])
        h[j] = og * tc[j]
    return xh, gates, c, tc, h


def matvec(m, v):
    m = np.asarray(m).tolist()
    return np.array(_affine(m, np.asarray(v).tolist(), [0.0] * len(m)), dtype=float)


def head_probs(U, bias, h):
    return np.array(_softmax(_affine(U.tolist(), h.tolist(), bias.tolist())))


def lstm_step(E, W, b, x, h, c):
    _, _, c2, _, h2 = _cell(E.tolist(), W.tolist(), b.tolist(), x, h.tolist(), c.tolist())
    return np.array(h2), np.array(c2)


def encode(E, W, b, ids):
    El, Wl, bl = E.tolist(), W.tolist(), b.tolist()
    dh = W.shape[0] // 4
    h = [0.0] * dh
    c = [0.0] * dh
    H, C = [], []
    for x in ids.tolist():
        _, _, c, _, h = _cell(El, Wl, bl, x, h, c)
        H.append(h)
        C.append(c)
    return np.array(H).reshape(len(H), dh), np.array(C).reshape(len(C), dh)


def decode_greedy(E, W, b, V, bv, h0, c0, bos, eos, max_len, mask):
    El, Wl, bl, Vl, bvl = E.tolist(), W.tolist(), b.tolist(), V.tolist(), bv.tolist()
    mask = mask.tolist()
    h, c = h0.tolist(), c0.tolist()
    x = bos
    out = []
    for _ in range(max_len):
        _, _, c, _, h = _cell(El, Wl, bl, x, h, c)
        logits = _affine(Vl, h, bvl)
        best = -1
        for a, v in enumerate(logits):
            if mask[a]:
                continue
            if best < 0 or v > logits[best]:
                best = a
        if best == eos:
            break
        out.append(best)
        x = best
    return out


def loss_grad(E, W, b, V, bv, U, bc, inp, tgt, gold_case, lam, bos, grads=None):
    El, Wl, bl = E.tolist(), W.tolist(), b.tolist()
    Vl, bvl, Ul, bcl = V.tolist(), bv.tolist(), U.tolist(), bc.tolist()
    inp, tgt = inp.tolist(), tgt.tolist()
    de, dh = E.shape[1], W.shape[0] // 4
    T, L = len(inp), len(tgt)
    S = T + L
    inv_l = 1.0 / L
    xs = inp + [bos] + tgt[:-1]

    XH, GT, CS, TC, HS = [], [], [], [], []
    h = c = [0.0] * dh
    for s in range(S):
        xh, gates, c, tc, h = _cell(El, Wl, bl, xs[s], h, c)
        XH.append(xh)
        GT.append(gates)
        CS.append(c)
        TC.append(tc)
        HS.append(h)

    pc = _softmax(_affine(Ul, HS[T - 1], bcl))
    p = pc[gold_case]
    case_loss = -math.log(p if p > PROB_FLOOR else PROB_FLOOR)
    PR = []
    gen = 0.0
    for k in range(L):
        probs = _softmax(_affine(Vl, HS[T + k], bvl))
        PR.append(probs)
        p = probs[tgt[k]]
        gen = gen + -math.log(p if p > PROB_FLOOR else PROB_FLOOR)
    gen = gen * inv_l
    total = gen + lam * case_loss
    if grads is None:
        return total

    dE, dW, db, dV, dbv, dU, dbc = (g.tolist() for g in grads)
    G, K, NC = 4 * dh, de + dh, len(Ul)
    dh_next = [0.0] * dh
    dc_next = [0.0] * dh
    dz = [0.0] * G
    for s in range(S - 1, -1, -1):
        dhv = list(dh_next)
        hs = HS[s]
        if s >= T:
            k = s - T
            dlog = list(PR[k])
            if PR[k][tgt[k]] >= PROB_FLOOR:
                dlog[tgt[k]] = dlog[tgt[k]] - 1.0
                dlog = [v * inv_l for v in dlog]
            else:
                dlog = [0.0] * len(dlog)
            for a, dl in enumerate(dlog):
                dbv[a] = dbv[a] + dl
                row, vrow = dV[a], Vl[a]
                for j in range(dh):
                    row[j] = row[j] + dl * hs[j]
                    dhv[j] = dhv[j] + vrow[j] * dl
        if s == T - 1:
            dlc = list(pc)
            if pc[gold_case] >= PROB_FLOOR:
                dlc[gold_case] = dlc[gold_case] - 1.0
                dlc = [lam * v for v in dlc]
            else:
                dlc = [0.0] * NC
            for a, dl in enumerate(dlc):
                dbc[a] = dbc[a] + dl
                row, urow = dU[a], Ul[a]
                for j in range(dh):
                    row[j] = row[j] + dl * hs[j]
                    dhv[j] = dhv[j] + urow[j] * dl

        gt, tcs = GT[s], TC[s]
        for j in range(dh):
            ig, fg, gg, og = gt[j], gt[dh + j], gt[2 * dh + j], gt[3 * dh + j]
            cprev = CS[s - 1][j] if s > 0 else 0.0
            dov = dhv[j] * tcs[j]
            dcv = dc_next[j] + (dhv[j] * og) * (1.0 - tcs[j] * tcs[j])
            dz[j] = ((dcv * gg) * ig) * (1.0 - ig)
            dz[dh + j] = ((dcv * cprev) * fg) * (1.0 - fg)
            dz[2 * dh + j] = (dcv * ig) * (1.0 - gg * gg)
            dz[3 * dh + j] = (dov * og) * (1.0 - og)
            dc_next[j] = dcv * fg

        dxh = [0.0] * K
        xh = XH[s]
        for r in range(G):
            wz = dz[r]
            db[r] = db[r] + wz
            drow, wrow = dW[r], Wl[r]
            for j in range(K):
                drow[j] = drow[j] + wz * xh[j]
                dxh[j] = dxh[j] + wrow[j] * wz
        erow = dE[xs[s]]
        for j in range(de):
            erow[j] = erow[j] + dxh[j]
        dh_next = dxh[de:]

    for g, new in zip(grads, (dE, dW, db, dV, dbv, dU, dbc)):
        g[...] = new
    return total


def sumsq(a, acc=0.0):
    for v in a.tolist():
        acc = acc + v * v
    return acc


def adam(p, g, m, v, lr, gscale, b1, b2, eps, bc1, bc2):
    pl, gl, ml, vl = p.tolist(), g.tolist(), m.tolist(), v.tolist()
    omb1 = 1.0 - b1
    omb2 = 1.0 - b2
    for k in range(len(pl)):
        gk = gl[k] * gscale
        ml[k] = b1 * ml[k] + omb1 * gk
        vl[k] = b2 * vl[k] + omb2 * (gk * gk)
        mh = ml[k] / bc1
        vh = vl[k] / bc2
        pl[k] = pl[k] - (lr * mh) / (math.sqrt(vh) + eps)
    p[...] = pl
    m[...] = ml
    v[...] = vl
