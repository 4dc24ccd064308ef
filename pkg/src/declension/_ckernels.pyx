# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled LSTM kernels.

Every loop here has a twin in ``_pykernels``; the two must keep the same
accumulation order so both backends agree bit for bit.  Build with
``-ffp-contract=off`` so the compiler never fuses multiply-adds.
"""
import numpy as np

from libc.math cimport exp, log, sqrt, tanh

cdef double PROB_FLOOR = 1e-12


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef void _affine(const double[:, ::1] m, const double* x, const double[::1] bias,
                  double* out) noexcept nogil:
    # each row summed left to right from 0.0, then the bias; rows in blocks
    # of four only to expose independent chains
    cdef Py_ssize_t rows = m.shape[0], cols = m.shape[1]
    cdef Py_ssize_t r = 0, j
    cdef double a0, a1, a2, a3, xj
    while r + 4 <= rows:
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        a3 = 0.0
        for j in range(cols):
            xj = x[j]
            a0 = a0 + m[r, j] * xj
            a1 = a1 + m[r + 1, j] * xj
            a2 = a2 + m[r + 2, j] * xj
            a3 = a3 + m[r + 3, j] * xj
        out[r] = a0 + bias[r]
        out[r + 1] = a1 + bias[r + 1]
        out[r + 2] = a2 + bias[r + 2]
        out[r + 3] = a3 + bias[r + 3]
        r += 4
    while r < rows:
        a0 = 0.0
        for j in range(cols):
            a0 = a0 + m[r, j] * x[j]
        out[r] = a0 + bias[r]
        r += 1


cdef void _softmax(double* z, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k
    cdef double mx = z[0], s = 0.0
    for k in range(1, n):
        if z[k] > mx:
            mx = z[k]
    for k in range(n):
        z[k] = exp(z[k] - mx)
        s = s + z[k]
    for k in range(n):
        z[k] = z[k] / s


cdef void _cell(const double[:, ::1] E, const double[:, ::1] W, const double[::1] b,
                Py_ssize_t x, const double* h_prev, const double* c_prev,
                double* xh, double* z, double* gates, double* c, double* tc,
                double* h) noexcept nogil:
    cdef Py_ssize_t de = E.shape[1], dh = W.shape[0] // 4, j
    cdef double ig, fg, gg, og
    for j in range(de):
        xh[j] = E[x, j]
    for j in range(dh):
        xh[de + j] = h_prev[j]
    _affine(W, xh, b, z)
    for j in range(dh):
        ig = _sigmoid(z[j])
        fg = _sigmoid(z[dh + j])
        gg = tanh(z[2 * dh + j])
        og = _sigmoid(z[3 * dh + j])
        gates[j] = ig
        gates[dh + j] = fg
        gates[2 * dh + j] = gg
        gates[3 * dh + j] = og
        c[j] = fg * c_prev[j] + ig * gg
        tc[j] = tanh(c[j])
        h[j] = og * tc[j]


def matvec(const double[:, ::1] m, const double[::1] v):
    cdef Py_ssize_t rows = m.shape[0]
    out = np.zeros(rows)
    zero = np.zeros(rows)
    cdef double[::1] o = out
    cdef double[::1] zb = zero
    _affine(m, &v[0], zb, &o[0])
    return out


def head_probs(const double[:, ::1] U, const double[::1] bias, const double[::1] h):
    """softmax(U h + bias)."""
    out = np.empty(U.shape[0])
    cdef double[::1] o = out
    _affine(U, &h[0], bias, &o[0])
    _softmax(&o[0], o.shape[0])
    return out


def lstm_step(const double[:, ::1] E, const double[:, ::1] W, const double[::1] b,
              Py_ssize_t x, const double[::1] h, const double[::1] c):
    cdef Py_ssize_t de = E.shape[1], dh = W.shape[0] // 4
    h_out = np.empty(dh)
    c_out = np.empty(dh)
    cdef double[::1] ho = h_out, co = c_out
    cdef double[::1] xh = np.empty(de + dh), z = np.empty(4 * dh)
    cdef double[::1] gates = np.empty(4 * dh), tc = np.empty(dh)
    _cell(E, W, b, x, &h[0], &c[0], &xh[0], &z[0], &gates[0], &co[0], &tc[0], &ho[0])
    return h_out, c_out


def encode(const double[:, ::1] E, const double[:, ::1] W, const double[::1] b,
           const long long[::1] ids):
    """Run from the zero state; returns per-step hidden and cell traces."""
    cdef Py_ssize_t de = E.shape[1], dh = W.shape[0] // 4, T = ids.shape[0], s
    H_arr = np.zeros((T, dh))
    C_arr = np.zeros((T, dh))
    cdef double[:, ::1] H = H_arr, C = C_arr
    cdef double[::1] zeros = np.zeros(dh)
    cdef double[::1] xh = np.empty(de + dh), z = np.empty(4 * dh)
    cdef double[::1] gates = np.empty(4 * dh), tc = np.empty(dh)
    for s in range(T):
        if s == 0:
            _cell(E, W, b, ids[s], &zeros[0], &zeros[0], &xh[0], &z[0], &gates[0],
                  &C[s, 0], &tc[0], &H[s, 0])
        else:
            _cell(E, W, b, ids[s], &H[s - 1, 0], &C[s - 1, 0], &xh[0], &z[0],
                  &gates[0], &C[s, 0], &tc[0], &H[s, 0])
    return H_arr, C_arr


def decode_greedy(const double[:, ::1] E, const double[:, ::1] W, const double[::1] b,
                  const double[:, ::1] V, const double[::1] bv,
                  const double[::1] h0, const double[::1] c0,
                  Py_ssize_t bos, Py_ssize_t eos, Py_ssize_t max_len,
                  const unsigned char[::1] mask):
    cdef Py_ssize_t de = E.shape[1], dh = W.shape[0] // 4, A = V.shape[0]
    cdef Py_ssize_t step, a, best, x = bos
    cdef double[::1] h = np.array(h0), c = np.array(c0)
    cdef double[::1] h2 = np.empty(dh), c2 = np.empty(dh)
    cdef double[::1] xh = np.empty(de + dh), z = np.empty(4 * dh)
    cdef double[::1] gates = np.empty(4 * dh), tc = np.empty(dh), logits = np.empty(A)
    out = []
    for step in range(max_len):
        _cell(E, W, b, x, &h[0], &c[0], &xh[0], &z[0], &gates[0], &c2[0], &tc[0], &h2[0])
        h[:] = h2
        c[:] = c2
        _affine(V, &h[0], bv, &logits[0])
        best = -1
        for a in range(A):
            if mask[a]:
                continue
            if best < 0 or logits[a] > logits[best]:
                best = a
        if best == eos:
            break
        out.append(best)
        x = best
    return out


def loss_grad(const double[:, ::1] E, const double[:, ::1] W, const double[::1] b,
              const double[:, ::1] V, const double[::1] bv,
              const double[:, ::1] U, const double[::1] bc,
              const long long[::1] inp, const long long[::1] tgt,
              Py_ssize_t gold_case, double lam, Py_ssize_t bos, grads=None):
    """Joint teacher-forced loss; accumulates gradients into ``grads`` if given.

    ``grads`` is a 7-tuple of arrays shaped like (E, W, b, V, bv, U, bc).
    """
    cdef Py_ssize_t de = E.shape[1], dh = W.shape[0] // 4, K = de + dh, G = 4 * dh
    cdef Py_ssize_t A = V.shape[0], NC = U.shape[0]
    cdef Py_ssize_t T = inp.shape[0], L = tgt.shape[0], S = T + L
    cdef Py_ssize_t s, k, r, j, a, x
    cdef double p, gen = 0.0, case_loss, inv_l = 1.0 / L

    cdef double[:, ::1] XH = np.empty((S, K))
    cdef double[:, ::1] GT = np.empty((S, G))
    cdef double[:, ::1] CS = np.empty((S, dh))
    cdef double[:, ::1] TC = np.empty((S, dh))
    cdef double[:, ::1] HS = np.empty((S, dh))
    cdef double[:, ::1] PR = np.empty((L, A))
    cdef double[::1] pc = np.empty(NC)
    cdef double[::1] zeros = np.zeros(dh), z = np.empty(G)
    cdef long long[::1] xs = np.empty(S, dtype=np.int64)

    for s in range(T):
        xs[s] = inp[s]
    xs[T] = bos
    for k in range(1, L):
        xs[T + k] = tgt[k - 1]

    for s in range(S):
        if s == 0:
            _cell(E, W, b, xs[s], &zeros[0], &zeros[0], &XH[s, 0], &z[0], &GT[s, 0],
                  &CS[s, 0], &TC[s, 0], &HS[s, 0])
        else:
            _cell(E, W, b, xs[s], &HS[s - 1, 0], &CS[s - 1, 0], &XH[s, 0], &z[0],
                  &GT[s, 0], &CS[s, 0], &TC[s, 0], &HS[s, 0])

    _affine(U, &HS[T - 1, 0], bc, &pc[0])
    _softmax(&pc[0], NC)
    p = pc[gold_case]
    case_loss = -log(p if p > PROB_FLOOR else PROB_FLOOR)

    for k in range(L):
        _affine(V, &HS[T + k, 0], bv, &PR[k, 0])
        _softmax(&PR[k, 0], A)
        p = PR[k, tgt[k]]
        gen = gen + -log(p if p > PROB_FLOOR else PROB_FLOOR)
    gen = gen * inv_l
    total = gen + lam * case_loss
    if grads is None:
        return total

    cdef double[:, ::1] dE = grads[0]
    cdef double[:, ::1] dW = grads[1]
    cdef double[::1] db = grads[2]
    cdef double[:, ::1] dV = grads[3]
    cdef double[::1] dbv = grads[4]
    cdef double[:, ::1] dU = grads[5]
    cdef double[::1] dbc = grads[6]

    cdef double[::1] dh_next = np.zeros(dh), dc_next = np.zeros(dh)
    cdef double[::1] dhv = np.empty(dh), dz = np.empty(G), dxh = np.empty(K)
    cdef double[::1] dlog = np.empty(A), dlc = np.empty(NC)
    cdef double dcv, dov, ig, fg, gg, og, cprev, wz

    for s in range(S - 1, -1, -1):
        for j in range(dh):
            dhv[j] = dh_next[j]
        if s >= T:
            k = s - T
            for a in range(A):
                dlog[a] = PR[k, a]
            if PR[k, tgt[k]] >= PROB_FLOOR:
                dlog[tgt[k]] = dlog[tgt[k]] - 1.0
                for a in range(A):
                    dlog[a] = dlog[a] * inv_l
            else:
                for a in range(A):
                    dlog[a] = 0.0
            for a in range(A):
                dbv[a] = dbv[a] + dlog[a]
                for j in range(dh):
                    dV[a, j] = dV[a, j] + dlog[a] * HS[s, j]
                    dhv[j] = dhv[j] + V[a, j] * dlog[a]
        if s == T - 1:
            for a in range(NC):
                dlc[a] = pc[a]
            if pc[gold_case] >= PROB_FLOOR:
                dlc[gold_case] = dlc[gold_case] - 1.0
                for a in range(NC):
                    dlc[a] = lam * dlc[a]
            else:
                for a in range(NC):
                    dlc[a] = 0.0
            for a in range(NC):
                dbc[a] = dbc[a] + dlc[a]
                for j in range(dh):
                    dU[a, j] = dU[a, j] + dlc[a] * HS[s, j]
                    dhv[j] = dhv[j] + U[a, j] * dlc[a]

        for j in range(dh):
            ig = GT[s, j]
            fg = GT[s, dh + j]
            gg = GT[s, 2 * dh + j]
            og = GT[s, 3 * dh + j]
            cprev = CS[s - 1, j] if s > 0 else 0.0
            dov = dhv[j] * TC[s, j]
            dcv = dc_next[j] + (dhv[j] * og) * (1.0 - TC[s, j] * TC[s, j])
            dz[j] = ((dcv * gg) * ig) * (1.0 - ig)
            dz[dh + j] = ((dcv * cprev) * fg) * (1.0 - fg)
            dz[2 * dh + j] = (dcv * ig) * (1.0 - gg * gg)
            dz[3 * dh + j] = (dov * og) * (1.0 - og)
            dc_next[j] = dcv * fg

        for j in range(K):
            dxh[j] = 0.0
        for r in range(G):
            wz = dz[r]
            db[r] = db[r] + wz
            for j in range(K):
                dW[r, j] = dW[r, j] + wz * XH[s, j]
                dxh[j] = dxh[j] + W[r, j] * wz
        x = xs[s]
        for j in range(de):
            dE[x, j] = dE[x, j] + dxh[j]
        for j in range(dh):
            dh_next[j] = dxh[de + j]
    return total


def sumsq(const double[::1] a, double acc=0.0):
    cdef Py_ssize_t k
    for k in range(a.shape[0]):
        acc = acc + a[k] * a[k]
    return acc


def adam(double[::1] p, const double[::1] g, double[::1] m, double[::1] v,
         double lr, double gscale, double b1, double b2, double eps,
         double bc1, double bc2):
    """One in-place Adam step over flat views."""
    cdef Py_ssize_t k
    cdef double gk, mh, vh, omb1 = 1.0 - b1, omb2 = 1.0 - b2
    for k in range(p.shape[0]):
        gk = g[k] * gscale
        m[k] = b1 * m[k] + omb1 * gk
        v[k] = b2 * v[k] + omb2 * (gk * gk)
        mh = m[k] / bc1
        vh = v[k] / bc2
        p[k] = p[k] - (lr * mh) / (sqrt(vh) + eps)
