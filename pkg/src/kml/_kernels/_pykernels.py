"""Pure numpy versions of the compiled collision loops (same signatures)."""
import numpy as np

_CORNERS = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]


def _interp(A, base, lo, hi, cw):
    sl = None
    acc = None
    for c, (a1, a2, a3) in enumerate(_CORNERS):
        if cw[c] == 0.0:
            continue
        sl = A[lo[0] + base[0] + a1:hi[0] + base[0] + a1 + 1,
               lo[1] + base[1] + a2:hi[1] + base[1] + a2 + 1,
               lo[2] + base[2] + a3:hi[2] + base[2] + a3 + 1]
        acc = cw[c] * sl if acc is None else acc + cw[c] * sl
    return acc


def gain_accumulate(F, G, w, o1, o2, c1, c2, lo, hi, out):
    for e in range(w.shape[0]):
        fv = _interp(F, o1[e], lo[e], hi[e], c1[e])
        if fv is None:
            continue
        gv = _interp(G, o2[e], lo[e], hi[e], c2[e])
        if gv is None:
            continue
        out[lo[e, 0]:hi[e, 0] + 1, lo[e, 1]:hi[e, 1] + 1, lo[e, 2]:hi[e, 2] + 1] += w[e] * fv * gv


def convolve_accumulate(G, k, d, out):
    n = G.shape[0]
    for e in range(k.shape[0]):
        lo = np.maximum(d[e], 0)
        hi = np.minimum(n - 1 + d[e], n - 1)
        out[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] += k[e] * G[
            lo[0] - d[e, 0]:hi[0] - d[e, 0] + 1,
            lo[1] - d[e, 1]:hi[1] - d[e, 1] + 1,
            lo[2] - d[e, 2]:hi[2] - d[e, 2] + 1]


def _shift_matrices(base, fr, n):
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    lo = (i + base[:, None, None]) == j
    hi = (i + base[:, None, None] + 1) == j
    return np.where(lo, (1.0 - fr)[:, None, None], 0.0) + np.where(hi, fr[:, None, None], 0.0)


def advect_blocks(A, base, fr, out):
    Q, S = A.shape
    n = round(S ** (1.0 / 3.0))
    blk = A.reshape(Q, n, n, n)
    blk = np.einsum("qai,qijk->qajk", _shift_matrices(base[:, 0], fr[:, 0], n), blk)
    blk = np.einsum("qbj,qajk->qabk", _shift_matrices(base[:, 1], fr[:, 1], n), blk)
    blk = np.einsum("qck,qabk->qabc", _shift_matrices(base[:, 2], fr[:, 2], n), blk)
    out[...] = blk.reshape(Q, S)
