"""Independent brute-force references. Nothing here imports the code under test."""

import math

import numpy as np


def hull_oracle(bitrates, qualities):
    """Indices of the upper-left convex hull by exhaustive chord testing.

    A point is kept iff no distinct point dominates it (cheaper-or-equal and
    better-or-equal), it is the first of any exact duplicates, and it lies
    strictly above every chord between two points that straddle its bitrate.
    """
    r = np.asarray(bitrates, dtype=float).ravel()
    q = np.asarray(qualities, dtype=float).ravel()
    n = len(r)
    keep = []
    for p in range(n):
        dominated = False
        for o in range(n):
            if o == p:
                continue
            if r[o] <= r[p] and q[o] >= q[p]:
                if r[o] == r[p] and q[o] == q[p]:
                    if o < p:
                        dominated = True
                        break
                else:
                    dominated = True
                    break
        if dominated:
            continue
        left = np.nonzero(r < r[p])[0]
        right = np.nonzero(r > r[p])[0]
        if len(left) and len(right):
            a = left[:, None]
            b = right[None, :]
            # chord value at r[p] from a to b, compared without division
            lhs = (q[p] - q[a]) * (r[b] - r[a])
            rhs = (q[b] - q[a]) * (r[p] - r[a])
            if np.any(lhs <= rhs):
                continue
        keep.append(p)
    return sorted(keep, key=lambda i: r[i])


def conv2d_loops(x, w, b=None):
    """Direct nested-loop zero-padded same cross-correlation."""
    cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    p = k // 2
    out = np.zeros((cout, h, wd), dtype=np.float64)
    for o in range(cout):
        for i in range(h):
            for j in range(wd):
                acc = 0.0 if b is None else float(b[o])
                for c in range(cin):
                    for di in range(k):
                        for dj in range(k):
                            ii, jj = i + di - p, j + dj - p
                            if 0 <= ii < h and 0 <= jj < wd:
                                acc += float(w[o, c, di, dj]) * float(x[c, ii, jj])
                out[o, i, j] = acc
    return out


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def conv_gru_loops(x, h, Wz, Wr, Wh, Uz, Ur, Uh, Bz, Br, Bh):
    """Scalar transcription of the Conv-GRU update equations."""
    az = conv2d_loops(x, Wz, Bz) + conv2d_loops(h, Uz)
    ar = conv2d_loops(x, Wr, Br) + conv2d_loops(h, Ur)
    n, hh, ww = az.shape
    z = np.zeros_like(az)
    r = np.zeros_like(ar)
    for idx in np.ndindex(n, hh, ww):
        z[idx] = _sig(az[idx])
        r[idx] = _sig(ar[idx])
    rh = np.zeros_like(r)
    for idx in np.ndindex(n, hh, ww):
        rh[idx] = r[idx] * h[idx]
    ah = conv2d_loops(x, Wh, Bh) + conv2d_loops(rh, Uh)
    out = np.zeros_like(ah)
    for idx in np.ndindex(n, hh, ww):
        cand = math.tanh(ah[idx])
        out[idx] = (1.0 - z[idx]) * h[idx] + z[idx] * cand
    return out


def maxpool_loops(x):
    c, h, w = x.shape
    out = np.zeros((c, (h + 1) // 2, (w + 1) // 2))
    for ch in range(c):
        for i in range(0, h, 2):
            for j in range(0, w, 2):
                out[ch, i // 2, j // 2] = max(
                    x[ch, ii, jj] for ii in range(i, min(i + 2, h)) for jj in range(j, min(j + 2, w))
                )
    return out


def sobel_si_loops(frame):
    """Std of the Sobel magnitude over interior pixels, computed pixel by pixel."""
    f = np.asarray(frame, dtype=float)
    h, w = f.shape
    gx_k = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    gy_k = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]
    mags = []
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            gx = sum(gx_k[a][b] * f[i + a - 1, j + b - 1] for a in range(3) for b in range(3))
            gy = sum(gy_k[a][b] * f[i + a - 1, j + b - 1] for a in range(3) for b in range(3))
            mags.append(math.sqrt(gx * gx + gy * gy))
    mean = sum(mags) / len(mags)
    return math.sqrt(sum((m - mean) ** 2 for m in mags) / len(mags))
