"""Pure-Python lower-envelope pass, used when the compiled kernel is unavailable."""

import numpy as np

INF = np.iinfo(np.int64).max // 4


def _line(f, src, fout, sout):
    n = len(f)
    v = [0] * n
    z = [0.0] * (n + 1)
    k = -1
    for q in range(n):
        fq = f[q]
        if fq >= INF:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -float("inf")
            z[1] = float("inf")
            continue
        while True:
            vk = v[k]
            s = ((fq + q * q) - (f[vk] + vk * vk)) / (2.0 * (q - vk))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = float("inf")
    if k < 0:
        fout[:] = INF
        sout[:] = -1
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        vk = v[k]
        fout[q] = (q - vk) * (q - vk) + f[vk]
        sout[q] = src[vk]


def lower_envelope_lines(f, src, fout, sout, num_threads=1):
    """Same contract as the compiled kernel; ``num_threads`` is ignored."""
    for i in range(f.shape[0]):
        _line(f[i].tolist(), src[i].tolist(), fout[i], sout[i])
