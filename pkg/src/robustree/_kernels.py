"""Compiled inner loop of the tile-probability sums."""

import numba
import numpy as np

QUERY_BLOCK = 256


@numba.njit(cache=True, nogil=True)
def tile_moments(Ft, lower_index, upper_index, values, weights, out_first, out_second):
    """Accumulate ``sum_m w[m, s] * prod_j (F[hi, s] - F[lo, s]) * v_m`` and
    the same with ``v_m**2``.

    ``Ft`` holds the CDF at every distinct tile bound (rows; all numeric split
    dimensions stacked) for every query (columns).  ``weights`` carries the
    categorical factors, tile-major; pass a ``(0, S)`` array when there are
    none.  Each query's sum runs over tiles in a fixed order, so results do
    not depend on how queries are blocked.
    """
    S = Ft.shape[1]
    M = values.shape[0]
    J = lower_index.shape[1]
    use_w = weights.shape[0] == M
    p = np.empty(QUERY_BLOCK)
    for s0 in range(0, S, QUERY_BLOCK):
        s1 = min(s0 + QUERY_BLOCK, S)
        n = s1 - s0
        # contiguous copy keeps the block's CDF rows cache-resident
        Fb = np.ascontiguousarray(Ft[:, s0:s1])
        for i in range(n):
            out_first[s0 + i] = 0.0
            out_second[s0 + i] = 0.0
        for m in range(M):
            if use_w:
                for i in range(n):
                    p[i] = weights[m, s0 + i]
            else:
                for i in range(n):
                    p[i] = 1.0
            for j in range(J):
                hi = upper_index[m, j]
                lo = lower_index[m, j]
                for i in range(n):
                    q = Fb[hi, i] - Fb[lo, i]
                    q = min(max(q, 0.0), 1.0)
                    p[i] *= q
            v = values[m]
            v2 = v * v
            for i in range(n):
                out_first[s0 + i] += p[i] * v
                out_second[s0 + i] += p[i] * v2


def empty_weights(S: int) -> np.ndarray:
    return np.empty((0, S))
