# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled edit-distance alignment kernel (same contract as ``score._align_py``)."""

from libc.stdlib cimport malloc, free


def align_ids(ref, hyp):
    """Return (S, D, I, C) for integer token id sequences."""
    cdef Py_ssize_t m = len(ref), n = len(hyp), i, j, w = n + 1
    cdef long* R = <long*>malloc((m + 1) * sizeof(long))
    cdef long* H = <long*>malloc((n + 1) * sizeof(long))
    cdef int* D = <int*>malloc((m + 1) * (n + 1) * sizeof(int))
    cdef int sub, ins, dele, best, c
    cdef int S_ = 0, D_ = 0, I_ = 0, C_ = 0
    if R == NULL or H == NULL or D == NULL:
        free(R); free(H); free(D)
        raise MemoryError()
    try:
        for i in range(m):
            R[i] = ref[i]
        for j in range(n):
            H[j] = hyp[j]
        for j in range(n + 1):
            D[j] = j
        for i in range(1, m + 1):
            D[i * w] = i
            for j in range(1, n + 1):
                best = D[(i - 1) * w + j - 1] + (0 if R[i - 1] == H[j - 1] else 1)
                ins = D[i * w + j - 1] + 1
                dele = D[(i - 1) * w + j] + 1
                if ins < best:
                    best = ins
                if dele < best:
                    best = dele
                D[i * w + j] = best
        i = m
        j = n
        while i > 0 or j > 0:
            c = D[i * w + j]
            if i > 0 and j > 0:
                sub = 0 if R[i - 1] == H[j - 1] else 1
                if D[(i - 1) * w + j - 1] + sub == c:
                    if sub:
                        S_ += 1
                    else:
                        C_ += 1
                    i -= 1
                    j -= 1
                    continue
            if j > 0 and D[i * w + j - 1] + 1 == c:
                I_ += 1
                j -= 1
                continue
            D_ += 1
            i -= 1
    finally:
        free(R)
        free(H)
        free(D)
    return S_, D_, I_, C_
