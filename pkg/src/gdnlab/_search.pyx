# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backtracking search for colour-preserving graph isomorphisms.

Same contract as ``_search_py.search``; selected by ``gdnlab.kernels``.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef class _Sink:
    cdef public object buf
    cdef cnp.int8_t[:, ::1] view
    cdef Py_ssize_t count
    cdef Py_ssize_t n

    def __init__(self, Py_ssize_t n):
        self.n = n
        self.count = 0
        self.buf = np.empty((64, n if n > 0 else 1), dtype=np.int8)
        self.view = self.buf

    cdef void push(self, long* image):
        cdef Py_ssize_t i
        if self.count == self.buf.shape[0]:
            grown = np.empty((2 * self.buf.shape[0], self.buf.shape[1]), dtype=np.int8)
            grown[: self.count] = self.buf
            self.buf = grown
            self.view = self.buf
        for i in range(self.n):
            self.view[self.count, i] = <cnp.int8_t>image[i]
        self.count += 1


def search(adj_a, adj_b, col_a, col_b, order, long pin_src=-1, long pin_dst=-1, long limit=0):
    cdef cnp.uint8_t[:, ::1] a = np.ascontiguousarray(adj_a, dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] b = np.ascontiguousarray(adj_b, dtype=np.uint8)
    cdef long[::1] ca = np.ascontiguousarray(col_a, dtype=np.int_)
    cdef long[::1] cb = np.ascontiguousarray(col_b, dtype=np.int_)
    cdef long[::1] od = np.ascontiguousarray(order, dtype=np.int_)
    cdef Py_ssize_t n = od.shape[0]
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    if n > 64:
        raise ValueError("search supports at most 64 nodes")

    cdef long image[64]
    cdef char used[64]
    cdef long cursor[64]  # next candidate index to try at each depth
    cdef long depth, u, w, k, p, q, start
    cdef bint ok
    cdef _Sink sink = _Sink(n)

    for k in range(n):
        image[k] = -1
        used[k] = 0
        cursor[k] = 0

    depth = 0
    while depth >= 0:
        u = od[depth]
        # undo the previous choice at this depth before trying the next one
        if image[u] >= 0:
            used[image[u]] = 0
            image[u] = -1
        ok = False
        if depth == 0 and pin_src >= 0:
            if cursor[0] == 0:
                w = pin_dst
                cursor[0] = n
                if used[w] == 0 and ca[u] == cb[w]:
                    ok = True
        else:
            start = cursor[depth]
            for w in range(start, n):
                if used[w] or ca[u] != cb[w]:
                    continue
                ok = True
                for k in range(depth):
                    p = od[k]
                    q = image[p]
                    if a[u, p] != b[w, q] or a[p, u] != b[q, w]:
                        ok = False
                        break
                if ok:
                    cursor[depth] = w + 1
                    break
            if not ok:
                cursor[depth] = n
        if not ok:
            cursor[depth] = 0
            depth -= 1
            continue
        image[u] = w
        used[w] = 1
        if depth == n - 1:
            sink.push(image)
            if limit > 0 and sink.count >= limit:
                break
            # stay at this depth; the loop undoes the choice and advances the cursor
            continue
        depth += 1
        cursor[depth] = 0

    return np.asarray(sink.buf[: sink.count]).copy()
