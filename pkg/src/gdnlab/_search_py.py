"""Pure-Python backtracking search for colour-preserving graph isomorphisms.

Reference twin of ``_search.pyx``; both expose ``search`` with the same contract.
"""

import numpy as np


def search(adj_a, adj_b, col_a, col_b, order, pin_src=-1, pin_dst=-1, limit=0):
    """Enumerate bijections ``f`` with ``adj_a[u, v] == adj_b[f[u], f[v]]`` for all
    ``u, v`` and ``col_a[u] == col_b[f[u]]``.

    ``order`` is the placement order of A's nodes and must start with ``pin_src``
    when a pin is given (``f[pin_src] = pin_dst`` is forced). ``limit <= 0``
    means no limit. Returns an ``(k, n)`` int8 array of mappings.
    """
    a = np.asarray(adj_a, dtype=np.uint8).tolist()
    b = np.asarray(adj_b, dtype=np.uint8).tolist()
    ca = [int(x) for x in col_a]
    cb = [int(x) for x in col_b]
    order = [int(x) for x in order]
    n = len(order)
    image = [-1] * n
    used = [False] * n
    found = []
    cands = [[w for w in range(n) if cb[w] == ca[u]] for u in range(n)]

    def place(depth):
        if depth == n:
            found.append(list(image))
            return limit > 0 and len(found) >= limit
        u = order[depth]
        opts = [pin_dst] if (depth == 0 and pin_src >= 0) else cands[u]
        for w in opts:
            if used[w]:
                continue
            ok = True
            for k in range(depth):
                p = order[k]
                q = image[p]
                if a[u][p] != b[w][q] or a[p][u] != b[q][w]:
                    ok = False
                    break
            if not ok:
                continue
            image[u] = w
            used[w] = True
            stop = place(depth + 1)
            used[w] = False
            image[u] = -1
            if stop:
                return True
        return False

    if n:
        place(0)
    else:
        found.append([])  # the empty map is the one bijection on zero nodes
    return np.asarray(found, dtype=np.int8).reshape(len(found), n)
