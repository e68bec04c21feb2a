# Compiled satisfaction checks for egds and tgds over integer-encoded relations.
# A relation is a (rows x attributes) array of value codes, a dependency is encoded
# by utils.dependency_arrays. Used for exhaustive small-model search, where the same
# dependency is checked against tens of thousands of relations.

import numpy as np
from numba import njit, prange

from config import DTYPE


@njit(f'boolean({DTYPE}[:,::1], int64, {DTYPE}[:,::1], int64, {DTYPE}[::1])', inline='always')
def bind_row(tab, k, rel, j, assign):
    """
    Try to map tableau row k onto relation row j, extending assign in place.

    Returns:
        bool : False on a clash (assign is then partially written and must be reset)
    """
    for a in range(tab.shape[1]):
        s = tab[k, a]
        v = rel[j, a]
        if assign[s] == -1:
            assign[s] = v
        elif assign[s] != v:
            return False
    return True


@njit(f'boolean({DTYPE}[:,::1], int64, {DTYPE}[:,::1], {DTYPE}[:,::1], int64, int64, int64)')
def relation_satisfies(rel, nrows, body, head, nsyms, x, y):
    """
    Exact satisfaction of one egd (x >= 0) or tgd (x < 0) by rel[:nrows].

    Row assignments are enumerated as odometer codes in base nrows, so the search
    needs no recursion. Exponential in the number of tableau rows, which stays tiny
    in the intended use.

    Args:
        rel (2d array)  : relation rows, value codes
        nrows (int)     : number of valid rows in rel
        body (2d array) : body tableau, symbol codes 0..nsyms-1
        head (2d array) : head tableau (0 rows for egds)
        nsyms (int)     : number of distinct symbols in the dependency
        x, y (int)      : equated symbol codes for egds, -1 for tgds

    Returns:
        bool
    """
    nb = body.shape[0]
    nh = head.shape[0]
    assign = np.empty(nsyms, dtype=rel.dtype)
    trial  = np.empty(nsyms, dtype=rel.dtype)
    for code in range(nrows ** nb):
        assign[:] = -1
        c = code
        ok = True
        for k in range(nb):
            j = c % nrows
            c //= nrows
            if not bind_row(body, k, rel, j, assign):
                ok = False
                break
        if not ok:
            continue
        if x >= 0:
            if assign[x] != assign[y]:
                return False
            continue
        found = False
        for hcode in range(nrows ** nh):
            trial[:] = assign
            c = hcode
            ok = True
            for k in range(nh):
                j = c % nrows
                c //= nrows
                if not bind_row(head, k, rel, j, trial):
                    ok = False
                    break
            if ok:
                found = True
                break
        if not found:
            return False
    return True


@njit(parallel=True)
def satisfies_batch(rels, counts, body, head, nsyms, x, y):
    """
    Check one dependency against a whole batch of relations in parallel.

    Args:
        rels (3d array)   : batch x max_rows x attributes
        counts (1d array) : number of valid rows of each relation

    Returns:
        1d bool array
    """
    out = np.empty(rels.shape[0], dtype=np.bool_)
    for i in prange(rels.shape[0]):
        out[i] = relation_satisfies(rels[i], counts[i], body, head, nsyms, x, y)
    return out
