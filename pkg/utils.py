# Includes various handy functions
import numpy as np

from config import DTYPE
from relations import Relation, by_rank


# Display helpers

def format_valuation(f, hide_blanks=True):   # {(x,3),(y,0),(z,1)}, keys in rank order
    keys = [k for k in by_rank(f) if not (hide_blanks and k.is_blank)]
    return '{' + ','.join(f'({k},{f[k]})' for k in keys) + '}'


# Helpful encoders between symbolic relations and integer numpy arrays

def dependency_arrays(d):
    # Encode an egd or tgd for the numba kernels
    # Returns:
    #   body (ndarray)  : rows x attributes, symbol codes
    #   head (ndarray)  : rows x attributes (empty for egds)
    #   nsyms (int)     : number of distinct codes
    #   x, y (int)      : codes of the equated symbols, -1 for tgds
    vals  = by_rank(d.values())
    code  = {v: i for i, v in enumerate(vals)}
    n     = len(d.schema)
    def enc(t):
        return np.array([[code[v] for v in row] for row in t.sorted_rows()], dtype=DTYPE).reshape(-1, n)
    if hasattr(d, 'head'):
        return enc(d.body), enc(d.head), len(vals), -1, -1
    return enc(d.body), np.zeros((0, n), dtype=DTYPE), len(vals), code[d.lhs], code[d.rhs]


def decode_relation(arr, count, schema, domain):
    # Turn rows[:count] of an integer array back into a Relation over schema,
    # reading value i as the symbol domain[i]
    return Relation(schema, [tuple(domain[int(v)] for v in arr[i]) for i in range(count)])

