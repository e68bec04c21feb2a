# Exhaustive small-model search and random implication instances.
#
# Relations with at most max_rows rows over a domain of domain_size values are
# enumerated once as an integer array and every dependency is checked against the
# whole batch with the numba kernels. This gives a brute-force oracle for implication
# at desk scale: a relation satisfying the premises and violating the goal is a
# countermodel, and when none exists up to the bound the implication is plausible.

import itertools
from functools import lru_cache

import numpy as np
from tqdm import tqdm

from config import DTYPE
from relations import Relation, symbol, symbols, by_rank
from dependencies import Egd, Tgd
from kernels import satisfies_batch
import utils


# ***** Enumeration of small relations *****

@lru_cache(maxsize=8)
def all_relations(nattrs, domain_size, max_rows):
    """
    Every relation with at most max_rows rows over nattrs attributes and values 0..domain_size-1.

    Returns:
        rels (3d array)   : relations x max_rows x nattrs (read-only)
        counts (1d array) : number of valid rows of each relation
    """
    tuples = np.array(list(itertools.product(range(domain_size), repeat=nattrs)), dtype=DTYPE).reshape(-1, nattrs)
    blocks, counts = [], []
    for k in range(max_rows + 1):
        if k == 0:
            combos = np.zeros((1, 0), dtype=np.int64)
        else:
            combos = np.array(list(itertools.combinations(range(len(tuples)), k)), dtype=np.int64)
        block = np.zeros((len(combos), max(max_rows, 1), nattrs), dtype=DTYPE)
        block[:, :k] = tuples[combos]
        blocks.append(block)
        counts.append(np.full(len(combos), k, dtype=DTYPE))
    rels, counts = np.concatenate(blocks), np.concatenate(counts)
    rels.flags.writeable = False
    counts.flags.writeable = False
    return rels, counts


def domain_symbols(domain_size):
    return [symbol(str(i)) for i in range(domain_size)]


def satisfaction_mask(d, schema, rels, counts):
    # Which relations of the batch (columns laid out as schema) satisfy the egd/tgd d
    cols = [schema.index(a) for a in d.schema]
    sub  = np.ascontiguousarray(rels[:, :, cols])
    body, head, nsyms, x, y = utils.dependency_arrays(d)
    return satisfies_batch(sub, counts, body, head, nsyms, x, y)


def _schema(deps):
    return tuple(by_rank(set().union(*(set(d.schema) for d in deps))))


def find_countermodel(premises, goal, domain_size=4, max_rows=3, verbose=0, progressbar=False):
    # Search all small relations for one satisfying every premise and violating goal
    # Arguments:
    #   premises (list)   : egds and tgds
    #   goal (Egd|Tgd)    : dependency whose implication is tested
    #   domain_size (int) : number of values
    #   max_rows (int)    : largest relation size tried
    # Returns:
    #   Relation over the union schema, or None when no countermodel exists up to the bound
    schema = _schema(list(premises) + [goal])
    rels, counts = all_relations(len(schema), domain_size, max_rows)
    mask = np.ones(len(rels), dtype=np.bool_)
    for d in tqdm(premises, disable=not progressbar, desc='premises'):
        mask &= satisfaction_mask(d, schema, rels, counts)
    mask &= ~satisfaction_mask(goal, schema, rels, counts)
    hits = np.flatnonzero(mask)
    if verbose:
        print(f"find_countermodel : {len(rels)} relations, {int(mask.sum())} countermodels")
    if len(hits) == 0:
        return None
    i = hits[0]
    return utils.decode_relation(rels[i], counts[i], schema, domain_symbols(domain_size))


def satisfying_relations(premises, schema, domain_size=4, max_rows=3):
    # All small relations over schema satisfying every premise
    schema = tuple(by_rank(schema))
    rels, counts = all_relations(len(schema), domain_size, max_rows)
    mask = np.ones(len(rels), dtype=np.bool_)
    for d in premises:
        mask &= satisfaction_mask(d, schema, rels, counts)
    dom = domain_symbols(domain_size)
    return [utils.decode_relation(rels[i], counts[i], schema, dom) for i in np.flatnonzero(mask)]


# ***** Random implication instances *****

def random_tableau(schema, nrows, pool):
    # nrows random rows with cells drawn from pool (np.random global state)
    cells = np.random.randint(0, len(pool), (nrows, len(schema)))
    return Relation(schema, [tuple(pool[i] for i in row) for row in cells])


def random_dependency(schema, max_rows=3, nvals=4, p_egd=0.4, p_new=0.2):
    """
    Random egd or tgd over schema.

    Args:
        max_rows (int) : largest number of body rows
        nvals (int)    : size of the value pool
        p_egd (float)  : probability of an egd
        p_new (float)  : probability that a head cell holds an existential value

    Returns:
        Egd | Tgd
    """
    pool = symbols([f'x{i}' for i in range(nvals)])
    body = random_tableau(schema, np.random.randint(1, max_rows + 1), pool)
    vals = by_rank(body.values())
    if np.random.rand() < p_egd:
        x, y = np.random.choice(len(vals), 2, replace=len(vals) < 2)
        return Egd(body, vals[x], vals[y])
    head_rows = []
    for _ in range(np.random.randint(1, 3)):
        head_rows.append(tuple(symbol(f'n{np.random.randint(0, 2)}') if np.random.rand() < p_new
                               else vals[np.random.randint(0, len(vals))] for _ in schema))
    return Tgd(body, Relation(schema, head_rows))


def random_instance(max_attrs=3, max_deps=2, max_rows=3):
    # (premises, goal) over a random schema of 1..max_attrs attributes
    schema = symbols('A B C D'.split()[:np.random.randint(1, max_attrs + 1)])
    premises = [random_dependency(schema, max_rows) for _ in range(np.random.randint(1, max_deps + 1))]
    return premises, random_dependency(schema, max_rows)
