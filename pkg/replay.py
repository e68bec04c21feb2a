# Semantic replay of deductions.
#
# Given a relation r satisfying the premises, every line of a deduction is made true
# by extending r over the attributes the line introduces: a Chase Start line joins r
# with the relation of all embeddings of its tableau, a CR line for a tgd extends
# every row with witness values for the head-only values, and the other rules
# introduce nothing. After each line every conjunct is model-checked on the extension.
import itertools
from collections import namedtuple

import config
from relations import Relation, by_rank
from dependencies import Egd, Tgd, Ind, Target, homomorphisms, attributes, find_violation
from proofs import star_shape, _dependency
import utils


class ReplayError(RuntimeError):
    pass


Replay = namedtuple('Replay', ['relation', 'skipped'])


def _opening_tableau(line):
    # (R, T) for a CS or CS* line
    if line.just.tag == 'CS':
        shape = star_shape(line.formula[0], set(line.new_attrs))
        if isinstance(shape, str):
            raise ReplayError(shape)
        return shape
    S = set(line.new_attrs)
    up = [c for c in line.formula if isinstance(c, Ind) and set(c.rhs) <= S and not set(c.lhs) & S]
    R = up[0].lhs
    return R, Relation(R, [c.rhs for c in up])


def _embeddings(cur, R, T, S):
    # Relation over S listing h(S) for every h with h(T) contained in cur restricted to R
    target = Target(cur, R)
    return Relation(S, [tuple(h[s] for s in S) for h in homomorphisms(T, target)])


def _extend_tgd(cur, tau, f):
    # Add the attributes f(head-only values) to every row, holding values of a head witness
    head_only = by_rank(tau.head.values() - tau.body.values())
    frontier  = tau.body.values() & tau.head.values()
    new_attrs = [f[v] for v in head_only]
    target    = Target(cur, tau.schema)
    rows = []
    for row in cur.tuples():
        val = {v: row[f[v]] for v in tau.body.values()}
        g = next(homomorphisms(tau.head, target, {v: val[v] for v in frontier}), None)
        if g is None:
            raise ReplayError(f"premise has no head witness for row {row} under {utils.format_valuation(val)}")
        ext = row.as_dict()
        ext.update({a: g[v] for a, v in zip(new_attrs, head_only)})
        rows.append(ext)
    return Relation(cur.schema + tuple(new_attrs), rows)


def replay_deduction(r, ded, verbose=config.VERBOSE):
    # Extend r line by line so every conjunct of every line holds
    # Arguments:
    #   r (Relation)        : relation satisfying every premise, over a superset of Att(premises)
    #   ded (Deduction)     : a deduction accepted by check_deduction
    # Returns:
    #   Replay(relation, skipped): the extension and the indices of lines that could not be
    #   replayed because their opening tableau has no embedding into r
    def msg(s):
        print("Replay : " + f"line={i:4d} : " + s)

    needed = set().union(*(attributes(d) for d in ded.premises))
    if not needed <= set(r.schema):
        raise ReplayError(f"relation lacks premise attributes {by_rank(needed - set(r.schema))}")
    for k, d in enumerate(ded.premises):
        if find_violation(r, d) is not None:
            raise ReplayError(f"relation violates premise {k}")

    cur, skipped = r, set()
    for i, line in enumerate(ded.lines):
        j = line.just
        if skipped & set(j.refs):
            skipped.add(i)
            continue
        if j.tag in ('CS', 'CSstar'):
            R, T = _opening_tableau(line)
            H = _embeddings(cur, R, T, tuple(by_rank(line.new_attrs)))
            if len(H) == 0 and len(cur) > 0:
                if verbose:
                    msg("[Skipped] opening tableau does not embed")
                skipped.add(i)
                continue
            cur = cur.join(H)
        elif j.tag == 'CR-tgd':
            tau = _dependency(line, ded.premises, ded.lines[:i], Tgd)
            cur = _extend_tgd(cur, tau, j.mapping)
        for c in line.formula:
            w = find_violation(cur, c)
            if w is not None:
                raise ReplayError(f"line {i} ({j.tag}) fails on the extension: witness {w}")
        if verbose > 1:
            msg(f"[{j.tag}] {len(cur)} rows over {len(cur.schema)} attributes")

    conclusion = ded.conclusion
    if conclusion is not None and len(conclusion) == 1 and isinstance(conclusion[0], (Egd, Tgd)):
        if attributes(conclusion[0]) <= set(r.schema) and find_violation(r, conclusion[0]) is not None:
            raise ReplayError("the relation violates the conclusion")
    return Replay(cur, tuple(sorted(skipped)))


def search_extension(r, attrs, conjuncts, pool):
    # Brute force: an extension of r over attrs with values from pool satisfying every
    # conjunct, or None. Each row of r gets a nonempty set of extensions.
    attrs = tuple(attrs)
    options = list(itertools.product(pool, repeat=len(attrs)))
    choices = [c for k in range(1, len(options) + 1) for c in itertools.combinations(options, k)]
    rows = r.sorted_rows()
    for pick in itertools.product(choices, repeat=len(rows)):
        ext = Relation(r.schema + attrs, [row + tail for row, tails in zip(rows, pick) for tail in tails])
        if all(find_violation(ext, c) is None for c in conjuncts):
            return ext
    return None
