# Embedded dependencies (egds, tgds, inds, ejds) and their exact satisfaction
# semantics, computed by enumerating tableau homomorphisms.
from collections import Counter
from dataclasses import dataclass
from functools import reduce

from relations import Relation, Row, SchemaError, Symbol, symbol, by_rank


class DependencyError(ValueError):
    pass


# ===========================================================================
# Dependency types
# ===========================================================================

@dataclass(frozen=True)
class Egd:
    body: Relation      # tableau T
    lhs: Symbol         # x
    rhs: Symbol         # y

    def __post_init__(self):
        vals = self.body.values()
        if self.lhs not in vals or self.rhs not in vals:
            raise DependencyError(f"egd equates {self.lhs}={self.rhs} but both must occur in its tableau")

    @property
    def schema(self):
        return self.body.schema

    def values(self):
        return self.body.values()

    def apply(self, g):
        return Egd(self.body.apply(g), g.get(self.lhs, self.lhs), g.get(self.rhs, self.rhs))


@dataclass(frozen=True)
class Tgd:
    body: Relation      # tableau T, possibly empty
    head: Relation      # tableau T', nonempty

    def __post_init__(self):
        if self.body.schema != self.head.schema:
            raise DependencyError("tgd body and head must share one schema")
        if len(self.head) == 0:
            raise DependencyError("tgd head must be nonempty")

    @property
    def schema(self):
        return self.body.schema

    def values(self):
        return self.body.values() | self.head.values()

    def apply(self, g):
        return Tgd(self.body.apply(g), self.head.apply(g))


@dataclass(frozen=True)
class Ind:
    lhs: tuple          # A1 ... An, repeats allowed
    rhs: tuple          # B1 ... Bn

    def __post_init__(self):
        object.__setattr__(self, 'lhs', tuple(symbol(a) for a in self.lhs))
        object.__setattr__(self, 'rhs', tuple(symbol(a) for a in self.rhs))
        if len(self.lhs) != len(self.rhs):
            raise DependencyError(f"ind sides have lengths {len(self.lhs)} and {len(self.rhs)}")
        if len(self.lhs) == 0:
            raise DependencyError("ind of length 0")

    def as_ind(self):
        return self


@dataclass(frozen=True)
class Equality:
    # A = B, the ind AB <= AA. Stored with a, b ordered by rank
    a: Symbol
    b: Symbol

    def __post_init__(self):
        a, b = symbol(self.a), symbol(self.b)
        if b.rank < a.rank:
            a, b = b, a
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)

    def as_ind(self):
        return Ind((self.a, self.b), (self.a, self.a))


@dataclass(frozen=True)
class Ejd:
    components: tuple   # tuple of attribute tuples

    def __post_init__(self):
        comps = tuple(tuple(symbol(a) for a in c) for c in self.components)
        if not comps or not all(comps):
            raise DependencyError("ejd needs at least one nonempty component")
        object.__setattr__(self, 'components', comps)

    @property
    def schema(self):
        return tuple(by_rank({a for c in self.components for a in c}))


class Formula(tuple):
    # A nonempty conjunction of dependencies, kept as a flat list
    def __new__(cls, conjuncts):
        conjuncts = tuple(conjuncts)
        assert len(conjuncts) > 0, "a formula has at least one conjunct"
        return super().__new__(cls, conjuncts)

    def attributes(self):
        return set().union(*(attributes(c) for c in self))


def attributes(d):   # Att(d)
    if isinstance(d, (Egd, Tgd)):
        return set(d.schema)
    if isinstance(d, Ind):
        return set(d.lhs) | set(d.rhs)
    if isinstance(d, Equality):
        return {d.a, d.b}
    if isinstance(d, Ejd):
        return set(d.schema)
    raise TypeError(f"not a dependency: {d!r}")


def symbols_of(d):   # every symbol d mentions, as attribute or as value
    out = attributes(d)
    if isinstance(d, (Egd, Tgd)):
        out |= d.values()
    return out


# ===========================================================================
# Embedded dependency sentences: forall x (phi -> exists z psi)
# ===========================================================================

@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple


@dataclass(frozen=True)
class EqualityAtom:
    left: Symbol
    right: Symbol


@dataclass(frozen=True)
class EdSentence:
    schema: tuple       # attribute order of the relation symbol's positions
    body_atoms: tuple   # relational atoms
    head_atoms: tuple   # relational and equality atoms

    def __post_init__(self):
        for a in self.body_atoms:
            if not isinstance(a, Atom):
                raise DependencyError("equality atoms are not allowed in the body")
        for a in self.relational_atoms():
            if len(a.args) != len(self.schema):
                raise DependencyError(f"atom {a.relation} has {len(a.args)} arguments, schema has {len(self.schema)}")
        for a in self.head_atoms:
            if isinstance(a, EqualityAtom) and not {a.left, a.right} <= self.universals:
                raise DependencyError(f"equality {a.left}={a.right} involves an existential variable")

    def relational_atoms(self):
        return [a for a in self.body_atoms + self.head_atoms if isinstance(a, Atom)]

    @property
    def universals(self):
        return {v for a in self.body_atoms for v in a.args}

    @property
    def existentials(self):
        return {v for a in self.head_atoms if isinstance(a, Atom) for v in a.args} - self.universals


def normalize_ed(ed):
    # Split an ed into one tgd holding all relational head atoms (if any) and one egd
    # per equality head atom. Their conjunction is equivalent to ed.
    names = {a.relation for a in ed.relational_atoms()}
    if len(names) > 1:
        raise DependencyError(f"multirelational ed over {sorted(names)}")
    body = Relation(ed.schema, [a.args for a in ed.body_atoms])
    out = []
    rel_head = [a.args for a in ed.head_atoms if isinstance(a, Atom)]
    if rel_head:
        out.append(Tgd(body, Relation(ed.schema, rel_head)))
    for a in ed.head_atoms:
        if isinstance(a, EqualityAtom):
            out.append(Egd(body, a.left, a.right))
    return out


# ===========================================================================
# Homomorphisms and satisfaction
# ===========================================================================

class Target(object):
    # A relation restricted to a schema, with rows sorted and indexed by (position, value).
    # Build once when the same relation is searched many times.
    def __init__(self, r, schema):
        p = r if r.schema == tuple(schema) else r.project(schema)
        self.schema = p.schema
        self.rows   = p.sorted_rows()
        self.index  = {}
        for row in self.rows:
            for i, v in enumerate(row):
                self.index.setdefault((i, v), []).append(row)


def homomorphisms(T, r, fixed=None, wildcards=frozenset()):
    # Enumerate valuations f on Val(T) extending fixed with f(T) contained in r restricted
    # to T's schema. Backtracking picks the row with most bound cells first.
    # Arguments:
    #   T (Relation)         : tableau
    #   r (Relation|Target)  : relation over a superset of T's schema
    #   fixed (dict)         : partial valuation the results must extend
    #   wildcards (set)      : symbols occurring once in the surrounding dependency; their
    #                          cells match anything and they are left out of the results
    # Yields:
    #   dict : a valuation (fresh dict each time)
    target = r if isinstance(r, Target) and r.schema == T.schema else Target(r, T.schema)
    yield from _extend(T.sorted_rows(), target, dict(fixed or {}), wildcards)


def _extend(pattern, target, f, wildcards):
    if not pattern:
        yield dict(f)
        return
    best = max(range(len(pattern)), key=lambda i: (sum(v in f for v in pattern[i]), -i))
    row  = pattern[best]
    rest = pattern[:best] + pattern[best + 1:]
    keys = [(i, f[v]) for i, v in enumerate(row) if v in f]
    candidates = min((target.index.get(k, ()) for k in keys), key=len) if keys else target.rows
    seen = set()
    for cand in candidates:
        key = tuple(c for v, c in zip(row, cand) if v not in wildcards)
        if key in seen:
            continue
        seen.add(key)
        bound, ok = [], True
        for v, c in zip(row, cand):
            if v in wildcards:
                continue
            w = f.get(v)
            if w is None:
                f[v] = c
                bound.append(v)
            elif w != c:
                ok = False
                break
        if ok:
            yield from _extend(rest, target, f, wildcards)
        for v in bound:
            del f[v]


def _check_schema(r, attrs):
    missing = set(attrs) - set(r.schema)
    if missing:
        raise SchemaError(f"attributes {by_rank(missing)} are not in the relation schema {r.schema}")


def find_violation(r, d):
    # Return a witness that r violates d, or None when r satisfies d.
    #   egd/tgd     : the violating valuation (symbols of distinct cells left out)
    #   ind/equality: the row whose projection is missing
    #   ejd         : a row of the join that is not in r
    _check_schema(r, attributes(d))
    if isinstance(d, Egd):
        for f in homomorphisms(d.body, Target(r, d.schema), wildcards=distinct_values(d)):
            if f[d.lhs] != f[d.rhs]:
                return f
        return None
    if isinstance(d, Tgd):
        wild = distinct_values(d)
        frontier = d.body.values() & d.head.values()
        target = Target(r, d.schema)
        for f in homomorphisms(d.body, target, wildcards=wild):
            fixed = {v: f[v] for v in frontier}
            if next(homomorphisms(d.head, target, fixed, wild), None) is None:
                return f
        return None
    if isinstance(d, (Ind, Equality)):
        ind = d.as_ind()
        li = [r.index(a) for a in ind.lhs]
        ri = [r.index(a) for a in ind.rhs]
        targets = {tuple(row[i] for i in ri) for row in r.rows}
        for row in r.sorted_rows():
            if tuple(row[i] for i in li) not in targets:
                return Row(r.schema, row)
        return None
    if isinstance(d, Ejd):
        p = r.project(d.schema)
        joined = reduce(Relation.join, [p.project(dict.fromkeys(c)) for c in d.components])
        joined = joined.project(p.schema)
        for row in joined.sorted_rows():
            if row not in p.rows:
                return Row(p.schema, row)
        return None
    raise TypeError(f"not a dependency: {d!r}")


def satisfies(r, d):
    return find_violation(r, d) is None


# ===========================================================================
# Structural predicates
# ===========================================================================

def folding(d):
    # For a tgd (T,T'), a valuation on Val(T') that is the identity on Val(T)∩Val(T')
    # and maps T' into T, or None
    shared = d.body.values() & d.head.values()
    return next(homomorphisms(d.head, d.body, {v: v for v in shared}), None)


def is_trivial(d):
    if isinstance(d, Egd):
        return d.lhs == d.rhs
    return folding(d) is not None


def _cells(d):
    return [d.body] + ([d.head] if isinstance(d, Tgd) else [])


def is_typed(d):
    cols = {}
    for t in _cells(d):
        for v, attrs in t.columns_of().items():
            cols.setdefault(v, set()).update(attrs)
    if any(len(a) > 1 for a in cols.values()):
        return False
    if isinstance(d, Egd):
        return cols[d.lhs] == cols[d.rhs]
    return True


def distinct_values(d):
    occ = sum((t.occurrences() for t in _cells(d)), Counter())
    out = {v for v, n in occ.items() if n == 1}
    if isinstance(d, Egd):
        out -= {d.lhs, d.rhs}
    return out


# ===========================================================================
# Conversions between dependency kinds and schemas
# ===========================================================================

def _fresh_names(prefix, taken):
    k = 0
    while True:
        k += 1
        s = symbol(f'{prefix}{k}')
        if s not in taken:
            yield s


def widen(d, schema):
    # Pad an egd/tgd to a superset schema with pairwise-distinct fresh cells
    schema = tuple(symbol(a) for a in schema)
    if not set(d.schema) <= set(schema):
        raise SchemaError(f"cannot widen a dependency over {d.schema} to {schema}")
    extra = [a for a in by_rank(schema) if a not in d.schema]
    if not extra:
        return d
    fresh = _fresh_names('?w', d.values())
    def pad(t):
        return Relation(t.schema + tuple(extra), [r + tuple(next(fresh) for _ in extra) for r in t.sorted_rows()])
    if isinstance(d, Egd):
        return Egd(pad(d.body), d.lhs, d.rhs)
    return Tgd(pad(d.body), pad(d.head))


def to_dependencies(d, schema=None):
    # Express an ind, equality or ejd as egds and tgds over schema
    if isinstance(d, (Egd, Tgd)):
        return [d if schema is None else widen(d, schema)]
    schema = tuple(by_rank(set(symbol(a) for a in schema) if schema is not None else attributes(d)))
    if not attributes(d) <= set(schema):
        raise SchemaError(f"dependency attributes {by_rank(attributes(d))} not in schema {schema}")
    # variables must not coincide with attribute names
    var   = dict(zip(schema, _fresh_names('v', set(schema))))
    fresh = _fresh_names('?w', set(var.values()) | set(schema))
    def row(cells):
        return tuple(cells.get(a) or next(fresh) for a in schema)
    if isinstance(d, Equality):
        return [Egd(Relation(schema, [row(var)]), var[d.a], var[d.b])]
    if isinstance(d, Ind):
        body = Relation(schema, [row({a: var[a] for a in d.lhs})])
        head, out = {}, []
        for a, b in zip(d.lhs, d.rhs):
            if b in head and head[b] != var[a]:
                out.append(Egd(body, head[b], var[a]))
            else:
                head[b] = var[a]
        return out + [Tgd(body, Relation(schema, [row(head)]))]
    if isinstance(d, Ejd):
        body = Relation(schema, [row({a: var[a] for a in c}) for c in d.components])
        head = Relation(schema, [row({a: var[a] for a in d.schema})])
        return [Tgd(body, head)]
    raise TypeError(f"not a dependency: {d!r}")
