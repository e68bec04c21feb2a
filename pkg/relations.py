# Symbols, tuples and relations. Attributes and values live in one symbol space,
# so a symbol used as a value in one place may be an attribute somewhere else.
import threading
from collections import Counter
from collections.abc import Mapping

from config import MINT_BASE


class SchemaError(ValueError):
    pass


class Symbol(object):
    # Interned identifier with a rank. Do not construct directly, use symbol(name) or minted(k)
    __slots__ = ('name', 'rank')

    def __init__(self, name, rank):
        self.name = name
        self.rank = rank

    def __eq__(self, other):
        return isinstance(other, Symbol) and self.name == other.name

    def __hash__(self):
        return hash(self.name)

    def __lt__(self, other):
        return self.rank < other.rank

    def __repr__(self):
        return self.name

    __str__ = __repr__

    @property
    def is_blank(self):    # materialized from a `_` cell by the parser
        return self.name.startswith('?')

    @property
    def is_minted(self):   # introduced by the tgd chase rule
        return self.name.startswith('@')


class SymbolTable(object):
    # The only shared mutable facility: an atomic registry from names to symbols.
    # Interning order defines the rank of user symbols.
    def __init__(self):
        self._lock    = threading.Lock()
        self._symbols = {}
        self._next    = 0

    def intern(self, name):
        with self._lock:
            s = self._symbols.get(name)
            if s is None:
                if name.startswith('@'):
                    rank = MINT_BASE + int(name[1:])
                else:
                    rank = self._next
                    self._next += 1
                s = Symbol(name, rank)
                self._symbols[name] = s
            return s


SYMBOLS = SymbolTable()


def symbol(name):
    if isinstance(name, Symbol):
        return name
    return SYMBOLS.intern(str(name))

def symbols(names):   # symbols("A B C") -> (A, B, C)
    if isinstance(names, str):
        names = names.replace(',', ' ').split()
    return tuple(symbol(n) for n in names)

def minted(k):
    assert k >= 1, "mint indices start at 1"
    return SYMBOLS.intern(f'@{k}')

def blank(k):
    return SYMBOLS.intern(f'?{k}')

def by_rank(syms):
    return sorted(syms, key=lambda s: s.rank)

def row_key(values):   # deterministic ordering of rows
    return tuple(v.rank for v in values)


class Row(object):
    # A tuple over a schema: a total map attribute -> symbol
    __slots__ = ('schema', 'values')

    def __init__(self, schema, values):
        assert len(schema) == len(values), "row must define exactly the schema"
        self.schema = tuple(schema)
        self.values = tuple(values)

    def __getitem__(self, attr):
        try:
            return self.values[self.schema.index(attr)]
        except ValueError:
            raise KeyError(attr)

    def items(self):
        return zip(self.schema, self.values)

    def as_dict(self):
        return dict(zip(self.schema, self.values))

    def __eq__(self, other):
        return isinstance(other, Row) and self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(frozenset(self.items()))

    def __repr__(self):
        return '(' + ','.join(map(str, self.values)) + ')'


class Relation(object):
    # Finite set of rows over a schema. The schema is kept sorted by rank and rows are
    # value tuples aligned with it, so equal relations compare equal whatever order the
    # caller listed attributes in. Tableaux are relations of symbolic values.
    __slots__ = ('schema', 'rows')

    def __init__(self, schema, rows=()):
        schema = tuple(symbol(a) for a in schema)
        if len(set(schema)) != len(schema):
            raise SchemaError(f"repeated attribute in schema {schema}")
        order = sorted(range(len(schema)), key=lambda i: schema[i].rank)
        canon = tuple(schema[i] for i in order)
        out = set()
        for row in rows:
            if isinstance(row, Row):
                row = row.as_dict()
            if isinstance(row, Mapping):
                if set(row) != set(canon):
                    raise SchemaError(f"row over {tuple(row)} does not match schema {canon}")
                out.add(tuple(symbol(row[a]) for a in canon))
            else:
                row = tuple(row)
                if len(row) != len(schema):
                    raise SchemaError(f"row {row} has {len(row)} cells, schema {schema} has {len(schema)}")
                out.add(tuple(symbol(row[i]) for i in order))
        object.__setattr__(self, 'schema', canon)
        object.__setattr__(self, 'rows', frozenset(out))

    def __setattr__(self, name, value):
        raise AttributeError("Relation is immutable")

    def __eq__(self, other):
        return isinstance(other, Relation) and self.schema == other.schema and self.rows == other.rows

    def __hash__(self):
        return hash((self.schema, self.rows))

    def __len__(self):
        return len(self.rows)

    def __iter__(self):        # rows in deterministic (rank) order
        return iter(self.sorted_rows())

    def __contains__(self, row):
        return tuple(row) in self.rows

    def __repr__(self):
        return f"Relation({','.join(map(str, self.schema))}; " + \
               '; '.join('(' + ','.join(map(str, r)) + ')' for r in self.sorted_rows()) + ')'

    def sorted_rows(self):
        return sorted(self.rows, key=row_key)

    def tuples(self):
        return [Row(self.schema, r) for r in self.sorted_rows()]

    def index(self, attr):
        return self.schema.index(attr)

    def values(self):          # Val(T)
        return {v for r in self.rows for v in r}

    def occurrences(self):     # symbol -> number of cells holding it
        return Counter(v for r in self.rows for v in r)

    def columns_of(self):      # symbol -> set of attributes it occurs under
        cols = {}
        for r in self.rows:
            for a, v in zip(self.schema, r):
                cols.setdefault(v, set()).add(a)
        return cols

    def project(self, attrs):
        attrs = tuple(attrs)
        missing = set(attrs) - set(self.schema)
        if missing:
            raise SchemaError(f"attributes {by_rank(missing)} not in schema {self.schema}")
        cols = [self.schema.index(a) for a in attrs]
        return Relation(attrs, (tuple(r[c] for c in cols) for r in self.rows))

    def apply(self, f):        # f(T): map every cell through the valuation, identity elsewhere
        return Relation(self.schema, (tuple(f.get(v, v) for v in r) for r in self.rows))

    def add(self, rows):
        return Relation(self.schema, list(self.rows) + list(rows))

    def join(self, other):     # natural join; a cartesian product when schemas are disjoint
        shared = [a for a in self.schema if a in other.schema]
        extra  = [a for a in other.schema if a not in self.schema]
        left   = [self.schema.index(a) for a in shared]
        right  = [other.schema.index(a) for a in shared]
        keep   = [other.schema.index(a) for a in extra]
        buckets = {}
        for row in other.rows:
            buckets.setdefault(tuple(row[i] for i in right), []).append(tuple(row[i] for i in keep))
        rows = [r + tail for r in self.rows for tail in buckets.get(tuple(r[i] for i in left), ())]
        return Relation(self.schema + tuple(extra), rows)
