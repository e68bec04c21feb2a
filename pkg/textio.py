# Surface language for relations and dependencies, and the record format of proofs
# and chase traces.
#
#   relation r(A,B,C) { (0,1,2); (3,0,1); }
#   tgd s1 over (A,B,C): { (x,y,z); (_,x,y) } => { (z,_,x) }
#   egd e1 over (A,B,C,D): { (a,b,c,d0); (a,b,c,d1) } => d0 = d1
#   ind i1: A B <= B C              ind: A = B
#   ejd j1: join (A,B)(B,C)
#   ed m1 over (A,B,C): R(x,y,z), R(_,x,y) -> exists a: R(z,a,x), y = z
#   goal: s1                        goal: tgd over (A,B): { (x,y) } => { (y,x) }
#
# `_` is a fresh cell, distinct from every other; `_k` names a blank shared inside one
# declaration. `#` starts a comment. Engine symbols (`@k` minted by the chase and the
# generator, `?k` blanks) are accepted only in engine mode, which proof and trace
# documents use. Proofs and traces are JSON lines, one record per step.
import json
import re
from collections import namedtuple
from dataclasses import dataclass

from relations import Relation, SchemaError, symbol, symbols, blank, by_rank
from dependencies import (Egd, Tgd, Ind, Ejd, Equality, Atom, EqualityAtom, EdSentence,
                          DependencyError, attributes)
from proofs import Deduction, DeductionLine, Justification
from chase import ChaseOutcome


class ParseError(ValueError):
    def __init__(self, line, col, message):
        super().__init__(f"{line}:{col}: {message}")
        self.line    = line
        self.col     = col
        self.message = message


Token = namedtuple('Token', ['kind', 'text', 'line', 'col'])

# kind, name, item, position of the declaration keyword; ref is the name a goal points to
Declaration = namedtuple('Declaration', ['kind', 'name', 'item', 'line', 'col', 'ref'], defaults=[None])

DEPENDENCY_KINDS = ('tgd', 'egd', 'ind', 'ejd', 'ed')
KEYWORDS = DEPENDENCY_KINDS + ('relation', 'goal')


@dataclass(frozen=True)
class SourceFile:
    declarations: tuple = ()
    next_blank: int = 1       # first blank index not used by this file

    def named(self, name):
        for d in self.declarations:
            if d.name == name and d.kind != 'goal':
                return d
        return None

    def relations(self):
        return [d for d in self.declarations if d.kind == 'relation']

    def dependencies(self):
        return [d for d in self.declarations if d.kind in DEPENDENCY_KINDS]

    @property
    def goal(self):
        goals = [d for d in self.declarations if d.kind == 'goal']
        return goals[-1].item if goals else None


# ***** Lexer *****

_TOKEN = re.compile(r'(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)|(?P<op>=>|<=|->)'
                    r'|(?P<punct>[(){};,:=])|(?P<name>[A-Za-z0-9_]+)|(?P<engine>@[0-9]+|\?[A-Za-z0-9_]+)')


def tokenize(text, engine=False):
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - start + 1
        if m is None:
            raise ParseError(line, col, f"unexpected character {text[pos]!r}")
        kind, s = m.lastgroup, m.group()
        if kind == 'nl':
            line, start = line + 1, m.end()
        elif kind == 'engine':
            if not engine:
                raise ParseError(line, col, f"engine symbol {s} is not allowed in source files")
            yield Token('name', s, line, col)
        elif kind not in ('ws', 'comment'):
            yield Token(kind, s, line, col)
        pos = m.end()
    yield Token('eof', '', line, pos - start + 1)


# ***** Parser *****

class _Parser(object):
    def __init__(self, text, engine=False, blank_start=1):
        self.tokens = list(tokenize(text, engine))
        self.pos    = 0
        self.blank  = blank_start
        self.local  = {}

    def peek(self, k=0):
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def error(self, tok, message):
        return ParseError(tok.line, tok.col, message)

    def accept(self, kind, text=None):
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            self.pos += 1
            return tok
        return None

    def expect(self, kind, text=None):
        tok = self.accept(kind, text)
        if tok is None:
            found = self.peek().text or 'end of input'
            raise self.error(self.peek(), f"expected {text or kind}, found {found}")
        return tok

    def fresh(self):
        s = blank(self.blank)
        self.blank += 1
        return s

    def cell(self):
        t = self.expect('name').text
        if t == '_':
            return self.fresh()
        if t.startswith('_'):
            if t not in self.local:
                self.local[t] = self.fresh()
            return self.local[t]
        return symbol(t)

    def names(self):
        # attribute list, ended by anything but a name or by the next declaration keyword
        out = []
        while self.peek().kind == 'name' and self.peek().text not in KEYWORDS:
            out.append(symbol(self.expect('name').text))
        return tuple(out)

    def schema(self):
        start = self.expect('punct', '(')
        attrs = [symbol(self.expect('name').text)]
        while self.accept('punct', ','):
            attrs.append(symbol(self.expect('name').text))
        self.expect('punct', ')')
        if len(set(attrs)) != len(attrs):
            raise self.error(start, "repeated attribute in schema")
        return tuple(attrs)

    def row(self, schema):
        start = self.expect('punct', '(')
        cells = [self.cell()]
        while self.accept('punct', ','):
            cells.append(self.cell())
        self.expect('punct', ')')
        if len(cells) != len(schema):
            raise self.error(start, f"arity mismatch: row has {len(cells)} cells, schema has {len(schema)}")
        return tuple(cells)

    def rows(self, schema):
        self.expect('punct', '{')
        out = []
        while self.peek().text == '(':
            out.append(self.row(schema))
            if not self.accept('punct', ';'):
                break
        self.expect('punct', '}')
        return Relation(schema, out)

    def atom(self, schema):
        start = self.peek()
        if self.peek(1).text == '(':
            rel = self.expect('name').text
            self.expect('punct', '(')
            args = [self.cell()]
            while self.accept('punct', ','):
                args.append(self.cell())
            self.expect('punct', ')')
            if len(args) != len(schema):
                raise self.error(start, f"arity mismatch: atom has {len(args)} arguments, schema has {len(schema)}")
            return Atom(rel, tuple(args))
        left = self.cell()
        self.expect('punct', '=')
        return EqualityAtom(left, self.cell())

    def optional_name(self, before):
        tok = self.peek()
        if tok.kind == 'name' and tok.text != before:
            self.pos += 1
            return tok
        return None

    def declaration(self):
        kw = self.expect('name')
        self.local = {}
        if kw.text == 'relation':
            name = self.expect('name')
            schema = self.schema()
            return Declaration('relation', name.text, self.rows(schema), kw.line, kw.col), name
        if kw.text == 'goal':
            self.expect('punct', ':')
            if self.peek().text in DEPENDENCY_KINDS and {'over', ':'} & {self.peek(1).text, self.peek(2).text}:
                inner, _ = self.declaration()
                return Declaration('goal', None, inner.item, kw.line, kw.col), None
            ref = self.expect('name')
            return Declaration('goal', None, None, kw.line, kw.col, ref.text), ref
        if kw.text not in DEPENDENCY_KINDS:
            raise self.error(kw, f"unknown declaration {kw.text!r}")
        try:
            if kw.text in ('tgd', 'egd', 'ed'):
                name = self.optional_name('over')
                self.expect('name', 'over')
                schema = self.schema()
                self.expect('punct', ':')
                item = getattr(self, '_' + kw.text)(schema)
            else:
                name = self.optional_name(':')
                self.expect('punct', ':')
                item = getattr(self, '_' + kw.text)()
        except (DependencyError, SchemaError) as e:
            raise self.error(kw, str(e))
        return Declaration(kw.text, name.text if name else None, item, kw.line, kw.col), name

    def _tgd(self, schema):
        body = self.rows(schema)
        self.expect('op', '=>')
        return Tgd(body, self.rows(schema))

    def _egd(self, schema):
        body = self.rows(schema)
        self.expect('op', '=>')
        at = self.peek()
        x = self.cell()
        self.expect('punct', '=')
        y = self.cell()
        vals = body.values()
        for v in (x, y):
            if v not in vals:
                raise self.error(at, f"egd equates {v}, which does not occur in its tableau")
        return Egd(body, x, y)

    def _ind(self):
        at = self.peek()
        lhs = self.names()
        if self.accept('punct', '='):
            rhs = self.names()
            if len(lhs) != 1 or len(rhs) != 1:
                raise self.error(at, "an equality relates exactly one attribute to one attribute")
            return Equality(lhs[0], rhs[0])
        self.expect('op', '<=')
        rhs = self.names()
        if len(lhs) != len(rhs):
            raise self.error(at, f"arity mismatch: ind sides have {len(lhs)} and {len(rhs)} attributes")
        return Ind(lhs, rhs)

    def _ejd(self):
        self.expect('name', 'join')
        comps = []
        while self.peek().text == '(':
            comps.append(self.schema())
        if not comps:
            raise self.error(self.peek(), "join needs at least one component")
        return Ejd(tuple(comps))

    def _ed(self, schema):
        body = []
        if self.peek().text != '->':
            body.append(self.atom(schema))
            while self.accept('punct', ','):
                body.append(self.atom(schema))
        self.expect('op', '->')
        declared = []
        if self.peek().text == 'exists' and self.peek(1).kind == 'name':
            self.expect('name', 'exists')
            declared.append(self.expect('name'))
            while self.accept('punct', ','):
                declared.append(self.expect('name'))
            self.expect('punct', ':')
        head = [self.atom(schema)]
        while self.accept('punct', ','):
            head.append(self.atom(schema))
        ed = EdSentence(schema, tuple(body), tuple(head))
        for tok in declared:
            if symbol(tok.text) in ed.universals:
                raise self.error(tok, f"{tok.text} is declared existential but occurs in the body")
        return ed

    def source(self):
        decls, names = [], {}
        while self.peek().kind != 'eof':
            decl, name_tok = self.declaration()
            if decl.kind != 'goal' and decl.name is not None:
                if decl.name in names:
                    raise self.error(name_tok, f"duplicate name {decl.name!r}")
                names[decl.name] = decl
            if decl.kind == 'goal' and decl.ref is not None:
                target = names.get(decl.ref)
                if target is None or target.kind not in DEPENDENCY_KINDS:
                    raise self.error(name_tok, f"goal names unknown dependency {decl.ref!r}")
                decl = decl._replace(item=target.item)
            decls.append(decl)
            self.accept('punct', ';')
        _check_attributes(decls)
        return SourceFile(tuple(decls), self.blank)


def _check_attributes(decls):
    # ind and ejd attributes must be declared by some schema header of the file, if any
    declared = set()
    for d in decls:
        if d.kind == 'relation' or isinstance(d.item, (Egd, Tgd, EdSentence)):
            declared |= set(d.item.schema)
    if not declared:
        return
    for d in decls:
        if isinstance(d.item, (Ind, Equality, Ejd)):
            unknown = attributes(d.item) - declared
            if unknown:
                raise ParseError(d.line, d.col, f"unknown attribute {by_rank(unknown)[0]}")


def parse(text, engine=False, blank_start=1):
    # Parse a source file. Blanks are numbered from blank_start.
    return _Parser(text, engine, blank_start).source()


def parse_dependency(text, engine=True):
    # One inline dependency, as found in proof and trace records
    p = _Parser(text, engine)
    decl, _ = p.declaration()
    p.expect('eof')
    if decl.kind not in DEPENDENCY_KINDS:
        raise ParseError(decl.line, decl.col, "expected a dependency")
    return decl.item


# ***** Serialization of declarations *****

def _occurrences(d):
    occ = {}
    def count(vals):
        for v in vals:
            occ[v] = occ.get(v, 0) + 1
    if isinstance(d, Relation):
        occ.update(d.occurrences())
    elif isinstance(d, (Egd, Tgd)):
        for t in (d.body, d.head) if isinstance(d, Tgd) else (d.body,):
            for row in t.rows:
                count(row)
        if isinstance(d, Egd):
            count((d.lhs, d.rhs))
    elif isinstance(d, EdSentence):
        for a in d.body_atoms + d.head_atoms:
            count(a.args if isinstance(a, Atom) else (a.left, a.right))
    return occ


def _display_names(d, raw):
    # Source names for the values of d: a blank prints as `_` when it fills one cell
    # and as `_k` otherwise, a minted @k gets a plain name unused in d.
    occ = _occurrences(d)
    if raw:
        return {v: v.name for v in occ}
    taken = {v.name for v in occ} | {a.name for a in d.schema}
    names, k = {}, 0
    for v in by_rank(occ):
        if v.is_blank:
            names[v] = '_' if occ[v] == 1 else '_' + v.name[1:]
        elif v.is_minted:
            k += 1
            while f"n{k}" in taken:
                k += 1
            names[v] = f"n{k}"
        else:
            names[v] = v.name
    return names


def _tableau(t, names):
    if len(t) == 0:
        return '{ }'
    return '{ ' + '; '.join('(' + ','.join(names[v] for v in row) + ')' for row in t.sorted_rows()) + ' }'


def _atom(a, names):
    if isinstance(a, EqualityAtom):
        return f"{names[a.left]} = {names[a.right]}"
    return f"{a.relation}(" + ','.join(names[v] for v in a.args) + ')'


def dependency_text(d, name=None, raw=False):
    # One declaration for d. raw prints blanks and minted symbols by their engine names.
    label = f" {name}" if name else ''
    if isinstance(d, (Egd, Tgd, EdSentence)):
        names = _display_names(d, raw)
        kw = {Egd: 'egd', Tgd: 'tgd', EdSentence: 'ed'}[type(d)]
        prefix = f"{kw}{label} over (" + ','.join(a.name for a in d.schema) + '): '
        if isinstance(d, Tgd):
            return prefix + _tableau(d.body, names) + ' => ' + _tableau(d.head, names)
        if isinstance(d, Egd):
            return prefix + _tableau(d.body, names) + f" => {names[d.lhs]} = {names[d.rhs]}"
        body = ', '.join(_atom(a, names) for a in d.body_atoms)
        named = [v for v in by_rank(d.existentials) if names[v] != '_']
        exists = ('exists ' + ', '.join(names[v] for v in named) + ': ') if named else ''
        head = ', '.join(_atom(a, names) for a in d.head_atoms)
        return prefix + (body + ' ' if body else '') + '-> ' + exists + head
    if isinstance(d, Equality):
        return f"ind{label}: {d.a} = {d.b}"
    if isinstance(d, Ind):
        return f"ind{label}: " + ' '.join(map(str, d.lhs)) + ' <= ' + ' '.join(map(str, d.rhs))
    if isinstance(d, Ejd):
        return f"ejd{label}: join " + ''.join('(' + ','.join(map(str, c)) + ')' for c in d.components)
    raise TypeError(f"not a dependency: {d!r}")


def relation_text(name, r, raw=False):
    # Parses back to r up to renaming of blanks and minted symbols.
    names = _display_names(r, raw)
    lines = [f"relation {name}(" + ','.join(map(str, r.schema)) + ') {']
    lines += ['  (' + ','.join(names[v] for v in row) + ');' for row in r.sorted_rows()]
    return '\n'.join(lines + ['}'])


def serialize_source(sf, raw=False):
    out = []
    for d in sf.declarations:
        if d.kind == 'relation':
            out.append(relation_text(d.name, d.item, raw))
        elif d.kind == 'goal':
            out.append(f"goal: {d.ref}" if d.ref else 'goal: ' + dependency_text(d.item, raw=raw))
        else:
            out.append(dependency_text(d.item, d.name, raw))
    return ''.join(s + '\n' for s in out)


# ***** Proof and trace documents *****

def formula_text(formula):
    return ' & '.join(dependency_text(c, raw=True) for c in formula)


def parse_formula(text):
    return [parse_dependency(part) for part in text.split(' & ')]


def _pairs(f):
    return [[k.name, f[k].name] for k in by_rank(f)]


def serialize_proof(ded, goal=None):
    goal = ded.conclusion[0] if goal is None else goal
    records = [{'document': 'proof',
                'premises': [dependency_text(p, raw=True) for p in ded.premises],
                'conclusion': dependency_text(goal, raw=True)}]
    for i, line in enumerate(ded.lines):
        j = line.just
        records.append({'step': i, 'rule': j.tag, 'refs': list(j.refs),
                        'formula': formula_text(line.formula),
                        'new': [a.name for a in by_rank(line.new_attrs)],
                        'payload': {'premise': j.premise, 'valuation': _pairs(j.mapping),
                                    'positions': list(j.positions)}})
    return ''.join(json.dumps(r) + '\n' for r in records)


def _records(text, document):
    records = []
    for lineno, s in enumerate(text.splitlines(), 1):
        if not s.strip():
            continue
        try:
            records.append((lineno, json.loads(s)))
        except json.JSONDecodeError as e:
            raise ParseError(lineno, e.colno, e.msg)
    if not records or records[0][1].get('document') != document:
        raise ParseError(1, 1, f"not a {document} document")
    return records


def _field(lineno, rec, key):
    if key not in rec:
        raise ParseError(lineno, 1, f"record lacks field {key!r}")
    return rec[key]


def _in_record(lineno, text, parse_fn):
    try:
        return parse_fn(text)
    except ParseError as e:
        raise ParseError(lineno, e.col, f"in formula: {e.message}")


def parse_proof(text):
    # Returns (Deduction, goal)
    records = _records(text, 'proof')
    lineno, header = records[0]
    premises = [_in_record(lineno, p, parse_dependency) for p in _field(lineno, header, 'premises')]
    goal = _in_record(lineno, _field(lineno, header, 'conclusion'), parse_dependency)
    lines = []
    for k, (lineno, rec) in enumerate(records[1:]):
        if _field(lineno, rec, 'step') != k:
            raise ParseError(lineno, 1, f"record {k} is numbered {rec['step']}")
        payload = rec.get('payload', {})
        just = Justification(_field(lineno, rec, 'rule'), tuple(_field(lineno, rec, 'refs')),
                             payload.get('premise'),
                             tuple((symbol(a), symbol(b)) for a, b in payload.get('valuation', ())),
                             tuple(payload.get('positions', ())))
        formula = _in_record(lineno, _field(lineno, rec, 'formula'), parse_formula)
        lines.append(DeductionLine(formula, just, symbols(_field(lineno, rec, 'new'))))
    return Deduction(premises, lines), goal


def serialize_trace(outcome):
    # One start record holding the goal, one record per chase step with the tableau
    # after the step, and a closing verdict record
    records = [{'document': 'trace',
                'premises': [dependency_text(p, raw=True) for p in outcome.premises],
                'step': 0, 'tableau': dependency_text(outcome.goal, raw=True)}]
    for k, s in enumerate(outcome.trace, 1):
        rec = {'step': k, 'kind': s.kind, 'dependency': s.dependency_index}
        if s.kind == 'egd':
            rec['valuation'] = _pairs(s.valuation)
            rec['substitution'] = [v.name for v in s.substitution]
        else:
            rec['extensions'] = [_pairs(e) for e in s.extensions]
            rec['minted'] = [v.name for v in s.minted]
        rec['tableau'] = dependency_text(s.result, raw=True)
        records.append(rec)
    records.append({'verdict': outcome.verdict, 'steps': len(outcome.trace)})
    return ''.join(json.dumps(r) + '\n' for r in records)


def parse_trace(text):
    # Tableau snapshots of a trace document, start tableau first
    return [_in_record(n, r['tableau'], parse_dependency) for n, r in _records(text, 'trace') if 'tableau' in r]


def serialize(x, goal=None):
    if isinstance(x, SourceFile):
        return serialize_source(x)
    if isinstance(x, Deduction):
        return serialize_proof(x, goal)
    if isinstance(x, ChaseOutcome):
        return serialize_trace(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")
