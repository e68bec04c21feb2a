# Deductions over the inclusion-dependency axiom system and their checker.
#
# A deduction is a list of lines. Each line is a conjunction of dependencies together
# with the rule instance that justifies it and the attributes it introduces as new.
# The premises are available to every line. Rule instances carry their payload (the
# valuation of CR, the mapping u of CT, the swapped positions of EE), so checking a
# line never searches.
from collections import namedtuple
from dataclasses import dataclass

from relations import Relation, by_rank
from dependencies import Egd, Tgd, Ind, Ejd, Equality, Formula, attributes, is_typed


RULES = ('Premise', 'CS', 'CR-tgd', 'CR-egd', 'CT-tgd', 'CT-egd', 'EE', 'ES', 'ET',
         'AndIntro', 'AndElim', 'CSstar', 'CTstar')

Verdict = namedtuple('Verdict', ['ok', 'line', 'message'])


@dataclass(frozen=True)
class Justification:
    tag: str
    refs: tuple = ()          # indices of earlier lines
    premise: int = None       # index into the premises (Premise, CR)
    valuation: tuple = ()     # (symbol, symbol) pairs: f of CR, u of CT
    positions: tuple = ()     # swapped occurrences of EE/ES/ET, over lhs + rhs

    def __post_init__(self):
        if isinstance(self.valuation, dict):
            object.__setattr__(self, 'valuation', tuple((k, self.valuation[k]) for k in by_rank(self.valuation)))
        object.__setattr__(self, 'refs', tuple(self.refs))
        object.__setattr__(self, 'positions', tuple(self.positions))

    @property
    def mapping(self):
        return dict(self.valuation)

    def arity_problem(self):
        # None when the payload fits the tag, else a diagnostic
        t, n = self.tag, len(self.refs)
        if t not in RULES:
            return f"unknown rule {t}"
        if t == 'Premise' and (self.premise is None or n):
            return "Premise names one premise and no lines"
        if t in ('CS', 'CSstar') and n:
            return f"{t} is an axiom and references no lines"
        if t in ('CR-tgd', 'CR-egd') and self.premise is None and not n:
            return f"{t} needs a dependency"
        if t in ('EE', 'ET') and n != 2:
            return f"{t} references an equality line and one more line"
        if t == 'ES' and n != 1:
            return "ES references one equality line"
        if t == 'AndElim' and n != 1:
            return "AndElim references exactly one line"
        if t in ('AndIntro', 'CT-tgd', 'CT-egd', 'CTstar') and not n:
            return f"{t} needs referenced lines"
        return None


@dataclass(frozen=True)
class DeductionLine:
    formula: Formula
    just: Justification
    new_attrs: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, 'formula', Formula(self.formula))
        object.__setattr__(self, 'new_attrs', frozenset(self.new_attrs))


@dataclass(frozen=True)
class Deduction:
    premises: tuple
    lines: tuple

    def __post_init__(self):
        object.__setattr__(self, 'premises', tuple(self.premises))
        object.__setattr__(self, 'lines', tuple(self.lines))

    @property
    def conclusion(self):
        return self.lines[-1].formula if self.lines else None


# ===========================================================================
# Helpers
# ===========================================================================

def ind_forms(c):
    # The (lhs, rhs) pairs an ind-like conjunct stands for. A=B is AB<=AA, AB<=BB,
    # BA<=BB and BA<=AA alike.
    if isinstance(c, Equality):
        a, b = c.a, c.b
        return {((a, b), (a, a)), ((a, b), (b, b)), ((b, a), (b, b)), ((b, a), (a, a))}
    if isinstance(c, Ind):
        return {(c.lhs, c.rhs)}
    return set()


def as_equality(c):
    # (A, B) when the conjunct is A=B in any of its ind forms, else None
    if isinstance(c, Equality):
        return (c.a, c.b)
    if isinstance(c, Ind) and len(c.lhs) == 2:
        for a, b in (c.lhs, c.lhs[::-1]):
            if c.rhs == (a, a) and set(c.lhs) == {a, b}:
                return (a, b)
    return None


def has_equality(conjuncts, a, b):
    if a == b:
        return True
    want = ind_forms(Equality(a, b))
    return any(ind_forms(c) & want for c in conjuncts)


def row_ind(values, attrs):    # t(A) <= A
    return Ind(tuple(values), tuple(attrs))


def is_typed_relation(t):
    return all(len(c) == 1 for c in t.columns_of().values())


def _available(earlier, refs):
    return [c for j in refs for c in earlier[j].formula]


def star_shape(star, S):
    # Check that star is (T*, id)[RS] with S the new attributes. Returns (R, T) or a message.
    if not isinstance(star, Tgd):
        return "expected the tgd (T*, id)[RS]"
    if not S <= set(star.schema):
        return "new attributes S are not all in the schema of (T*, id)"
    R = tuple(a for a in star.schema if a not in S)
    occ = star.body.occurrences() + star.head.occurrences()
    for a in R:
        if occ[a] > 1:
            return f"attribute {a} of R is not a distinct value of (T*, id)"
    if len(star.head) != 1:
        return "(T*, id) has a single head row"
    head = dict(zip(star.schema, next(iter(star.head.rows))))
    for x in S:
        if head[x] != x:
            return f"head row of (T*, id) must map {x} to itself"
    for a in R:
        if occ[head[a]] != 1:
            return f"head cell under {a} must be a distinct value"
    cols = [star.schema.index(x) for x in S]
    for row in star.body.rows:
        if any(occ[row[c]] != 1 for c in cols):
            return "cells of T* under S must be distinct values"
    T = star.body.project(R)
    if len(T) != len(star.body):
        return "T* must list every row of T once"
    if T.values() != S:
        return f"S must be exactly Val(T): got {by_rank(S)} for {by_rank(T.values())}"
    return R, T


# ===========================================================================
# Rule checks. Each returns None when the line is a correct instance, or a diagnostic.
# ===========================================================================

def _check_premise(line, premises, earlier):
    p = line.just.premise
    if not 0 <= p < len(premises):
        return f"no premise {p}"
    if tuple(line.formula) != (premises[p],):
        return f"formula is not premise {p}"
    return None


def _check_cs(line, premises, earlier):
    shape = star_shape(line.formula[0], set(line.new_attrs))
    if isinstance(shape, str):
        return shape
    R, T = shape
    want = {row_ind(t, R) for t in T.rows}
    rest = line.formula[1:]
    if set(rest) != want or len(rest) != len(want):
        return "CS must list t(A) <= A for exactly the rows t of T"
    return None


def _check_cs_star(line, premises, earlier):
    S = set(line.new_attrs)
    ejds = [c for c in line.formula if isinstance(c, Ejd)]
    inds = [c for c in line.formula if isinstance(c, Ind)]
    up   = [c for c in inds if set(c.rhs) <= S and not set(c.lhs) & S]
    down = [c for c in inds if set(c.lhs) <= S and not set(c.rhs) & S]
    if len(ejds) != 1 or not up or len(up) + len(down) + 1 != len(line.formula):
        return "CS* lists A <= t(A) inds, one ejd and t(A) <= A inds"
    R = up[0].lhs
    if any(c.lhs != R for c in up) or R != tuple(by_rank(set(R))):
        return "every A <= t(A) must list the attributes of R once, in order"
    T = Relation(R, [c.rhs for c in up])
    if len(T) != len(up):
        return "repeated row in CS*"
    if not is_typed_relation(T):
        return "T is not typed"
    if T.values() != S:
        return "new attributes must be exactly Val(T)"
    if set(down) != {row_ind(t, R) for t in T.rows} or len(down) != len(T):
        return "CS* must list t(A) <= A for exactly the rows t of T"
    if set(ejds[0].components) != set(T.rows) or len(ejds[0].components) != len(T):
        return "the ejd must join exactly the rows t(A) of T"
    return None


def _dependency(line, premises, earlier, kind):
    j = line.just
    if j.premise is not None:
        if not 0 <= j.premise < len(premises):
            return f"no premise {j.premise}"
        tau = premises[j.premise]
        return tau if isinstance(tau, kind) else f"premise {j.premise} is not a {kind.__name__.lower()}"
    for c in earlier[j.refs[0]].formula:
        if isinstance(c, kind):
            return c
    return f"line {j.refs[0]} holds no {kind.__name__.lower()}"


def _check_cr(line, premises, earlier, kind):
    tau = _dependency(line, premises, earlier, kind)
    if isinstance(tau, str):
        return tau
    f = line.just.mapping
    R = tau.schema
    missing = tau.values() - set(f)
    if missing:
        return f"valuation undefined on {by_rank(missing)}"
    avail = set(_available(earlier, line.just.refs))
    for s in tau.body.sorted_rows():
        ind = row_ind((f[v] for v in s), R)
        if ind not in avail:
            return f"missing referenced conjunct {','.join(map(str, ind.lhs))} <= {','.join(map(str, R))}"
    if kind is Egd:
        if tuple(line.formula) != (Equality(f[tau.lhs], f[tau.rhs]),):
            return "CR for an egd concludes exactly f(x) = f(y)"
        if line.new_attrs:
            return "CR for an egd introduces no attributes"
        return None
    head_only = by_rank(tau.head.values() - tau.body.values())
    images = [f[v] for v in head_only]
    if len(set(images)) != len(images):
        return "f is not injective on the head-only values"
    if set(images) != set(line.new_attrs):
        return "f must send the head-only values exactly to the new attributes"
    want = {row_ind((f[v] for v in t), R) for t in tau.head.rows}
    if set(line.formula) != want or len(line.formula) != len(want):
        return "CR for a tgd concludes f(t') <= A for exactly the head rows t'"
    return None


def _swap(eq, src, positions, target_forms):
    # EE: rewrite the chosen occurrences of src under the equality eq
    a, b = eq
    for l, r in ind_forms(src):
        seq = list(l + r)
        ok = True
        for p in positions:
            if not 0 <= p < len(seq) or seq[p] not in (a, b):
                ok = False
                break
            seq[p] = b if seq[p] == a else a
        if ok and (tuple(seq[:len(l)]), tuple(seq[len(l):])) in target_forms:
            return True
    return False


def _ee_holds(line, earlier, eq_ref, src_ref):
    target = line.formula[0]
    forms = ind_forms(target)
    eqs  = [e for e in map(as_equality, earlier[eq_ref].formula) if e is not None]
    srcs = [c for c in earlier[src_ref].formula if ind_forms(c)]
    return any(_swap(e, s, line.just.positions, forms) for e in eqs for s in srcs)


def _check_ee(line, premises, earlier):
    j = line.just
    if len(line.formula) != 1 or not ind_forms(line.formula[0]):
        return f"{j.tag} concludes a single ind"
    if len(set(j.positions)) != len(j.positions):
        return "repeated position"
    if line.new_attrs:
        return f"{j.tag} introduces no attributes"
    if j.tag == 'ES':
        ok = _ee_holds(line, earlier, j.refs[0], j.refs[0])
    elif j.tag == 'ET':
        ok = _ee_holds(line, earlier, j.refs[0], j.refs[1]) or _ee_holds(line, earlier, j.refs[1], j.refs[0])
    else:
        ok = _ee_holds(line, earlier, j.refs[0], j.refs[1])
    if j.tag in ('ES', 'ET') and as_equality(line.formula[0]) is None:
        return f"{j.tag} concludes an equality"
    return None if ok else "no equality in the referenced lines rewrites the referenced ind into the conclusion"


def _find_star(avail, T, R):
    for c in avail:
        if isinstance(c, Tgd) and set(R) <= set(c.schema):
            shape = star_shape(c, set(c.schema) - set(R))
            if not isinstance(shape, str) and shape[0] == tuple(R) and shape[1] == T:
                return c
    return None


def _check_head(goal, avail, u):
    R = goal.schema
    if isinstance(goal, Egd):
        if goal.lhs != goal.rhs and not has_equality(avail, goal.lhs, goal.rhs):
            return f"missing referenced equality {goal.lhs} = {goal.rhs}"
        return None
    missing = goal.head.values() - set(u)
    if missing:
        return f"mapping u undefined on {by_rank(missing)}"
    for v in goal.body.values() & goal.head.values():
        if u[v] != v:
            return f"u is not the identity on the shared value {v}"
    inds = set(avail)
    for t in goal.head.sorted_rows():
        ind = row_ind((u[v] for v in t), R)
        if ind not in inds:
            return f"missing referenced conjunct {','.join(map(str, ind.lhs))} <= {','.join(map(str, R))}"
    return None


def _check_ct(line, premises, earlier, kind):
    if len(line.formula) != 1 or not isinstance(line.formula[0], kind):
        return f"{line.just.tag} concludes a single {kind.__name__.lower()}"
    if line.new_attrs:
        return f"{line.just.tag} introduces no attributes"
    goal = line.formula[0]
    avail = _available(earlier, line.just.refs)
    if _find_star(avail, goal.body, goal.schema) is None:
        return "missing referenced (T*, id)[RS] for the body of the conclusion"
    return _check_head(goal, avail, line.just.mapping)


def _check_ct_star(line, premises, earlier):
    if len(line.formula) != 1 or not isinstance(line.formula[0], (Egd, Tgd)):
        return "CT* concludes a single egd or tgd"
    if line.new_attrs:
        return "CT* introduces no attributes"
    goal = line.formula[0]
    if not is_typed(goal):
        return "CT* concludes only typed dependencies"
    R, T = goal.schema, goal.body
    avail = _available(earlier, line.just.refs)
    conj = set(avail)
    for t in T.sorted_rows():
        if row_ind(R, t) not in conj:
            return f"missing referenced conjunct {','.join(map(str, R))} <= {','.join(map(str, t))}"
    if not any(isinstance(c, Ejd) and set(c.components) == set(T.rows) for c in avail):
        return "missing referenced ejd joining the rows of T"
    return _check_head(goal, avail, line.just.mapping)


def _check_and_intro(line, premises, earlier):
    if tuple(line.formula) != tuple(_available(earlier, line.just.refs)):
        return "AndIntro concludes the conjunction of the referenced lines"
    return "AndIntro introduces no attributes" if line.new_attrs else None


def _check_and_elim(line, premises, earlier):
    src = set(earlier[line.just.refs[0]].formula)
    if not set(line.formula) <= src:
        return "AndElim keeps only conjuncts of the referenced line"
    return "AndElim introduces no attributes" if line.new_attrs else None


RULE_CHECKS = {
    'Premise':  _check_premise,
    'CS':       _check_cs,
    'CSstar':   _check_cs_star,
    'CR-tgd':   lambda l, p, e: _check_cr(l, p, e, Tgd),
    'CR-egd':   lambda l, p, e: _check_cr(l, p, e, Egd),
    'CT-tgd':   lambda l, p, e: _check_ct(l, p, e, Tgd),
    'CT-egd':   lambda l, p, e: _check_ct(l, p, e, Egd),
    'CTstar':   _check_ct_star,
    'EE':       _check_ee,
    'ES':       _check_ee,
    'ET':       _check_ee,
    'AndIntro': _check_and_intro,
    'AndElim':  _check_and_elim,
}


def check_rule(line, premises, earlier):
    # Is line a correct rule instance given the premises and the earlier lines?
    # Returns (bool, diagnostic)
    problem = line.just.arity_problem()
    if problem is None and any(not 0 <= j < len(earlier) for j in line.just.refs):
        problem = "references must point to earlier lines"
    if problem is None:
        problem = RULE_CHECKS[line.just.tag](line, premises, earlier)
    return (problem is None), (problem or "ok")


def check_deduction(ded, goal=None):
    # Accept iff every line is a rule instance, new attributes are globally fresh and
    # everything else is introduced before use, the last line states goal, and no
    # attribute of goal was ever new.
    known = set().union(*(attributes(d) for d in ded.premises))
    if goal is not None:
        known |= attributes(goal)
    ever_new = set()
    if not ded.lines:
        return Verdict(False, None, "empty deduction")
    for i, line in enumerate(ded.lines):
        attrs = line.formula.attributes()
        new   = set(line.new_attrs)
        if not new <= attrs:
            return Verdict(False, i, f"new attributes {by_rank(new - attrs)} do not occur in the line")
        if new & known:
            return Verdict(False, i, f"attributes {by_rank(new & known)} declared new but already used")
        if attrs - new - known:
            return Verdict(False, i, f"attributes {by_rank(attrs - new - known)} used before they are introduced")
        ok, message = check_rule(line, ded.premises, ded.lines[:i])
        if not ok:
            return Verdict(False, i, message)
        known |= attrs
        ever_new |= new
    last = len(ded.lines) - 1
    if goal is not None:
        if tuple(ded.lines[-1].formula) != (goal,):
            return Verdict(False, last, "last line does not state the goal")
        if attributes(goal) & ever_new:
            return Verdict(False, last, "the goal mentions a new attribute")
    return Verdict(True, None, "accepted")


def expand_macros(ded):
    # Replace every ES/ET line by the EE line it abbreviates
    lines = []
    for i, line in enumerate(ded.lines):
        j = line.just
        if j.tag in ('ES', 'ET'):
            eq, src = (j.refs[0], j.refs[0]) if j.tag == 'ES' else j.refs
            if j.tag == 'ET' and not _ee_holds(line, ded.lines, eq, src):
                eq, src = src, eq
            line = DeductionLine(line.formula, Justification('EE', (eq, src), positions=j.positions), line.new_attrs)
        lines.append(line)
    return Deduction(ded.premises, lines)
