# Some unit testing, can be run using
# > pytest tests.py

import itertools
from pathlib import Path

import numpy as np
import pytest
from tqdm import tqdm

from relations import Relation, symbol, symbols, minted, by_rank
A, B, C, D = symbols('A B C D')        # intern first so attributes rank in alphabetical order
symbols('z1 z2 z3')

import utils
import models
import textio
import chase
import proofs
import generator
import replay
import edchase
from dependencies import (Egd, Tgd, Ind, Ejd, Equality, Atom, EqualityAtom, find_violation, satisfies,
                          to_dependencies, widen, is_trivial, is_typed, folding, normalize_ed,
                          homomorphisms, distinct_values, DependencyError)
from proofs import Deduction, DeductionLine, Justification, check_deduction, check_rule, row_ind

FIXTURES = Path(__file__).parent / 'fixtures'
PROGRESSBAR = False


def load_example1():
    sf = textio.parse((FIXTURES / 'example1.edc').read_text())
    return sf.named('r').item, sf.named('s1').item, sf.named('s2').item


def emvd_problem():
    deps = textio.parse((FIXTURES / 'emvd_fd.edc').read_text())
    goal = textio.parse((FIXTURES / 'emvd_goal.edc').read_text(), blank_start=deps.next_blank).goal
    return [d.item for d in deps.dependencies()], goal


def fd_chain_problem():
    # A -> C and B -> C; the goal's equated value is rewritten twice
    sf = textio.parse("""
        egd ac over (A,B,C): { (a,b1,c1); (a,b2,c2) } => c1 = c2
        egd bc over (A,B,C): { (a1,b,c1); (a2,b,c2) } => c1 = c2
        goal: egd over (A,B,C): { (a0,b0,z3); (a0,b1,z2); (a1,b1,z1) } => z3 = z1
    """)
    return [d.item for d in sf.dependencies()], sf.goal


_cached_emvd = None
def get_emvd_outcome():
    global _cached_emvd
    if _cached_emvd is None:
        premises, goal = emvd_problem()
        _cached_emvd = chase.run_chase(premises, goal)
    return _cached_emvd


_cached_batch = None
def get_random_batch():
    # Random implication instances: <=3 attributes, <=2 premises, tableaux of <=3 rows
    global _cached_batch
    if _cached_batch is None:
        np.random.seed(42) # Set seed for reproducibility
        _cached_batch = []
        for _ in tqdm(range(120), disable=not PROGRESSBAR, desc='chase'):
            premises, goal = models.random_instance(max_attrs=3, max_deps=2, max_rows=3)
            _cached_batch.append(chase.run_chase(premises, goal, budget=200))
    return _cached_batch


# ***** Relations and dependencies *****

def test_relations():
    r = Relation((B, A), [(1, 2), (1, 2), (3, 4)])
    assert r.schema == (A, B)
    assert len(r) == 2
    assert r == Relation((A, B), [(2, 1), (4, 3)])
    s = Relation((B, C), [(1, 5), (1, 6)])
    j = r.join(s)
    assert j.schema == (A, B, C) and len(j) == 2
    assert len(r.join(Relation((D,), [(7,), (8,)]))) == 4
    assert r.project((B,)) == Relation((B,), [(1,), (3,)])
    assert minted(3).rank > symbol('zzz').rank
    assert by_rank([minted(2), minted(1)]) == [minted(1), minted(2)]


def test_example1_satisfaction():
    r, s1, s2 = load_example1()
    assert len(r) == 4
    assert satisfies(r, s1)
    w = find_violation(r, s2)
    x, y, z = symbols('x y z')
    assert w == {x: symbol('3'), y: symbol('0'), z: symbol('1')}


def test_ind_ejd_semantics():
    r = Relation((A, B), [(0, 1), (1, 1)])
    assert satisfies(r, Ind((B,), (A,)))
    assert not satisfies(r, Ind((A,), (B,)))
    assert find_violation(r, Ind((A,), (B,))).values == (symbol('0'), symbol('1'))
    assert not satisfies(r, Equality(A, B))
    assert satisfies(Relation((A, B), [(2, 2)]), Equality(A, B))
    t = Relation((A, B, C), [(0, 1, 2), (3, 1, 4)])
    ejd = Ejd(((A, B), (B, C)))
    assert not satisfies(t, ejd)
    full = t.add([(0, 1, 4), (3, 1, 2)])
    assert satisfies(full, ejd)
    for rel in (r, Relation((A, B), [(2, 2)])):
        for d in (Ind((B,), (A,)), Ind((A,), (B,)), Ind((A, B), (B, A)), Equality(A, B), Ind((A, A), (A, B))):
            assert satisfies(rel, d) == all(satisfies(rel, x) for x in to_dependencies(d, rel.schema))
    for rel in (t, full):
        assert satisfies(rel, ejd) == all(satisfies(rel, x) for x in to_dependencies(ejd, rel.schema))
    with pytest.raises(DependencyError):
        Ind((A, B), (C,))


def test_widen_keeps_semantics():
    r, s1, s2 = load_example1()
    wide = r.join(Relation((D,), [(0,), (1,)]))
    for s in (s1, s2):
        w = widen(s, (A, B, C, D))
        assert w.schema == (A, B, C, D)
        assert satisfies(wide, w) == satisfies(r, s)


def test_structural_predicates():
    r, s1, s2 = load_example1()
    x, y = symbols('x y')
    assert is_trivial(Egd(Relation((A, B), [(x, y)]), x, x))
    assert not is_trivial(s1)
    assert folding(Tgd(s1.body, s1.body)) is not None
    assert not is_typed(s1)
    premises, goal = emvd_problem()
    assert all(is_typed(d) for d in premises + [goal])


def _homomorphisms_by_enumeration(T, r, wildcards=frozenset()):
    # Every map Val(T) -> Val(r), kept when it sends each row of T into r
    vals = by_rank(T.values())
    found = set()
    for image in itertools.product(by_rank(r.values()), repeat=len(vals)):
        f = dict(zip(vals, image))
        if all(tuple(f[v] for v in row) in r.rows for row in T.rows):
            found.add(frozenset((v, c) for v, c in f.items() if v not in wildcards))
    return found


def test_homomorphisms_match_enumeration():
    np.random.seed(42)
    pool = symbols('x0 x1 x2 x3')
    for _ in tqdm(range(60), disable=not PROGRESSBAR, desc='homomorphisms'):
        schema = (A, B, C)[:np.random.randint(1, 4)]
        T = models.random_tableau(schema, np.random.randint(1, 4), pool)
        r = models.random_tableau(schema, np.random.randint(0, 5), models.domain_symbols(3))
        once = frozenset(v for v, n in T.occurrences().items() if n == 1)
        for wildcards in (frozenset(), once):
            got = [frozenset(f.items()) for f in homomorphisms(T, r, wildcards=wildcards)]
            assert len(got) == len(set(got))
            assert set(got) == _homomorphisms_by_enumeration(T, r, wildcards)


def test_example1_homomorphisms():
    r, s1, s2 = load_example1()
    x, y, z = symbols('x y z')
    got = sorted(homomorphisms(s1.body, r, wildcards=distinct_values(s1)), key=lambda f: f[x].name)
    assert got == [{x: symbol('0'), y: symbol('1'), z: symbol('2')},
                   {x: symbol('3'), y: symbol('0'), z: symbol('1')}]


def test_distinct_values():
    r, s1, s2 = load_example1()
    assert len(distinct_values(s1)) == 2 and all(v.is_blank for v in distinct_values(s1))
    assert len(distinct_values(s2)) == 3 and symbol('a') not in distinct_values(s2)
    x, y, w = symbols('x y w')
    assert distinct_values(Egd(Relation((A, B, C), [(x, y, w)]), x, y)) == {w}
    assert distinct_values(Egd(Relation((A, B), [(x, y)]), x, y)) == set()


def test_trivial_dependencies_hold_everywhere():
    np.random.seed(42)
    schema = (A, B)
    x, y, w, e1 = symbols('x y w e1')
    body = Relation(schema, [(x, y), (y, w)])
    deps = [Egd(body, x, x), Tgd(body, body), Tgd(body, Relation(schema, [(x, e1)]))]
    deps += [d for d in (models.random_dependency(schema) for _ in range(300)) if is_trivial(d)]
    assert all(is_trivial(d) for d in deps)
    for r in models.satisfying_relations([], schema, domain_size=3, max_rows=2):
        for d in deps:
            assert satisfies(r, d)


def test_equality_as_inds():
    for r in models.satisfying_relations([], (A, B), domain_size=3, max_rows=2):
        eq = satisfies(r, Equality(A, B))
        assert eq == satisfies(r, Ind((A, B), (A, A))) == satisfies(r, Ind((A, B), (B, B)))
        assert eq == all(a == b for a, b in r.rows)


def test_ejd_holds_on_single_rows():
    ejds = [Ejd(((A, B), (B, C))), Ejd(((A,), (C,))), Ejd(((A, C), (B,), (C,)))]
    for r in models.satisfying_relations([], (A, B, C), domain_size=2, max_rows=1):
        for j in ejds:
            assert satisfies(r, j)
    assert not satisfies(Relation((A, B, C), [(0, 1, 0), (1, 0, 1)]), Ejd(((A,), (C,))))


def _atom_rows(ed, atoms, f):
    return Relation(ed.schema, [tuple(f[v] for v in a.args) for a in atoms]).rows


def _ed_holds(r, ed):
    # First-order reading of an ed sentence, quantifiers ranging over Val(r)
    dom = by_rank(r.values())
    univ, ex = by_rank(ed.universals), by_rank(ed.existentials)
    head = [a for a in ed.head_atoms if isinstance(a, Atom)]
    equalities = [a for a in ed.head_atoms if isinstance(a, EqualityAtom)]
    for image in itertools.product(dom, repeat=len(univ)):
        f = dict(zip(univ, image))
        if not _atom_rows(ed, ed.body_atoms, f) <= r.rows:
            continue
        if not all(f[a.left] == f[a.right] for a in equalities):
            return False
        if not any(_atom_rows(ed, head, {**f, **dict(zip(ex, more))}) <= r.rows
                   for more in itertools.product(dom, repeat=len(ex))):
            return False
    return True


def test_normalize_ed_keeps_semantics():
    sf = textio.parse("""
        ed m over (A,B): R(x,y) -> exists z: R(y,z), x = y
        ed n over (A,B): R(x,y), R(y,x) -> R(x,x)
        ed p over (A,B): R(x,_) -> exists w: R(w,x)
        ed q over (A,B): R(x,y), R(x,z) -> y = z
    """)
    eds = [d.item for d in sf.dependencies()]
    rels = models.satisfying_relations([], (A, B), domain_size=3, max_rows=3)
    for ed in eds:
        deps = normalize_ed(ed)
        for r in rels:
            assert _ed_holds(r, ed) == all(satisfies(r, d) for d in deps)


def test_normalize_ed():
    sf = textio.parse("ed m over (A,B,C): R(x,y,z), R(_,x,y) -> exists a: R(z,a,x), y = z")
    deps = normalize_ed(sf.dependencies()[0].item)
    assert [type(d) for d in deps] == [Tgd, Egd]
    with pytest.raises(textio.ParseError):
        textio.parse("ed m over (A,B): R(x,y), S(y,x) -> R(x,x), x = q")
    with pytest.raises(DependencyError):
        normalize_ed(textio.parse("ed m over (A,B): R(x,y), S(y,x) -> R(x,x)").dependencies()[0].item)


# ***** numba kernels and small models *****

def test_kernels_match_python():
    np.random.seed(42)
    schema = (A, B)
    rels, counts = models.all_relations(2, 3, 2)
    dom = models.domain_symbols(3)
    for _ in range(40):
        d = models.random_dependency(schema, max_rows=3)
        mask = models.satisfaction_mask(d, schema, rels, counts)
        for i in np.random.choice(len(rels), 25, replace=False):
            r = utils.decode_relation(rels[i], counts[i], schema, dom)
            assert mask[i] == satisfies(r, d)


def test_all_relations():
    rels, counts = models.all_relations(2, 2, 2)
    assert rels.shape == (1 + 4 + 6, 2, 2)
    assert sorted(set(counts.tolist())) == [0, 1, 2]
    assert not rels.flags.writeable


def test_find_countermodel():
    premises, goal = emvd_problem()
    fd = [d for d in premises if isinstance(d, Egd)]
    r = models.find_countermodel(fd, goal, domain_size=2, max_rows=2)
    assert r is not None
    assert all(satisfies(r, d) for d in fd) and not satisfies(r, goal)
    assert models.find_countermodel(premises, goal, domain_size=2, max_rows=3) is None


# ***** Chase *****

def test_chase_emvd():
    outcome = get_emvd_outcome()
    assert outcome.verdict == chase.IMPLIED
    assert [s.kind for s in outcome.trace] == ['tgd', 'egd', 'egd']
    a0, b0, b1, c0, c1, d0, d1 = symbols('a0 b0 b1 c0 c1 d0 d1')
    final = Relation((A, B, C, D), [(a0, b0, c0, d0), (a0, b1, c1, d1), (a0, b0, c1, d1), (a0, b1, c0, d0)])
    assert outcome.state.body == final
    assert is_trivial(outcome.witness)


def test_chase_budget_and_trivial_goal():
    premises, goal = emvd_problem()
    assert chase.run_chase(premises, goal, budget=0).verdict == chase.EXHAUSTED
    x, y = symbols('x y')
    trivial = Egd(Relation((A, B), [(x, y)]), x, x)
    outcome = chase.run_chase([], trivial, budget=0)
    assert outcome.verdict == chase.IMPLIED and outcome.trace == []


def test_chase_rule_preconditions():
    premises, goal = emvd_problem()
    emvd, fd = premises
    state = chase.start(goal, premises)
    assert list(chase.applicable_egd(state, fd)) == []
    fs = chase.applicable_tgd(state, emvd)
    assert len(fs) == 2
    with pytest.raises(chase.ChaseError):
        chase.apply_tgd(state, emvd, fs[:1])
    with pytest.raises(chase.ChaseError):
        chase.apply_egd(state, fd, {v: v for v in fd.body.values()})
    x, y = symbols('x y')
    with pytest.raises(chase.ChaseError):
        chase.run_chase([Egd(Relation((A, B), [(x, y)]), x, y)], goal)


def test_countermodel_extraction():
    premises, goal = emvd_problem()
    fd = [d for d in premises if isinstance(d, Egd)]
    outcome = chase.run_chase(fd, goal)
    assert outcome.verdict == chase.NOT_IMPLIED
    assert outcome.witness == goal.body


def test_emvd_egd_applicability():
    premises, goal = emvd_problem()
    emvd, fd = premises
    state = chase.start(goal, premises)
    state = chase.apply_tgd(state, emvd, chase.applicable_tgd(state, emvd), 0)
    fs = list(chase.applicable_egd(state, fd))
    pairs = {frozenset((f[fd.lhs], f[fd.rhs])) for f in fs}
    assert len(pairs) == 2
    assert sorted(min(p, key=lambda s: s.rank).name for p in pairs) == ['d0', 'd1']
    assert all(max(p, key=lambda s: s.rank).is_minted for p in pairs)
    d0 = symbol('d0')
    after = chase.apply_egd(state, fd, next(f for f in fs if d0 in (f[fd.lhs], f[fd.rhs])), 1)
    old, new = after.log[-1].substitution
    assert new == d0 and old.is_minted and old not in after.body.values()
    assert len(after.body) == len(state.body)


def test_emvd_does_not_imply_fd():
    premises, goal = emvd_problem()
    emvd, fd = premises
    outcome = chase.run_chase([emvd], fd)
    assert outcome.verdict == chase.NOT_IMPLIED
    cm = outcome.witness
    assert satisfies(cm, emvd) and not satisfies(cm, fd)
    c, d = cm.index(C), cm.index(D)
    assert any(s[c] == t[c] and s[d] != t[d] for s, t in itertools.combinations(cm.rows, 2))


def test_chase_trace_invariants():
    for o in get_random_batch() + [get_emvd_outcome(), chase.run_chase(*fd_chain_problem())]:
        mints = [s.rank for step in o.trace for s in step.minted]
        assert mints == sorted(set(mints))
        prev = o.goal
        for step in o.trace:
            if step.kind == 'egd':
                old, new = step.substitution
                assert old.rank > new.rank
                assert old not in step.result.body.values()
            else:
                # egds are saturated before any tgd step
                state = chase.ChaseState(prev)
                for d in o.premises:
                    if isinstance(d, Egd):
                        assert next(chase.applicable_egd(state, d), None) is None
            prev = step.result
        assert (o.verdict == chase.IMPLIED) == is_trivial(prev)


def test_chase_verbose_tags(capsys):
    premises, goal = emvd_problem()
    chase.run_chase(premises, goal, verbose=2)
    out = capsys.readouterr().out
    assert '[Saturated]' in out and '[Trivial]' in out and '[Implied]' in out
    chase.run_chase(premises[1:], goal, verbose=2)
    out = capsys.readouterr().out
    assert '[Stopping]' in out and '[NotImplied]' in out and '[Trivial]' not in out
    chase.run_chase(premises, goal, verbose=1)
    assert capsys.readouterr().out.splitlines() == ["Chase : step=    3 : [Implied]"]


def test_random_batch_countermodels():
    batch = get_random_batch()
    assert len(batch) >= 100
    assert any(o.verdict == chase.NOT_IMPLIED for o in batch)
    for o in batch:
        if o.verdict == chase.NOT_IMPLIED:
            assert all(satisfies(o.witness, d) for d in o.premises)
            assert not satisfies(o.witness, o.goal)


def test_random_batch_soundness():
    batch = get_random_batch()
    implied = [o for o in batch if o.verdict == chase.IMPLIED]
    assert len(implied) > 0
    for o in tqdm(implied, disable=not PROGRESSBAR, desc='soundness'):
        assert models.find_countermodel(o.premises, o.goal, domain_size=4, max_rows=3) is None


# ***** Deductions *****

def test_emvd_deduction():
    outcome = get_emvd_outcome()
    ded = generator.generate_deduction(outcome)
    assert check_deduction(ded, outcome.goal).ok
    tags = [l.just.tag for l in ded.lines]
    assert tags[0] == 'CS' and tags[-1] == 'CT-tgd'
    assert tags.count('CR-tgd') == 2 and tags.count('CR-egd') == 2
    assert 'EE' in tags
    assert max(i for i, t in enumerate(tags) if t == 'CR-tgd') < min(i for i, t in enumerate(tags) if t == 'CR-egd')
    for i, line in enumerate(ded.lines):
        assert check_rule(line, ded.premises, ded.lines[:i])[0]


def test_typed_deduction():
    outcome = get_emvd_outcome()
    ded = generator.generate_typed_deduction(outcome)
    tags = [l.just.tag for l in ded.lines]
    assert tags[0] == 'CSstar' and tags[-1] == 'CTstar'
    assert check_deduction(ded, outcome.goal).ok


def test_typed_generation_rejects_untyped():
    r, s1, s2 = load_example1()
    outcome = chase.run_chase([s1], s1)
    assert outcome.verdict == chase.IMPLIED
    with pytest.raises(generator.UntypedError, match='untyped input'):
        generator.generate_typed_deduction(outcome)
    assert check_deduction(generator.generate_deduction(outcome), s1).ok


def test_trivial_goal_deductions():
    x, y = symbols('x y')
    goal = Egd(Relation((A, B), [(x, y)]), x, x)
    outcome = chase.run_chase([], goal)
    ded = generator.generate_deduction(outcome)
    assert [l.just.tag for l in ded.lines] == ['CS', 'CT-egd']
    assert check_deduction(ded, goal).ok
    ded = generator.generate_typed_deduction(outcome)
    assert [l.just.tag for l in ded.lines] == ['CSstar', 'CTstar']
    assert check_deduction(ded, goal).ok


def test_one_line_deduction():
    r, s1, s2 = load_example1()
    ded = Deduction([s1], [DeductionLine([s1], Justification('Premise', premise=0))])
    assert check_deduction(ded, s1).ok
    assert not check_deduction(ded, s2).ok


def test_fd_chain_and_macros():
    premises, goal = fd_chain_problem()
    outcome = chase.run_chase(premises, goal)
    assert outcome.verdict == chase.IMPLIED
    ded = generator.generate_deduction(outcome)
    assert check_deduction(ded, goal).ok
    assert 'ET' in [l.just.tag for l in ded.lines]
    expanded = proofs.expand_macros(ded)
    assert not {'ES', 'ET'} & {l.just.tag for l in expanded.lines}
    for i, line in enumerate(expanded.lines):
        assert check_rule(line, expanded.premises, expanded.lines[:i])[0]
    assert check_deduction(expanded, goal).ok


def test_fd_transitivity():
    sf = textio.parse("""
        egd ab over (A,B,C): { (a,b1,c1); (a,b2,c2) } => b1 = b2
        egd bc over (A,B,C): { (a1,b,c1); (a2,b,c2) } => c1 = c2
        goal: egd over (A,B,C): { (a,b1,c1); (a,b2,c2) } => c1 = c2
    """)
    premises = [d.item for d in sf.dependencies()]
    outcome = chase.run_chase(premises, sf.goal)
    assert outcome.verdict == chase.IMPLIED
    assert check_deduction(generator.generate_deduction(outcome), sf.goal).ok


def test_freshness_violation_rejected():
    outcome = get_emvd_outcome()
    ded = generator.generate_deduction(outcome)
    clash = Deduction(ded.premises + (Ind((A,), (symbol('a0'),)),), ded.lines)
    v = check_deduction(clash, outcome.goal)
    assert not v.ok and v.line == 0


def test_cs_star_needs_typed_tableau():
    x, y = symbols('x y')
    rows = [(x, y), (y, x)]
    conj = [row_ind((A, B), t) for t in rows] + [Ejd(tuple(rows))] + [row_ind(t, (A, B)) for t in rows]
    ok, message = check_rule(DeductionLine(conj, Justification('CSstar'), {x, y}), [], [])
    assert not ok and 'typed' in message


def test_cs_star_unsound_on_untyped():
    x, y = symbols('x y')
    r = Relation((A, B), [(0, 1)])
    pool = [symbol('0'), symbol('1'), symbol('fresh0')]
    untyped = [row_ind((x, y), (A, B)), row_ind((y, x), (A, B))]
    assert replay.search_extension(r, (x, y), untyped, pool) is None
    assert replay.search_extension(r, (x, y), untyped[:1], pool) is not None


def test_ct_star_needs_typed_conclusion():
    outcome = get_emvd_outcome()
    ded = generator.generate_typed_deduction(outcome)
    last, goal = ded.lines[-1], outcome.goal
    assert check_rule(last, ded.premises, ded.lines[:-1])[0]
    a0, c1, d1 = symbols('a0 c1 d1')
    untyped = Tgd(goal.body, Relation(goal.schema, [(a0, a0, c1, d1)]))
    ok, message = check_rule(DeductionLine([untyped], last.just, last.new_attrs), ded.premises, ded.lines[:-1])
    assert not ok and 'typed' in message
    lines = ded.lines[:-1] + (DeductionLine([untyped], last.just, last.new_attrs),)
    assert not check_deduction(Deduction(ded.premises, lines), untyped).ok


def _deduction_corpus():
    outs = [o for o in get_random_batch() if o.verdict == chase.IMPLIED]
    outs = outs + [get_emvd_outcome(), chase.run_chase(*fd_chain_problem())]
    return [(o, generator.generate_deduction(o)) for o in outs]


def test_random_batch_deductions():
    for o, ded in _deduction_corpus():
        v = check_deduction(ded, o.goal)
        assert v.ok, v.message


def test_proof_mutations_rejected():
    for o, ded in tqdm(_deduction_corpus(), disable=not PROGRESSBAR, desc='mutations'):
        text = textio.serialize_proof(ded, o.goal)
        records = text.splitlines(keepends=True)
        # Deleting or swapping records of a proof document
        for k in range(1, len(records)):
            mutated = ''.join(records[:k] + records[k + 1:])
            try:
                bad, goal = textio.parse_proof(mutated)
            except textio.ParseError:
                continue
            assert not check_deduction(bad, goal).ok
        for i, j in itertools.combinations(range(1, len(records)), 2):
            swapped = list(records)
            swapped[i], swapped[j] = swapped[j], swapped[i]
            with pytest.raises(textio.ParseError):
                textio.parse_proof(''.join(swapped))
        # New attributes colliding with an existing attribute
        known = o.goal.schema[0]
        for i, line in enumerate(ded.lines):
            for a in line.new_attrs:
                lines = list(ded.lines)
                lines[i] = DeductionLine(line.formula, line.just, (line.new_attrs - {a}) | {known})
                assert not check_deduction(Deduction(ded.premises, lines), o.goal).ok
        # Ind conjuncts deleted
        for i, line in enumerate(ded.lines):
            if len(line.formula) < 2:
                continue
            for k, c in enumerate(line.formula):
                if isinstance(c, Ind):
                    lines = list(ded.lines)
                    lines[i] = DeductionLine(line.formula[:k] + line.formula[k + 1:], line.just, line.new_attrs)
                    assert not check_deduction(Deduction(ded.premises, lines), o.goal).ok
        # The opening line cannot be dropped
        lines = [DeductionLine(l.formula, Justification(l.just.tag, tuple(max(r - 1, 0) for r in l.just.refs),
                                                        l.just.premise, l.just.valuation, l.just.positions),
                               l.new_attrs) for l in ded.lines[1:]]
        assert not check_deduction(Deduction(ded.premises, lines), o.goal).ok


# ***** Replay *****

def test_replay_chase_start_on_example1():
    r, s1, s2 = load_example1()
    outcome = chase.run_chase([s1], s1)
    ded = generator.generate_deduction(outcome)
    rep = replay.replay_deduction(r, ded)
    assert rep.skipped == ()
    xyz = symbols('x y z')
    assert rep.relation.project(xyz) == Relation(xyz, [(0, 1, 2), (3, 0, 1)])
    assert rep.relation.project((A, B, C)) == r


def test_replay_conjunction_rules_only():
    r, s1, s2 = load_example1()
    lines = [DeductionLine([s1], Justification('Premise', premise=0)),
             DeductionLine([s1], Justification('AndIntro', (0,)))]
    assert replay.replay_deduction(r, Deduction([s1], lines)).relation == r


def test_replay_emvd():
    outcome = get_emvd_outcome()
    ded = generator.generate_deduction(outcome)
    rels = [r for r in models.satisfying_relations(outcome.premises, outcome.goal.schema, domain_size=2, max_rows=4)
            if len(r) == 4]
    assert len(rels) > 0
    for r in rels[:20]:
        rep = replay.replay_deduction(r, ded)
        assert rep.skipped == ()
        assert satisfies(r, outcome.goal)
        typed = replay.replay_deduction(r, generator.generate_typed_deduction(outcome))
        assert typed.skipped == ()


def test_replay_rejects_bad_relation():
    r, s1, s2 = load_example1()
    outcome = chase.run_chase([s2], s2)
    with pytest.raises(replay.ReplayError):
        replay.replay_deduction(r, generator.generate_deduction(outcome))


def test_random_batch_replay():
    for o, ded in tqdm(_deduction_corpus(), disable=not PROGRESSBAR, desc='replay'):
        for r in models.satisfying_relations(o.premises, o.goal.schema, domain_size=3, max_rows=2):
            replay.replay_deduction(r, ded)
            assert satisfies(r, o.goal)


# ***** Text formats *****

def test_parse_examples():
    sf = textio.parse((FIXTURES / 'example1.edc').read_text())
    assert [d.kind for d in sf.declarations] == ['relation', 'tgd', 'tgd']
    assert len(sf.relations()[0].item) == 4
    assert textio.parse('').declarations == ()
    assert textio.parse('# only a comment\n').declarations == ()
    for name in ('emvd_fd.edc', 'emvd_goal.edc', 'example1_goal.edc'):
        textio.parse((FIXTURES / name).read_text())


@pytest.mark.parametrize('text, line', [
    ('ind: A B <= C', 1),
    ('relation r(A,B) { (0,1); }\nind: A <= Q', 2),
    ('tgd s over (A,B): { (x,y) } => { (y,x) }\ntgd s over (A,B): { (x,y) } => { (x,x) }', 2),
    ('relation r(A,B) {\n (0,1,2); }', 2),
    ('tgd s over (A): { (x$) } => { (x) }', 1),
    ('relation r(A) { (@1); }', 1),
    ('egd e over (A,B): { (x,y) } => x = q', 1),
    ('goal: missing', 1),
])
def test_parse_errors(text, line):
    with pytest.raises(textio.ParseError) as e:
        textio.parse(text)
    assert e.value.line == line and e.value.col >= 1


def _shape(item):
    # Structure of a declared item with blank symbols anonymized
    def cells(t):
        return sorted(tuple('_' if v.is_blank else v.name for v in row) for row in t.rows)
    if isinstance(item, Relation):
        return ('relation', item.schema, cells(item))
    if isinstance(item, Tgd):
        return ('tgd', item.schema, cells(item.body), cells(item.head))
    if isinstance(item, Egd):
        return ('egd', item.schema, cells(item.body), item.lhs.name, item.rhs.name)
    return item


def _random_file(i):
    schema = symbols('A B C D'.split()[:np.random.randint(1, 5)])
    decls = []
    for k in range(np.random.randint(0, 6)):
        kind = np.random.randint(0, 4)
        if kind == 0:
            item = models.random_tableau(schema, np.random.randint(0, 5), models.domain_symbols(4))
            decls.append(textio.Declaration('relation', f'r{k}', item, 0, 0))
        elif kind == 1:
            d = models.random_dependency(schema, max_rows=4)
            if np.random.rand() < 0.5:
                d = widen(d, symbols('A B C D E'))
            decls.append(textio.Declaration('egd' if isinstance(d, Egd) else 'tgd', f'd{k}', d, 0, 0))
        elif kind == 2:
            n = np.random.randint(1, len(schema) + 1)
            lhs = [schema[j] for j in np.random.randint(0, len(schema), n)]
            rhs = [schema[j] for j in np.random.randint(0, len(schema), n)]
            decls.append(textio.Declaration('ind', f'i{k}', Ind(lhs, rhs), 0, 0))
        else:
            comps = tuple(tuple(dict.fromkeys(schema[j] for j in np.random.randint(0, len(schema), 2)))
                          for _ in range(np.random.randint(1, 3)))
            decls.append(textio.Declaration('ejd', f'j{k}', Ejd(comps), 0, 0))
    decls.append(textio.Declaration('relation', 'header', Relation(symbols('A B C D E'), []), 0, 0))
    return textio.SourceFile(tuple(decls))


def test_parser_round_trip():
    np.random.seed(42)
    for i in tqdm(range(200), disable=not PROGRESSBAR, desc='round trip'):
        sf = _random_file(i)
        text = textio.serialize(sf)
        back = textio.parse(text)
        assert [(d.kind, d.name) for d in back.declarations] == [(d.kind, d.name) for d in sf.declarations]
        assert [_shape(d.item) for d in back.declarations] == [_shape(d.item) for d in sf.declarations]
        assert textio.serialize(sf) == text


def test_ed_round_trip():
    text = "ed m over (A,B,C): R(x,y,z), R(_,x,y) -> exists a: R(z,a,x), y = z\n"
    sf = textio.parse(text)
    again = textio.parse(textio.serialize(sf))
    assert [_shape(d) for d in normalize_ed(again.dependencies()[0].item)] == \
           [_shape(d) for d in normalize_ed(sf.dependencies()[0].item)]
    assert textio.serialize(again).startswith('ed m over (A,B,C): R(x,y,z), R(_,x,y) -> exists a: ')


def test_relation_text_parses_back():
    sf = textio.parse("relation r(A,B) { (_,1); (_2,_2); (n1,_); }")
    r = sf.relations()[0].item
    assert len(r) == 3 and sum(v.is_blank for v in r.values()) == 3
    back = textio.parse(textio.serialize(sf)).relations()[0].item
    assert sorted(back.occurrences().values()) == sorted(r.occurrences().values())
    # minted symbols get fresh plain names
    n1 = symbol('n1')
    wide = r.add([(minted(1), n1), (minted(2), minted(1))])
    text = textio.relation_text('r', wide)
    assert '@' not in text and '?' not in text
    back = textio.parse(text).relations()[0].item
    assert len(back) == len(wide)
    assert sorted(back.occurrences().values()) == sorted(wide.occurrences().values())
    assert n1 in back.values() and symbol('1') in back.values()
    assert '@1' in textio.relation_text('r', wide, raw=True)


def test_proof_document_round_trip():
    outcome = get_emvd_outcome()
    for gen in (generator.generate_deduction, generator.generate_typed_deduction):
        ded = gen(outcome)
        text = textio.serialize_proof(ded, outcome.goal)
        back, goal = textio.parse_proof(text)
        assert back == ded and goal == outcome.goal
        assert check_deduction(back, goal).ok
    records = text.splitlines()
    assert '"rule": "CSstar"' in records[1] and '"rule": "CTstar"' in records[-1]
    plain = textio.serialize_proof(generator.generate_deduction(outcome)).splitlines()
    assert '"rule": "CS"' in plain[1] and '"rule": "CT-tgd"' in plain[-1]


def test_trace_document():
    outcome = get_emvd_outcome()
    snapshots = textio.parse_trace(textio.serialize_trace(outcome))
    assert len(snapshots) == len(outcome.trace) + 1
    assert snapshots[0] == outcome.goal
    assert snapshots[-1] == outcome.state.current


def test_determinism():
    premises, goal = emvd_problem()
    runs = []
    for _ in range(2):
        outcome = chase.run_chase(premises, goal)
        runs.append((textio.serialize_trace(outcome), textio.serialize_proof(generator.generate_deduction(outcome))))
    assert runs[0] == runs[1]
    r, s1, s2 = load_example1()
    texts = [textio.serialize_trace(chase.run_chase([s1], s2, budget=50)) for _ in range(2)]
    assert texts[0] == texts[1]


# ***** Command line *****

def run_cli(argv, capsys):
    code = edchase.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_prove_and_verify(tmp_path, capsys):
    sigma, goal = FIXTURES / 'emvd_fd.edc', FIXTURES / 'emvd_goal.edc'
    proof, trace = tmp_path / 'emvd.edp', tmp_path / 'emvd.trace'
    code, out, err = run_cli(['prove', '-s', sigma, '-g', goal, '--emit-proof', proof, '--emit-trace', trace], capsys)
    assert code == 0 and out.startswith('Implied')
    assert len(trace.read_text().splitlines()) == 5
    code, out, err = run_cli(['verify', '-s', sigma, '-p', proof, '-g', goal], capsys)
    assert code == 0 and 'accepted' in out
    typed = tmp_path / 'typed.edp'
    assert run_cli(['prove', '-s', sigma, '-g', goal, '--typed', '--emit-proof', typed], capsys)[0] == 0
    assert run_cli(['verify', '-s', sigma, '-p', typed, '-g', goal], capsys)[0] == 0


def test_cli_verify_rejects_tampered_proof(tmp_path, capsys):
    sigma, goal = FIXTURES / 'emvd_fd.edc', FIXTURES / 'emvd_goal.edc'
    proof = tmp_path / 'emvd.edp'
    run_cli(['prove', '-s', sigma, '-g', goal, '--emit-proof', proof], capsys)
    records = proof.read_text().splitlines(keepends=True)
    proof.write_text(''.join(records[:-1]))
    code, out, err = run_cli(['verify', '-s', sigma, '-p', proof, '-g', goal], capsys)
    assert code == 1 and 'rejected' in out


def test_cli_check_model(capsys):
    ex1 = FIXTURES / 'example1.edc'
    code, out, err = run_cli(['check-model', '-r', ex1, '-d', ex1], capsys)
    assert code == 1
    assert 's1: satisfied' in out
    line = [l for l in out.splitlines() if l.startswith('s2:')][0]
    assert 'violated' in line and all(p in line for p in ('(x,3)', '(y,0)', '(z,1)'))


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    sigma, goal = FIXTURES / 'emvd_fd.edc', FIXTURES / 'emvd_goal.edc'
    assert run_cli(['prove', '-s', sigma, '-g', goal, '--max-steps', 0], capsys)[0] == 2
    monkeypatch.setenv('EDCHASE_MAX_STEPS', '0')
    assert run_cli(['prove', '-s', sigma, '-g', goal], capsys)[0] == 2
    monkeypatch.delenv('EDCHASE_MAX_STEPS')

    fd = tmp_path / 'fd.edc'
    fd.write_text("egd fd over (A,B,C,D): { (a0,b0,c0,d0); (a1,b1,c0,d1) } => d0 = d1\n")
    code, out, err = run_cli(['prove', '-s', fd, '-g', goal], capsys)
    assert code == 1 and 'NotImplied' in out and 'relation countermodel' in out
    assert run_cli(['countermodel', '-s', fd, '-g', goal], capsys)[0] == 0
    assert run_cli(['countermodel', '-s', sigma, '-g', goal], capsys)[0] == 1

    code, out, err = run_cli(['chase', '-s', sigma, '-g', goal], capsys)
    assert code == 0 and len(out.splitlines()) == 5

    bad = tmp_path / 'bad.edc'
    bad.write_text("tgd s over (A,B): { (x,y) } => { (y) }\n")
    code, out, err = run_cli(['prove', '-s', bad, '-g', goal], capsys)
    assert code == 65 and f"{bad}:1:" in err

    ex1, ex1_goal = FIXTURES / 'example1.edc', FIXTURES / 'example1_goal.edc'
    assert run_cli(['prove', '-s', ex1, '-g', ex1_goal, '--typed'], capsys)[0] == 65

    with pytest.raises(SystemExit) as e:
        edchase.main([])
    assert e.value.code == 64
    with pytest.raises(SystemExit) as e:
        edchase.main(['prove', '-s', str(sigma)])
    assert e.value.code == 64


def test_cli_normalize(tmp_path, capsys):
    f = tmp_path / 'inds.edc'
    f.write_text("relation r(A,B,C) { }\nind i: A B <= B C\nejd j: join (A,B)(B,C)\n")
    code, out, err = run_cli(['normalize', '-d', f], capsys)
    assert code == 0
    names = [l.split()[1] for l in out.splitlines()]
    assert names == ['i_1', 'j_1']
    for l in out.splitlines():
        textio.parse(l)


def test_cli_countermodel_is_a_source_file(tmp_path, capsys):
    sigma, goal, cm = tmp_path / 'sigma.edc', tmp_path / 'goal.edc', tmp_path / 'cm.edc'
    sigma.write_text("tgd t over (A,B): { (x,y) } => { (x,w); (w,w) }\n")
    goal.write_text("egd e over (A,B): { (x,y) } => x = y\n")
    code, out, err = run_cli(['prove', '-s', sigma, '-g', goal], capsys)
    assert code == 1 and out.startswith('NotImplied') and '@' not in out
    cm.write_text(out.split('\n', 1)[1])
    code, out, err = run_cli(['check-model', '-r', cm, '-d', sigma], capsys)
    assert code == 0 and 't: satisfied' in out
    code, out, err = run_cli(['check-model', '-r', cm, '-d', goal], capsys)
    assert code == 1 and 'e: violated' in out


def test_cli_attributes_named_like_variables(tmp_path, capsys):
    v1, v2 = symbols('v1 v2')
    deps = to_dependencies(Ind((v1,), (v2,)), (v1, v2))
    assert not set().union(*(d.values() for d in deps)) & {v1, v2}
    outcome = chase.run_chase(deps, deps[-1])
    assert outcome.verdict == chase.IMPLIED
    assert check_deduction(generator.generate_deduction(outcome), deps[-1]).ok
    f, proof = tmp_path / 'ind.edc', tmp_path / 'ind.edp'
    f.write_text("relation r(v1,v2) { }\nind i: v1 <= v2\n")
    assert run_cli(['prove', '-s', f, '-g', f, '--emit-proof', proof], capsys)[0] == 0
    assert run_cli(['verify', '-s', f, '-p', proof, '-g', f], capsys)[0] == 0


def test_cli_rejects_invalid_utf8(tmp_path, capsys):
    goal = FIXTURES / 'emvd_goal.edc'
    bad = tmp_path / 'latin1.edc'
    bad.write_bytes(b"# A -> B\ntgd s over (A,B): { (x,\xe9) } => { (y,x) }\n")
    code, out, err = run_cli(['prove', '-s', bad, '-g', goal], capsys)
    assert code == 65 and f"{bad}:2:24:" in err and 'UTF-8' in err
