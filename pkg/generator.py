# Turn an Implied chase into a deduction of the goal from the premises.
#
# The deduction opens with the Chase Start axiom for the goal's body (CS, or CS* in
# typed mode), follows every chase step with one CR line per tgd extension or one
# CR line per egd equality, rewrites inds along the egd equalities with EE when a
# later line needs the current form of a row, and closes with Chase Termination
# (CT or CT*). Rows and equalities are derived lazily, only when some line needs them.

import config
from relations import Relation, minted, by_rank
from dependencies import Egd, Tgd, Ejd, Equality, attributes, folding, is_typed
from chase import IMPLIED
from proofs import Deduction, DeductionLine, Justification, row_ind, is_typed_relation


class UntypedError(ValueError):
    pass


class DeductionBuilder(object):
    def __init__(self, outcome, premises, goal, typed=False, verbose=config.VERBOSE):
        assert outcome.verdict == IMPLIED, "deductions are generated from Implied chases only"
        self.outcome  = outcome
        self.premises = list(premises)
        self.goal     = goal
        self.typed    = typed
        self.verbose  = verbose
        self.R        = goal.schema
        self.lines    = []
        self.derived  = {}   # row -> line holding row(A) <= A
        self.lineage  = {}   # current row -> (ancestor row with a line, position in history)
        self.history  = []   # (replaced, replacement, line of the equality) per egd step
        self.equalities = {} # symbol v -> line of v = rho(v)
        self.next_mint = max(0, outcome.state.fresh_floor - config.MINT_BASE) + 1

    def msg(self, s):
        print(f"{self.__class__.__name__} : line={len(self.lines):4d} : " + s)

    def emit(self, formula, tag, refs=(), premise=None, valuation=(), positions=(), new=()):
        self.lines.append(DeductionLine(formula, Justification(tag, tuple(refs), premise, valuation, positions), new))
        if self.verbose > 1:
            self.msg(f"[{tag}] refs={tuple(refs)}")
        return len(self.lines) - 1

    # ***** opening *****

    def open(self):
        T = self.goal.body
        S = by_rank(T.values())
        clash = set(S) & (set(self.R) | set().union(*(attributes(d) for d in self.premises)))
        if clash:
            raise ValueError(f"goal values {by_rank(clash)} are also attribute names; rename them")
        rows = T.sorted_rows()
        if self.typed:
            if not rows:
                raise UntypedError("typed deductions need a goal with a nonempty body")
            conj = [row_ind(self.R, t) for t in rows] + [Ejd(tuple(rows))] + [row_ind(t, self.R) for t in rows]
            line = self.emit(conj, 'CSstar', new=S)
        else:
            star_rows = []
            for t in rows:
                star_rows.append(t + tuple(self._mint() for _ in S))
            schema = tuple(self.R) + tuple(S)
            star = Tgd(Relation(schema, star_rows), Relation(schema, [schema]))
            line = self.emit([star] + [row_ind(t, self.R) for t in rows], 'CS', new=S)
        for t in rows:
            self.derived[t] = line
            self.lineage[t] = (t, 0)
        self.opening = line

    def _mint(self):
        s = minted(self.next_mint)
        self.next_mint += 1
        return s

    # ***** rows and equalities on demand *****

    def ensure(self, row):
        # Line index of row(A) <= A for a row of the current tableau, rewriting an
        # ancestor along later egd equalities when needed
        if row in self.derived:
            return self.derived[row]
        cur, pos = self.lineage[row]
        line = self.derived[cur]
        for old, new, eq in self.history[pos:]:
            if old not in cur:
                continue
            positions = tuple(i for i, v in enumerate(cur) if v == old)
            cur = tuple(new if v == old else v for v in cur)
            if cur not in self.derived:
                self.derived[cur] = self.emit([row_ind(cur, self.R)], 'EE', (eq, line), positions=positions)
            line = self.derived[cur]
        assert cur == row, "row lineage does not reach the current row"
        self.lineage[row] = (row, len(self.history))
        return line

    def equality(self, v):
        # Line index of v = rho(v), composing the egd equalities along v's path with ET.
        # None when rho(v) = v.
        if v in self.equalities:
            return self.equalities[v]
        cur, acc = v, None
        for old, new, eq in self.history:
            if cur != old:
                continue
            if acc is None:
                acc = eq
            else:
                acc = self.emit([Equality(v, new)], 'ET', (acc, eq), positions=(0, 2, 3))
            cur = new
        self.equalities[v] = acc
        return acc

    # ***** chase steps *****

    def tgd_step(self, step):
        tau = self.premises[step.dependency_index]
        body_vals = tau.body.values()
        head_only = by_rank(tau.head.values() - body_vals)
        new_rows = []
        for ext in step.extensions:
            refs = sorted({self.ensure(tuple(ext[v] for v in s)) for s in tau.body.sorted_rows()})
            conj = list(dict.fromkeys(row_ind((ext[v] for v in t), self.R) for t in tau.head.sorted_rows()))
            line = self.emit(conj, 'CR-tgd', refs, step.dependency_index, ext, new=[ext[v] for v in head_only])
            new_rows.extend((c.lhs, line) for c in conj)
        for row, line in new_rows:
            self.derived.setdefault(row, line)
            self.lineage.setdefault(row, (row, len(self.history)))

    def egd_step(self, step):
        tau = self.premises[step.dependency_index]
        f = step.valuation
        refs = sorted({self.ensure(tuple(f[v] for v in s)) for s in tau.body.sorted_rows()})
        line = self.emit([Equality(f[tau.lhs], f[tau.rhs])], 'CR-egd', refs, step.dependency_index, f)
        old, new = step.substitution
        self.history.append((old, new, line))
        lineage = {}
        for row in sorted(self.lineage, key=lambda r: tuple(v.rank for v in r)):
            lineage.setdefault(tuple(new if v == old else v for v in row), self.lineage[row])
        self.lineage = lineage

    # ***** closing *****

    def close(self):
        goal, state = self.goal, self.outcome.state
        tag = 'CTstar' if self.typed else ('CT-egd' if isinstance(goal, Egd) else 'CT-tgd')
        refs = [self.opening]
        if isinstance(goal, Egd):
            x, y = goal.lhs, goal.rhs
            if x != y:
                ex, ey = self.equality(x), self.equality(y)
                if ex is None:
                    refs.append(ey)
                elif ey is None:
                    refs.append(ex)
                else:
                    refs.append(self.emit([Equality(x, y)], 'ET', (ex, ey), positions=(0, 2, 3)))
            return self.emit([goal], tag, refs)
        h = folding(state.current)
        shared = goal.body.values() & goal.head.values()
        for t in goal.head.sorted_rows():
            cur = tuple(h[state.rho_of(v)] for v in t)
            line = self.ensure(cur)
            for v in by_rank({v for v in t if v in shared and state.rho_of(v) != v}):
                positions = tuple(i for i, w in enumerate(t) if w == v)
                cur = tuple(v if i in positions else c for i, c in enumerate(cur))
                if cur not in self.derived:
                    self.derived[cur] = self.emit([row_ind(cur, self.R)], 'EE', (self.equality(v), line),
                                                  positions=positions)
                line = self.derived[cur]
            refs.append(line)
        u = {v: (v if v in shared else h[v]) for v in goal.head.values()}
        return self.emit([goal], tag, sorted(set(refs)), valuation=u)

    def build(self):
        self.open()
        for step in self.outcome.trace:
            if step.kind == 'tgd':
                self.tgd_step(step)
            else:
                self.egd_step(step)
        self.close()
        if self.verbose:
            self.msg(f"[Done] {len(self.lines)} lines from {len(self.outcome.trace)} chase steps")
        return Deduction(self.premises, self.lines)


def generate_deduction(outcome, premises=None, goal=None, verbose=config.VERBOSE):
    # Deduction of goal from premises following an Implied chase outcome
    premises = outcome.premises if premises is None else premises
    goal = outcome.goal if goal is None else goal
    return DeductionBuilder(outcome, premises, goal, verbose=verbose).build()


def generate_typed_deduction(outcome, premises=None, goal=None, verbose=config.VERBOSE):
    # Same as generate_deduction, opening with CS* and closing with CT*
    premises = outcome.premises if premises is None else premises
    goal = outcome.goal if goal is None else goal
    for i, d in enumerate(list(premises) + [goal]):
        if not is_typed(d):
            which = 'goal' if i == len(premises) else f'premise {i}'
            raise UntypedError(f"untyped input: {which} is not typed")
    assert is_typed_relation(goal.body)
    return DeductionBuilder(outcome, premises, goal, typed=True, verbose=verbose).build()
