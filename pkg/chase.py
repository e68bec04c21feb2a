# The chase: rewrite a goal dependency with the egd and tgd rules of a premise set
# until it becomes trivial (the premises imply it), no rule applies any more (the
# final body is a countermodel), or the step budget runs out.
from collections import namedtuple
from dataclasses import dataclass, field

import config
from relations import minted, by_rank
from dependencies import Egd, Tgd, Target, homomorphisms, is_trivial, find_violation, symbols_of


class ChaseError(ValueError):          # a rule was applied outside its precondition
    pass

class InconsistencyError(RuntimeError):  # an extracted countermodel failed its recheck
    pass


IMPLIED, NOT_IMPLIED, EXHAUSTED = 'Implied', 'NotImplied', 'Exhausted'


# One rule application.
#   kind             : 'egd' or 'tgd'
#   dependency_index : position of the applied dependency in the premise list
#   valuation        : the f applied (egd), None for tgd steps
#   substitution     : (replaced, replacement) for egd steps
#   extensions       : f'_1 ... f'_m for tgd steps, each defined on body and head values
#   minted           : fresh symbols introduced by the step
#   result           : the dependency after the step
ChaseStep = namedtuple('ChaseStep', ['kind', 'dependency_index', 'valuation', 'substitution',
                                     'extensions', 'minted', 'result'])

ChaseOutcome = namedtuple('ChaseOutcome', ['verdict', 'trace', 'witness', 'state', 'premises', 'goal'])


@dataclass(frozen=True, eq=False)
class ChaseState:
    current: object                 # sigma_n, an Egd or Tgd
    rho: dict = field(default_factory=dict)   # composed substitutions, identity when absent
    step_index: int = 0
    fresh_floor: int = 0            # rank watermark: minted symbols rank above it
    log: tuple = ()

    @property
    def body(self):
        return self.current.body

    def rho_of(self, v):
        return self.rho.get(v, v)


def start(goal, premises=()):
    syms = set(symbols_of(goal)).union(*(symbols_of(d) for d in premises))
    return ChaseState(goal, {}, 0, max((s.rank for s in syms), default=0))


def _next_mint(state):
    return max(0, state.fresh_floor - config.MINT_BASE) + 1


def _check_schema(state, tau):
    if tau.schema != state.body.schema:
        raise ChaseError(f"dependency over {tau.schema} applied to a tableau over {state.body.schema}")


# ***** egd rule *****

def applicable_egd(state, tau):
    # Valuations embedding tau's tableau into the current body without equating x and y
    _check_schema(state, tau)
    for f in homomorphisms(tau.body, Target(state.body, tau.schema)):
        if f[tau.lhs] != f[tau.rhs]:
            yield f


def apply_egd(state, tau, f, index=None):
    # Replace the rank-larger of f(x), f(y) by the smaller everywhere, goal pair included
    _check_schema(state, tau)
    if not all(tuple(f.get(v) for v in row) in state.body.rows for row in tau.body.rows):
        raise ChaseError("valuation does not embed the egd tableau into the current body")
    a, b = f[tau.lhs], f[tau.rhs]
    if a == b:
        raise ChaseError(f"valuation already equates {tau.lhs} and {tau.rhs}")
    old, new = (a, b) if b.rank < a.rank else (b, a)
    g = {old: new}
    current = state.current.apply(g)
    rho = {k: (new if v == old else v) for k, v in state.rho.items()}
    rho.setdefault(old, new)
    step = ChaseStep('egd', index, dict(f), (old, new), (), (), current)
    return ChaseState(current, rho, state.step_index + 1, state.fresh_floor, state.log + (step,))


# ***** tgd rule *****

def applicable_tgd(state, tau):
    # All valuations embedding tau's body into the current body with no extension
    # embedding its head as well
    _check_schema(state, tau)
    target   = Target(state.body, tau.schema)
    frontier = tau.body.values() & tau.head.values()
    out = []
    for f in homomorphisms(tau.body, target):
        if next(homomorphisms(tau.head, target, {v: f[v] for v in frontier}), None) is None:
            out.append(f)
    return out


def apply_tgd(state, tau, fs, index=None):
    # Add one distinct extension of every applicable valuation at once. Head-only values
    # get fresh symbols, pairwise distinct and never shared between extensions.
    if not fs:
        raise ChaseError("the tgd rule needs at least one applicable valuation")
    if fs != applicable_tgd(state, tau):
        raise ChaseError("the tgd rule must be given exactly the applicable valuations")
    head_only = by_rank(tau.head.values() - tau.body.values())
    k = _next_mint(state)
    extensions, fresh, rows = [], [], []
    for f in fs:
        ext = dict(f)
        for v in head_only:
            ext[v] = minted(k)
            fresh.append(ext[v])
            k += 1
        extensions.append(ext)
        rows.extend(tau.head.apply(ext).rows)
    body = state.body.add(rows)
    if isinstance(state.current, Tgd):
        current = Tgd(body, state.current.head)
    else:
        current = Egd(body, state.current.lhs, state.current.rhs)
    floor = fresh[-1].rank if fresh else state.fresh_floor
    step = ChaseStep('tgd', index, None, None, tuple(extensions), tuple(fresh), current)
    return ChaseState(current, state.rho, state.step_index + 1, floor, state.log + (step,))


# ***** driver *****

def run_chase(premises, goal, budget=None, verbose=config.VERBOSE):
    # Chase goal with premises. Egds are saturated before any tgd is applied; tgds take
    # turns round-robin in declaration order; triviality is tested before the first
    # step and after every step.
    # Arguments:
    #   premises (list)  : egds and tgds over the goal's schema
    #   goal (Egd|Tgd)   : dependency to decide
    #   budget (int)     : maximum number of rule applications (config.MAX_STEPS if None)
    #   verbose (int)    : 0 silent, 1 verdict, 2 every step
    # Returns:
    #   ChaseOutcome with verdict IMPLIED (witness: trivial sigma_n), NOT_IMPLIED
    #   (witness: countermodel) or EXHAUSTED (witness: budget report)
    budget = config.MAX_STEPS if budget is None else budget
    assert budget >= 0, "budget must be non-negative"
    premises = list(premises)
    for d in premises:
        if d.schema != goal.schema:
            raise ChaseError(f"premise over {d.schema} but goal over {goal.schema}; widen it first")
    state = start(goal, premises)

    def msg(s):
        print("Chase : " + f"step={state.step_index:5d} : " + s)

    def finish(verdict, witness=None):
        if verbose > 1 and verdict == IMPLIED:
            msg("[Trivial]")
        if verbose:
            msg(f"[{verdict}]")
        outcome = ChaseOutcome(verdict, list(state.log), witness, state, premises, goal)
        if verdict == IMPLIED:
            return outcome._replace(witness=state.current)
        if verdict == NOT_IMPLIED:
            return outcome._replace(witness=extract_countermodel(outcome))
        return outcome

    if is_trivial(state.current):
        return finish(IMPLIED)
    egds = [(i, d) for i, d in enumerate(premises) if isinstance(d, Egd)]
    tgds = [(i, d) for i, d in enumerate(premises) if isinstance(d, Tgd)]
    turn = 0
    while True:
        saturated = False
        while not saturated:
            saturated = True
            for i, tau in egds:
                while True:
                    f = next(applicable_egd(state, tau), None)
                    if f is None:
                        break
                    if state.step_index >= budget:
                        return finish(EXHAUSTED, f"budget of {budget} steps exhausted")
                    state = apply_egd(state, tau, f, i)
                    saturated = False
                    if verbose > 1:
                        old, new = state.log[-1].substitution
                        msg(f"[egd {i}] {old} -> {new}")
                    if is_trivial(state.current):
                        return finish(IMPLIED)
        if verbose > 1 and egds:
            msg("[Saturated]")

        for k in range(len(tgds)):
            pos = (turn + k) % len(tgds)
            i, tau = tgds[pos]
            fs = applicable_tgd(state, tau)
            if fs:
                break
        else:
            if verbose > 1:
                msg("[Stopping] no rule applicable")
            return finish(NOT_IMPLIED)
        if state.step_index >= budget:
            return finish(EXHAUSTED, f"budget of {budget} steps exhausted")
        state = apply_tgd(state, tau, fs, i)
        turn = pos + 1
        if verbose > 1:
            msg(f"[tgd {i}] {len(fs)} valuations, body has {len(state.body)} rows")
        if is_trivial(state.current):
            return finish(IMPLIED)


def extract_countermodel(outcome):
    # The final body of a non-trivial terminated chase satisfies every premise and
    # violates the goal. Both facts are rechecked here.
    assert outcome.verdict == NOT_IMPLIED, "countermodels exist only for NotImplied outcomes"
    r = outcome.state.body
    for i, d in enumerate(outcome.premises):
        if find_violation(r, d) is not None:
            raise InconsistencyError(f"countermodel violates premise {i}")
    if find_violation(r, outcome.goal) is None:
        raise InconsistencyError("countermodel satisfies the goal")
    return r
