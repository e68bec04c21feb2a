# Command line for the chase, proof generation and proof checking.
#
#   python edchase.py prove -s deps.edc -g goal.edc [--typed] [--max-steps N] [--emit-proof P] [--emit-trace T]
#   python edchase.py verify -s deps.edc -p proof.edp -g goal.edc
#   python edchase.py check-model -r rel.edc -d deps.edc
#   python edchase.py countermodel -s deps.edc -g goal.edc
#   python edchase.py chase -s deps.edc -g goal.edc
#   python edchase.py normalize -d deps.edc
#
# Exit codes: 0 Implied / accepted / satisfied, 1 NotImplied / rejected / violated,
# 2 Exhausted, 64 usage, 65 parse or validation error, 70 internal error.
import argparse
import os
import sys
from pathlib import Path

import config
import textio
from relations import SchemaError, by_rank
from dependencies import (EdSentence, DependencyError, attributes, normalize_ed,
                          to_dependencies, widen, find_violation, is_typed)
from chase import run_chase, IMPLIED, NOT_IMPLIED, EXHAUSTED, InconsistencyError
from proofs import check_deduction
from generator import generate_deduction, generate_typed_deduction, UntypedError
import utils


EXIT_USAGE, EXIT_INVALID, EXIT_INTERNAL = 64, 65, 70
VERDICT_EXIT = {IMPLIED: 0, NOT_IMPLIED: 1, EXHAUSTED: 2}


class InputError(Exception):
    # A diagnostic tied to a position of an input file
    def __init__(self, path, line, col, message):
        super().__init__(f"{path}:{line}:{col}: {message}")


class UsageError(Exception):
    pass


class UsageParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load(path, blank_start=1):
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}")
    try:
        text = data.decode('utf-8')
    except UnicodeDecodeError as e:
        line = data.count(b'\n', 0, e.start) + 1
        col = e.start - (data.rfind(b'\n', 0, e.start) + 1) + 1
        raise InputError(path, line, col, "invalid UTF-8")
    try:
        return textio.parse(text, blank_start=blank_start)
    except textio.ParseError as e:
        raise InputError(path, e.line, e.col, e.message)


def as_chase_form(d, schema=None):
    # egds and tgds equivalent to one declared dependency
    if isinstance(d, EdSentence):
        out = normalize_ed(d)
        return out if schema is None else [widen(x, schema) for x in out]
    return to_dependencies(d, schema)


def declared_attributes(d):
    return set(d.schema) if isinstance(d, EdSentence) else attributes(d)


def goal_of(path, sf):
    if sf.goal is not None:
        return sf.goal
    deps = sf.dependencies()
    if len(deps) != 1:
        raise InputError(path, 1, 1, "no goal: declare `goal:` or a single dependency")
    return deps[0].item


def load_problem(args):
    # (premises, goal) over the union schema of both files
    deps = load(args.sigma)
    goal_file = load(args.goal, blank_start=deps.next_blank)
    declared = [d.item for d in deps.dependencies()]
    goal = goal_of(args.goal, goal_file)
    schema = tuple(by_rank(set().union(*(declared_attributes(d) for d in declared + [goal]))))
    premises = [x for d in declared for x in as_chase_form(d, schema)]
    goals = as_chase_form(goal, schema)
    if len(goals) != 1:
        raise InputError(args.goal, 1, 1, "the goal must amount to a single egd or tgd")
    return premises, goals[0]


def budget(args):
    if args.max_steps is not None:
        n = args.max_steps
    else:
        env = os.environ.get('EDCHASE_MAX_STEPS')
        try:
            n = config.MAX_STEPS if env is None else int(env)
        except ValueError:
            raise UsageError(f"EDCHASE_MAX_STEPS is not an integer: {env!r}")
    if n < 0:
        raise UsageError("the step budget must be non-negative")
    return n


def write(path, text):
    Path(path).write_text(text, encoding='utf-8')


# ***** Commands *****

def cmd_prove(args):
    premises, goal = load_problem(args)
    if args.typed:
        for d in premises + [goal]:
            if not is_typed(d):
                raise UntypedError("untyped input: --typed needs typed premises and goal")
    outcome = run_chase(premises, goal, budget(args), verbose=args.verbose)
    if args.emit_trace:
        write(args.emit_trace, textio.serialize_trace(outcome))
    print(outcome.verdict)
    if outcome.verdict == IMPLIED:
        if args.emit_proof:
            generate = generate_typed_deduction if args.typed else generate_deduction
            ded  = generate(outcome, verbose=args.verbose)
            text = textio.serialize_proof(ded, goal)
            for candidate, g in (ded, goal), textio.parse_proof(text):
                verdict = check_deduction(candidate, g)
                if not verdict.ok:
                    print(f"edchase: internal error: generated proof fails at line {verdict.line}: {verdict.message}",
                          file=sys.stderr)
                    return EXIT_INTERNAL
            write(args.emit_proof, text)
    elif outcome.verdict == NOT_IMPLIED:
        print(textio.relation_text('countermodel', outcome.witness))
    else:
        print(outcome.witness, file=sys.stderr)
    return VERDICT_EXIT[outcome.verdict]


def cmd_verify(args):
    premises, goal = load_problem(args)
    try:
        ded, claimed = textio.parse_proof(Path(args.proof).read_text(encoding='utf-8'))
    except OSError as e:
        raise UsageError(f"cannot read {args.proof}: {e.strerror}")
    except textio.ParseError as e:
        raise InputError(args.proof, e.line, e.col, e.message)
    if list(ded.premises) != premises:
        print(f"{args.proof}:1:1: proof premises differ from {args.sigma}", file=sys.stderr)
        return 1
    verdict = check_deduction(ded, goal)
    if not verdict.ok:
        at = 1 if verdict.line is None else verdict.line + 2
        print(f"{args.proof}:{at}:1: {verdict.message}", file=sys.stderr)
        print('rejected')
        return 1
    print('accepted')
    return 0


def cmd_check_model(args):
    rels = load(args.relation).relations()
    if not rels:
        raise InputError(args.relation, 1, 1, "no relation declared")
    r = rels[0].item
    violated = 0
    for d in load(args.deps).dependencies():
        label = d.name or f"{d.kind}@{d.line}"
        witness = None
        for x in (normalize_ed(d.item) if isinstance(d.item, EdSentence) else [d.item]):
            witness = find_violation(r, x)
            if witness is not None:
                break
        if witness is None:
            print(f"{label}: satisfied")
        else:
            violated += 1
            shown = utils.format_valuation(witness) if isinstance(witness, dict) else str(witness)
            print(f"{label}: violated, witness {shown}")
    return 1 if violated else 0


def cmd_countermodel(args):
    premises, goal = load_problem(args)
    outcome = run_chase(premises, goal, budget(args), verbose=args.verbose)
    if outcome.verdict == NOT_IMPLIED:
        print(textio.relation_text('countermodel', outcome.witness))
        return 0
    print(outcome.verdict)
    return 1 if outcome.verdict == IMPLIED else 2


def cmd_chase(args):
    premises, goal = load_problem(args)
    outcome = run_chase(premises, goal, budget(args), verbose=args.verbose)
    sys.stdout.write(textio.serialize_trace(outcome))
    return VERDICT_EXIT[outcome.verdict]


def cmd_normalize(args):
    for d in load(args.deps).dependencies():
        label = d.name or f"{d.kind}{d.line}"
        for k, x in enumerate(as_chase_form(d.item), 1):
            print(textio.dependency_text(x, f"{label}_{k}"))
    return 0


def build_parser():
    parser = UsageParser(prog='edchase', description='Chase, prove and check embedded dependencies')
    parser.add_argument('-v', '--verbose', action='count', default=config.VERBOSE)
    sub = parser.add_subparsers(dest='command', required=True, parser_class=UsageParser)

    def problem(p):
        p.add_argument('-s', '--sigma', required=True, help='premise file')
        p.add_argument('-g', '--goal', required=True, help='goal file')

    p = sub.add_parser('prove', help='decide implication and emit a proof')
    problem(p)
    p.add_argument('--typed', action='store_true', help='use the typed rules CS* and CT*')
    p.add_argument('--max-steps', type=int, default=None)
    p.add_argument('--emit-proof', metavar='P')
    p.add_argument('--emit-trace', metavar='T')
    p.set_defaults(run=cmd_prove)

    p = sub.add_parser('verify', help='check a proof document')
    p.add_argument('-s', '--sigma', required=True)
    p.add_argument('-p', '--proof', required=True)
    p.add_argument('-g', '--goal', required=True)
    p.set_defaults(run=cmd_verify)

    p = sub.add_parser('check-model', help='model-check dependencies on a relation')
    p.add_argument('-r', '--relation', required=True)
    p.add_argument('-d', '--deps', required=True)
    p.set_defaults(run=cmd_check_model)

    for name, run, text in (('countermodel', cmd_countermodel, 'print the countermodel of a terminated chase'),
                            ('chase', cmd_chase, 'print the chase trace')):
        p = sub.add_parser(name, help=text)
        problem(p)
        p.add_argument('--max-steps', type=int, default=None)
        p.set_defaults(run=run)

    p = sub.add_parser('normalize', help='print the egds and tgds equivalent to every dependency')
    p.add_argument('-d', '--deps', required=True)
    p.set_defaults(run=cmd_normalize)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except UsageError as e:
        print(f"edchase: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID
    except (DependencyError, SchemaError, UntypedError, ValueError) as e:
        print(f"edchase: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except InconsistencyError as e:
        print(f"edchase: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == '__main__':
    sys.exit(main())
