import time
from pathlib import Path

import textio
import chase
import generator
import proofs
import replay
import models

# Premises: the embedded multivalued dependency A ->> B | C and the functional
# dependency C -> D over ABCD. Goal: A ->> B | CD.
deps = textio.parse(Path('fixtures/emvd_fd.edc').read_text())
goal = textio.parse(Path('fixtures/emvd_goal.edc').read_text(), blank_start=deps.next_blank).goal
premises = [d.item for d in deps.dependencies()]

stime   = time.time()
outcome = chase.run_chase(premises, goal, verbose=2)
print(f"Chase finished in {time.time()-stime:.3f}s with verdict {outcome.verdict}")

print("\nTableaux:")
for i, step in enumerate(outcome.trace, 1):
    print(f"  after step {i} ({step.kind:3s}) :", step.result.body)

# Deduction following the chase, plain and typed
for typed in [False, True]:
    stime = time.time()
    gen   = generator.generate_typed_deduction if typed else generator.generate_deduction
    ded   = gen(outcome)
    v     = proofs.check_deduction(ded, goal)
    print(f"\n{'Typed' if typed else 'Plain'} deduction, {len(ded.lines)} lines, checker says {v.message} "
          f"({time.time()-stime:.3f}s)")
    for i, line in enumerate(ded.lines):
        print(f"  {i:2d} {line.just.tag:7s} {str(list(line.just.refs)):12s} {textio.formula_text(line.formula)}")

# Soundness, semantically: replay the deduction on every small relation satisfying the premises
stime = time.time()
rels  = models.satisfying_relations(premises, goal.schema, domain_size=2, max_rows=2)
for r in rels:
    replay.replay_deduction(r, ded)
print(f"\nReplayed on {len(rels)} satisfying relations in {time.time()-stime:.3f}s")

# Bounded countermodel search agrees
stime = time.time()
cm    = models.find_countermodel(premises, goal, domain_size=3, max_rows=3)
print(f"Countermodel search up to 3 rows over 3 values: {cm} ({time.time()-stime:.3f}s)")
