"""The critic/editor loop with a scripted critic.

The critic scores a draft from 1 to 10 and lists issues. The loop stops
once the score reaches the threshold, when the critic finds nothing left
to fix, or after ten critiques.
"""

import itertools

from conlangkit import Gateway, RefineConfig, emit_fields, refine_loop
from conlangkit.testing import ScriptedBackend

from _common import banner


def critic(score, *issues):
    fields = {"SCORE": str(score)}
    if issues:
        fields["ISSUES"] = "\n".join(f"- {loc} | {desc}" for loc, desc in issues)
    return emit_fields(fields)


drafts = itertools.count(1)
backend = ScriptedBackend({
    "critic": [
        critic(5, ("Vowels", "length contrast is mentioned but never defined")),
        critic(7, ("Stress", "the stress rule contradicts the syllable template")),
        critic(9),
    ],
    "editor": lambda request: emit_fields({"REVISION": f"draft {next(drafts)}"}),
})
text, trace = refine_loop(Gateway(backend), "context", "draft 0", RefineConfig(threshold=9))

banner("Trace")
for i, it in enumerate(trace.iterations, 1):
    print(f"round {i}: score {it.score}, {it.issue_count} issue(s)")
print(f"stopped by {trace.terminated_by} after {trace.edits} edit(s); final text {text!r}")
