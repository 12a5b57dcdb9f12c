"""Translate into a language whose lexicon is still incomplete.

In corpus mode every translation may coin new words or rules, and these
are folded back into the sketch before the next sentence. Evaluation
mode translates each sentence against the untouched sketch instead.

The sketch comes from the shipped fixtures. Translation here uses the
offline synthetic model directly, because corpus mode grows the sketch
and so sends prompts that were never recorded.
"""

from conlangkit import Gateway, RefineConfig, bootstrap, translate_suite
from conlangkit.sketch import SectionKind, serialize
from conlangkit.testing import SyntheticModel

from _common import GENERATOR, banner, replay_gateway

sketch = bootstrap(replay_gateway(), 1, refine_cfg=RefineConfig())
offline = Gateway(SyntheticModel(), model_id=GENERATOR)
sentences = ["The big dog is sleeping.", "The river is cold.", "Will the bird sing tomorrow?"]

banner("Evaluation mode")
res = translate_suite(offline, sketch, sentences, independent=True)
print("sketch unchanged:", serialize(res.sketch) == serialize(sketch))

banner("Corpus mode")
res = translate_suite(offline, sketch, sentences, independent=False)
for rec in res.records:
    print(f"{rec.source}\n  {rec.translation}\n  {rec.gloss}")
    for lex in rec.new_lexemes:
        print(f"  + lexeme {lex.form!r} = {lex.gloss}")
    for rule in rec.new_rules:
        print(f"  + rule {rule.title!r}")
before = len(sketch[SectionKind.LEXICON].blocks)
after = len(res.sketch[SectionKind.LEXICON].blocks)
print(f"\nversion {sketch.version} -> {res.sketch.version}; lexicon blocks {before} -> {after}")
