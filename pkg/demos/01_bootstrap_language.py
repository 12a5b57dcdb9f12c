"""Build one language sketch stage by stage.

Each stage asks the model for a ten-item checklist of typological
choices, rolls a seeded die per item, and writes its section with the
drawn options imposed. A critic and editor then polish the section. The
shipped fixtures replay recorded answers, so this runs offline and
prints the same thing every time.
"""

from conlangkit import RefineConfig, SeededRng, bootstrap, draw_selection, render

from _common import banner, replay_gateway

SEED = 0

banner(f"Options drawn for seed {SEED}")
for stage in ("phonology", "grammar"):
    print(f"{stage:>10}: {draw_selection(SeededRng(SEED, stage)).choices}")

sketch = bootstrap(replay_gateway(), SEED, refine_cfg=RefineConfig())

banner("Provenance")
for entry in sketch.provenance:
    print(f"{entry.stage:>10}  {entry.summary}")

banner(f"Sketch {sketch.id} (version {sketch.version})")
print(render(sketch)[:1500], "...")
