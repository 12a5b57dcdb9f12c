"""Building a language sketch stage by stage.

Phonology and grammar each start with a model-written checklist of ten
typological features (five options apiece). A seeded RNG, not the model,
picks one option per feature, and the stage text is then written to honour
those picks. The lexicon stage has no checklist. Every stage's text goes
through the critic/editor loop before it is stored.
"""

from __future__ import annotations

import logging
import re
import uuid
from dataclasses import dataclass

from .fields import FieldSchema, ParseError
from .gateway import Gateway, GatewayError, StructuredOutputFailure
from .refine import RefineConfig, refine_loop
from .rng import N_FEATURES, N_OPTIONS, ChecklistSelection, SeededRng, draw_selection
from .sketch import (
    LanguageSketch,
    ProvenanceEntry,
    SectionKind,
    append,
    append_many,
    mark_failure,
    new_sketch,
    render,
    save_sketch,
    segment_text,
)
from .translator import TranslationRecord, gloss_alignment

__all__ = [
    "Feature",
    "TypologicalChecklist",
    "ChecklistShapeError",
    "StageOrderError",
    "BootstrapError",
    "NO_CONSTRAINT",
    "parse_checklist",
    "generate_checklist",
    "format_selection",
    "run_stage",
    "bootstrap",
    "generate_baseline",
    "replay_sketch_id",
]

log = logging.getLogger(__name__)

NO_CONSTRAINT = "(none given: no user constraint applies)"
RANDOMISED_STAGES = (SectionKind.PHONOLOGY, SectionKind.GRAMMAR)
STAGE_SCHEMA = FieldSchema(required=("CONTENT",))
CHECKLIST_SCHEMA = FieldSchema(required=("CHECKLIST",))
DEFAULT_LEXICON_SIZE = 50


class ChecklistShapeError(StructuredOutputFailure):
    pass


class StageOrderError(RuntimeError):
    pass


class BootstrapError(RuntimeError):
    """A stage failed; ``partial`` is the sketch as it stood, with a failure entry."""

    def __init__(self, stage, cause, partial: LanguageSketch):
        self.stage = stage
        self.partial = partial
        super().__init__(f"{stage} stage failed: {cause}")


class _ShapeProblem(ParseError):
    pass


@dataclass(frozen=True)
class Feature:
    name: str
    options: tuple[str, ...]


@dataclass(frozen=True)
class TypologicalChecklist:
    stage: SectionKind
    features: tuple[Feature, ...]

    def __post_init__(self):
        if len(self.features) != N_FEATURES:
            raise ValueError(f"checklist needs {N_FEATURES} features, got {len(self.features)}")
        for f in self.features:
            if len(f.options) != N_OPTIONS or not all(o.strip() for o in f.options):
                raise ValueError(f"feature {f.name!r} needs {N_OPTIONS} non-empty options")

    def selected(self, selection: ChecklistSelection) -> list[tuple[str, str]]:
        return [(f.name, f.options[c - 1]) for f, c in zip(self.features, selection.choices)]

    def render(self) -> str:
        lines = []
        for i, f in enumerate(self.features, start=1):
            lines.append(f"FEATURE {i}: {f.name}")
            lines.extend(f"{j}. {o}" for j, o in enumerate(f.options, start=1))
        return "\n".join(lines)


_FEATURE = re.compile(r"^\s*(?:#+\s*)?FEATURE(?:\s*\d+)?\s*[:.-]\s*(.+?)\s*$", re.IGNORECASE)
_OPTION = re.compile(r"^\s*(?:\d+[.)]|[a-eA-E][.)]|[-*])\s+(.+?)\s*$")


def parse_checklist(text: str, stage: SectionKind) -> TypologicalChecklist:
    """Parse ``FEATURE n: name`` headings each followed by five numbered options."""
    features: list[tuple[str, list[str]]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _FEATURE.match(line)
        if m:
            features.append((m.group(1), []))
            continue
        m = _OPTION.match(line)
        if m and features:
            features[-1][1].append(m.group(1))
    if len(features) != N_FEATURES:
        raise _ShapeProblem(f"checklist has {len(features)} features, expected {N_FEATURES}")
    for name, opts in features:
        if len(opts) != N_OPTIONS:
            raise _ShapeProblem(f"feature {name!r} has {len(opts)} options, expected {N_OPTIONS}")
    return TypologicalChecklist(SectionKind(stage), tuple(Feature(n, tuple(o)) for n, o in features))


def _constraint_slot(sketch: LanguageSketch) -> str:
    return sketch.user_constraint if sketch.user_constraint.strip() else NO_CONSTRAINT


def generate_checklist(gateway: Gateway, sketch: LanguageSketch, stage, max_retries: int = 3, model_id=None):
    stage = SectionKind(stage)
    if stage not in RANDOMISED_STAGES:
        raise ValueError(f"checklists exist only for phonology and grammar, not {stage.value}")
    req = gateway.request(
        f"checklist_{stage.value}",
        # SEED is not referenced by the template; it keeps the fixture key
        # distinct per language so recorded checklists are not shared.
        {"SKETCH": render(sketch), "USER_CONSTRAINT": _constraint_slot(sketch), "SEED": str(sketch.seed)},
        model_id,
    )
    try:
        return gateway.complete_structured(
            req, CHECKLIST_SCHEMA, max_retries, lambda r: parse_checklist(r["CHECKLIST"], stage)
        )
    except StructuredOutputFailure as exc:
        if isinstance(exc.errors[-1], _ShapeProblem):
            raise ChecklistShapeError(exc.attempts) from exc
        raise


def format_selection(checklist: TypologicalChecklist, selection: ChecklistSelection) -> str:
    return "\n".join(f"- {name}: {option}" for name, option in checklist.selected(selection))


def _check_order(sketch: LanguageSketch, stage: SectionKind):
    order = [SectionKind.PHONOLOGY, SectionKind.GRAMMAR, SectionKind.LEXICON]
    for earlier in order[: order.index(stage)]:
        if sketch[earlier].is_empty():
            raise StageOrderError(f"{stage.value} stage needs a non-empty {earlier.value} section")


def run_stage(
    gateway: Gateway,
    sketch: LanguageSketch,
    stage,
    selection: ChecklistSelection | None = None,
    refine_cfg: RefineConfig | None = None,
    checklist: TypologicalChecklist | None = None,
    lexicon_size: int = DEFAULT_LEXICON_SIZE,
    model_id: str | None = None,
) -> LanguageSketch:
    """Generate, refine and store one section.

    For phonology and grammar a ``selection`` is required; the checklist is
    generated here unless one is passed in.
    """
    stage = SectionKind(stage)
    _check_order(sketch, stage)
    randomised = stage in RANDOMISED_STAGES
    if randomised != (selection is not None):
        raise ValueError(f"a selection is required for phonology/grammar and forbidden for lexicon ({stage.value})")
    refine_cfg = refine_cfg or RefineConfig()
    context = render(sketch)
    slots = {"SKETCH": context, "USER_CONSTRAINT": _constraint_slot(sketch)}
    note = ""
    if randomised:
        if checklist is None:
            checklist = generate_checklist(gateway, sketch, stage, refine_cfg.max_retries, model_id)
        slots["SELECTION"] = format_selection(checklist, selection)
        note = f"selection={list(selection.choices)}; "
    else:
        slots["LEXICON_SIZE"] = str(lexicon_size)
    req = gateway.request(f"stage_{stage.value}", slots, model_id)
    draft = gateway.complete_structured(req, STAGE_SCHEMA, refine_cfg.max_retries)["CONTENT"]
    text, trace = refine_loop(gateway, context, draft, refine_cfg)
    blocks = segment_text(text)
    entry = ProvenanceEntry(stage.value, gateway.now(), model_id or gateway.model_id, note + trace.summary())
    return append(sketch, stage, blocks, entry)


def replay_sketch_id(seed: int, constraint: str) -> str:
    return uuid.uuid5(uuid.NAMESPACE_URL, f"conlangkit:{seed}:{constraint}").hex


def bootstrap(
    gateway: Gateway,
    seed: int,
    constraint: str = "",
    refine_cfg: RefineConfig | None = None,
    sketch_id: str | None = None,
    partial_path=None,
    lexicon_size: int = DEFAULT_LEXICON_SIZE,
    model_id: str | None = None,
) -> LanguageSketch:
    """Run phonology, grammar and lexicon in order and return the finished sketch.

    Under replay the sketch id is derived from ``(seed, constraint)`` unless
    given, so that repeated runs serialise identically. On failure the
    partial sketch is written to ``partial_path`` (when given) and attached
    to the raised :class:`BootstrapError`.
    """
    if sketch_id is None and gateway.mode == "replay":
        sketch_id = replay_sketch_id(seed, constraint)
    sketch = new_sketch(seed, constraint, sketch_id)
    for stage in (SectionKind.PHONOLOGY, SectionKind.GRAMMAR, SectionKind.LEXICON):
        selection = draw_selection(SeededRng(seed, stage.value)) if stage in RANDOMISED_STAGES else None
        try:
            sketch = run_stage(gateway, sketch, stage, selection, refine_cfg, lexicon_size=lexicon_size, model_id=model_id)
        except (GatewayError, ParseError, ValueError) as exc:
            failed = mark_failure(
                sketch,
                ProvenanceEntry(stage.value, gateway.now(), model_id or gateway.model_id, f"FAILED: {exc}"),
            )
            if partial_path is not None:
                save_sketch(failed, partial_path)
            raise BootstrapError(stage.value, exc, failed) from exc
    return sketch


def _baseline_schema(n: int) -> FieldSchema:
    required = ["PHONOLOGY", "GRAMMAR", "LEXICON"]
    for i in range(1, n + 1):
        required += [f"TRANSLATION_{i}", f"GLOSS_{i}"]
    return FieldSchema(required=tuple(required))


def generate_baseline(
    gateway: Gateway,
    constraint: str,
    sentences,
    seed: int = 0,
    sketch_id: str | None = None,
    max_retries: int = 3,
    model_id: str | None = None,
) -> tuple[LanguageSketch, list[TranslationRecord]]:
    """Single-prompt comparison method: whole sketch plus translations at once.

    No checklist, no RNG and no refinement are involved.
    """
    sentences = list(sentences)
    numbered = "\n".join(f"{i}. {s}" for i, s in enumerate(sentences, start=1))
    slots = {
        "USER_CONSTRAINT": constraint if constraint.strip() else NO_CONSTRAINT,
        "SENTENCES": numbered,
        "N_SENTENCES": str(len(sentences)),
        "SEED": str(seed),  # fixture-key only, see generate_checklist
    }
    req = gateway.request("baseline", slots, model_id)
    resp = gateway.complete_structured(req, _baseline_schema(len(sentences)), max_retries)
    if sketch_id is None and gateway.mode == "replay":
        sketch_id = replay_sketch_id(seed, "baseline:" + constraint)
    additions = {}
    for kind in (SectionKind.PHONOLOGY, SectionKind.GRAMMAR, SectionKind.LEXICON):
        blocks = segment_text(resp[kind.value.upper()])
        if not blocks:
            raise StructuredOutputFailure([(resp.raw, ParseError(f"{kind.value.upper()} has no content"))])
        additions[kind] = blocks
    entry = ProvenanceEntry(
        "baseline",
        gateway.now(),
        model_id or gateway.model_id,
        f"single-prompt generation of sketch and {len(sentences)} translation(s)",
    )
    sketch = append_many(new_sketch(seed, constraint, sketch_id), additions, entry)
    records = []
    for i, s in enumerate(sentences, start=1):
        tr, gl = resp[f"TRANSLATION_{i}"].strip(), resp[f"GLOSS_{i}"].strip()
        if not gloss_alignment(tr, gl).aligned:
            log.warning("baseline translation %d has a misaligned gloss", i)
        records.append(TranslationRecord(s, tr, gl))
    return sketch, records

