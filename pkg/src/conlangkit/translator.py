"""Constructive translation into a sketched language.

The translator may coin words and grammar rules that the sketch lacks. In
corpus-building mode those additions are folded back into the sketch so that
later sentences reuse them; in evaluation mode every sentence sees the same
frozen sketch.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ._io import atomic_write_text
from .fields import FieldSchema, ParseError, emit_fields, extract_fields
from .gateway import Gateway, GatewayError
from .refine import Issue, RefineConfig, RefineTrace, refine_loop
from .sketch import (
    LanguageSketch,
    ProvenanceEntry,
    SectionKind,
    TextBlock,
    append,
    render,
)

__all__ = [
    "LexemeEntry",
    "GrammarRule",
    "TranslationRecord",
    "GlossAlignmentReport",
    "SuiteResult",
    "IncompleteSketch",
    "TRANSLATE_SCHEMA",
    "translate",
    "translate_suite",
    "apply_additions",
    "gloss_alignment",
    "validate_gloss_alignment",
    "parse_lexemes",
    "parse_rules",
    "lexeme_line",
    "existing_lexemes",
    "load_test_sentences",
    "write_translations",
    "read_translations",
    "TRANSLATIONS_SUFFIX",
]

log = logging.getLogger(__name__)

TRANSLATIONS_SUFFIX = ".translations.jsonl"
TRANSLATE_SCHEMA = FieldSchema(required=("TRANSLATION", "GLOSS"), optional=("NEW_LEXEMES", "NEW_RULES"))


class IncompleteSketch(ValueError):
    pass


@dataclass(frozen=True)
class LexemeEntry:
    form: str
    gloss: str
    part_of_speech: str = ""
    notes: str = ""

    def __post_init__(self):
        if not self.form.strip() or not self.gloss.strip():
            raise ValueError("lexeme form and gloss must be non-empty")


@dataclass(frozen=True)
class GrammarRule:
    title: str
    description: str

    def __post_init__(self):
        if not self.title.strip() or not self.description.strip():
            raise ValueError("rule title and description must be non-empty")


@dataclass(frozen=True)
class TranslationRecord:
    source: str
    translation: str
    gloss: str
    new_lexemes: tuple[LexemeEntry, ...] = ()
    new_rules: tuple[GrammarRule, ...] = ()
    refine_trace: RefineTrace | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.source.strip() and self.translation.strip() and self.gloss.strip()):
            raise ValueError("source, translation and gloss must be non-empty")
        object.__setattr__(self, "new_lexemes", tuple(self.new_lexemes))
        object.__setattr__(self, "new_rules", tuple(self.new_rules))

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "translation": self.translation,
            "gloss": self.gloss,
            "new_lexemes": [
                {"form": x.form, "gloss": x.gloss, "part_of_speech": x.part_of_speech, "notes": x.notes}
                for x in self.new_lexemes
            ],
            "new_rules": [{"title": r.title, "description": r.description} for r in self.new_rules],
            "refine_trace": self.refine_trace.to_dict() if self.refine_trace else None,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TranslationRecord":
        trace = doc.get("refine_trace")
        return cls(
            doc["source"],
            doc["translation"],
            doc["gloss"],
            tuple(LexemeEntry(**x) for x in doc.get("new_lexemes", [])),
            tuple(GrammarRule(**r) for r in doc.get("new_rules", [])),
            RefineTrace.from_dict(trace) if trace else None,
        )


@dataclass(frozen=True)
class GlossAlignmentReport:
    word_count: int
    gloss_group_count: int

    @property
    def aligned(self) -> bool:
        return self.word_count == self.gloss_group_count


def gloss_alignment(translation: str, gloss: str) -> GlossAlignmentReport:
    # Hyphens and '=' mark morpheme boundaries inside a word, so only
    # whitespace separates units.
    return GlossAlignmentReport(len(translation.split()), len(gloss.split()))


def validate_gloss_alignment(record: TranslationRecord) -> GlossAlignmentReport:
    return gloss_alignment(record.translation, record.gloss)


_BULLET = re.compile(r"^\s*(?:[-*]|\d+[.)])\s+")


def _entry_lines(text: str):
    for line in text.splitlines():
        line = _BULLET.sub("", line).strip()
        if line and line.lower().rstrip(".") not in ("none", "n/a", "-"):
            yield line


def parse_lexemes(text: str) -> list[LexemeEntry]:
    """Parse ``form | gloss | part of speech | notes`` lines (last two optional)."""
    out = []
    for line in _entry_lines(text):
        parts = [p.strip() for p in line.split("|")]
        if len(parts) < 2 or not parts[0] or not parts[1]:
            raise ParseError(f"NEW_LEXEMES line {line!r} is not 'form | gloss | part of speech | notes'")
        parts += [""] * (4 - len(parts))
        out.append(LexemeEntry(parts[0], parts[1], parts[2], " | ".join(parts[3:]).strip(" |")))
    return out


def parse_rules(text: str) -> list[GrammarRule]:
    """Parse ``title | description`` lines; unpiped lines continue the previous description."""
    rules: list[list[str]] = []
    for line in _entry_lines(text):
        if " | " in line:
            title, desc = line.split(" | ", 1)
            rules.append([title.strip(), desc.strip()])
        elif rules:
            rules[-1][1] = f"{rules[-1][1]} {line}".strip()
        else:
            raise ParseError(f"NEW_RULES line {line!r} is not 'title | description'")
    try:
        return [GrammarRule(t, d) for t, d in rules]
    except ValueError as exc:
        raise ParseError(f"NEW_RULES: {exc}") from None


def record_fields(record: TranslationRecord) -> dict[str, str]:
    fields = {"TRANSLATION": record.translation, "GLOSS": record.gloss}
    if record.new_lexemes:
        fields["NEW_LEXEMES"] = "\n".join(
            " | ".join((x.form, x.gloss, x.part_of_speech, x.notes)).rstrip(" |")
            for x in record.new_lexemes
        )
    if record.new_rules:
        fields["NEW_RULES"] = "\n".join(f"{r.title} | {r.description}" for r in record.new_rules)
    return fields


def _record_from_response(source: str, resp) -> TranslationRecord:
    return TranslationRecord(
        source,
        resp["TRANSLATION"].strip(),
        resp["GLOSS"].strip(),
        tuple(parse_lexemes(resp.get("NEW_LEXEMES", ""))),
        tuple(parse_rules(resp.get("NEW_RULES", ""))),
    )


def _alignment_issues(candidate: str) -> list[Issue]:
    try:
        resp = extract_fields(candidate, TRANSLATE_SCHEMA)
    except ParseError:
        return []
    report = gloss_alignment(resp["TRANSLATION"], resp["GLOSS"])
    if report.aligned:
        return []
    log.warning("gloss misaligned: %d words vs %d gloss groups", report.word_count, report.gloss_group_count)
    return [
        Issue(
            "GLOSS",
            f"the gloss has {report.gloss_group_count} word groups but the translation has "
            f"{report.word_count} words; gloss every word exactly once",
        )
    ]


_LEX_LINE = re.compile(r"^\s*(?:[-*]\s*)?(?P<form>.+?)\s+\((?P<pos>[^)]*)\)\s*:\s*(?P<gloss>.+?)\s*$")


def lexeme_line(entry: LexemeEntry) -> str:
    text = f"{entry.form} ({entry.part_of_speech or '?'}): {entry.gloss}"
    if entry.notes:
        text += f". Note: {entry.notes}"
    return text


def existing_lexemes(sketch: LanguageSketch) -> list[tuple[str, str]]:
    """``(form, gloss)`` pairs found in ``form (pos): gloss`` lexicon lines."""
    pairs = []
    for block in sketch[SectionKind.LEXICON].body_blocks():
        for line in block.text.splitlines():
            m = _LEX_LINE.match(line)
            if m:
                gloss = m.group("gloss").split(". Note:")[0].strip()
                pairs.append((m.group("form").strip(), gloss))
    return pairs


def apply_additions(sketch: LanguageSketch, record: TranslationRecord, model_id: str, timestamp: str) -> LanguageSketch:
    """Fold a record's new lexemes and rules into the sketch.

    A lexeme matching an existing entry on both form and gloss is dropped; a
    new sense of an existing form is kept with a homophony note.
    """
    known = existing_lexemes(sketch)
    blocks = []
    for lex in record.new_lexemes:
        key = (lex.form.strip(), lex.gloss.strip().casefold())
        if any((f, g.casefold()) == key for f, g in known):
            log.info("dropping duplicate lexeme %s '%s'", lex.form, lex.gloss)
            continue
        senses = [g for f, g in known if f == key[0]]
        if senses:
            note = f"homophone of {lex.form} '{senses[0]}'"
            lex = LexemeEntry(lex.form, lex.gloss, lex.part_of_speech, f"{lex.notes}; {note}" if lex.notes else note)
        known.append((lex.form.strip(), lex.gloss.strip()))
        blocks.append(TextBlock.body(lexeme_line(lex)))
    summary = f"from translation of {record.source!r}"
    if blocks:
        sketch = append(
            sketch,
            SectionKind.LEXICON,
            blocks,
            ProvenanceEntry("translation", timestamp, model_id, f"added {len(blocks)} lexeme(s) {summary}"),
        )
    rule_blocks = []
    for rule in record.new_rules:
        rule_blocks += [TextBlock.header(rule.title), TextBlock.body(rule.description)]
    if rule_blocks:
        sketch = append(
            sketch,
            SectionKind.GRAMMAR,
            rule_blocks,
            ProvenanceEntry("translation", timestamp, model_id, f"added {len(record.new_rules)} rule(s) {summary}"),
        )
    return sketch


def translate(
    gateway: Gateway,
    sketch: LanguageSketch,
    source: str,
    update_sketch: bool = False,
    cfg: RefineConfig | None = None,
    model_id: str | None = None,
) -> tuple[TranslationRecord, LanguageSketch]:
    if not sketch.is_complete():
        empty = [s.kind.value for s in sketch.sections if s.is_empty()]
        raise IncompleteSketch(f"sketch {sketch.id} has empty sections: {', '.join(empty)}")
    cfg = cfg or RefineConfig()
    context = render(sketch)
    req = gateway.request("translate", {"SKETCH": context, "SOURCE_TEXT": source}, model_id)
    record = gateway.complete_structured(
        req, TRANSLATE_SCHEMA, cfg.max_retries, lambda r: _record_from_response(source, r)
    )

    def validate(text):
        return _record_from_response(source, extract_fields(text, TRANSLATE_SCHEMA))

    final, trace = refine_loop(
        gateway,
        context,
        emit_fields(record_fields(record)),
        cfg,
        extra_issues=_alignment_issues,
        output_schema=TRANSLATE_SCHEMA,
        validate=validate,
    )
    refined = validate(final)
    record = TranslationRecord(
        refined.source, refined.translation, refined.gloss, refined.new_lexemes, refined.new_rules, trace
    )
    if update_sketch:
        sketch = apply_additions(sketch, record, model_id or gateway.model_id, gateway.now())
    return record, sketch


@dataclass
class SuiteResult:
    records: list[TranslationRecord]
    errors: list[tuple[int, str, str]]  # (index, source, message)
    sketch: LanguageSketch

    @property
    def ok(self) -> bool:
        return not self.errors


def translate_suite(
    gateway: Gateway,
    sketch: LanguageSketch,
    sentences,
    independent: bool = True,
    cfg: RefineConfig | None = None,
    model_id: str | None = None,
    jobs: int = 1,
) -> SuiteResult:
    """Translate ``sentences`` in evaluation (``independent``) or corpus-building mode.

    Per-sentence failures are collected rather than raised, except a sketch
    that is incomplete, which fails every sentence alike.
    """
    sentences = list(sentences)
    if not sentences:
        raise ValueError("sentences must be non-empty")
    if not sketch.is_complete():
        raise IncompleteSketch(f"sketch {sketch.id} is incomplete")
    errors: list[tuple[int, str, str]] = []

    def one(i, s, current, update):
        try:
            return translate(gateway, current, s, update, cfg, model_id)
        except (GatewayError, ParseError, ValueError) as exc:
            errors.append((i, s, f"{type(exc).__name__}: {exc}"))
            return None

    records: list[TranslationRecord] = []
    if independent:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            results = list(pool.map(lambda p: one(p[0], p[1], sketch, False), enumerate(sentences)))
        records = [r[0] for r in results if r is not None]
        errors.sort()
        return SuiteResult(records, errors, sketch)
    current = sketch
    for i, s in enumerate(sentences):
        out = one(i, s, current, True)
        if out is not None:
            records.append(out[0])
            current = out[1]
    return SuiteResult(records, errors, current)


def load_test_sentences(path=None) -> list[str]:
    """The fixed ten-sentence evaluation suite, or one sentence per line from ``path``."""
    if path is None:
        text = resources.files("conlangkit").joinpath("data", "test_sentences.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def write_translations(records, path) -> Path:
    lines = [json.dumps(r.to_dict(), ensure_ascii=False) for r in records]
    return atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_translations(path) -> list[TranslationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(TranslationRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad translation record ({exc})") from None
    return out
