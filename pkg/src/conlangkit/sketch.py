"""Versioned, immutable language sketches.

A sketch holds the phonology, grammar and lexicon of one constructed language
as ordered lists of typed text blocks. Every mutation returns a new snapshot
with ``version`` bumped by one and the input left untouched, so snapshots can
be shared freely between threads.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from ._io import atomic_write_text

__all__ = [
    "SectionKind",
    "BlockKind",
    "TextBlock",
    "Section",
    "ProvenanceEntry",
    "LanguageSketch",
    "EmptyAppend",
    "SketchFormatError",
    "new_sketch",
    "append",
    "append_many",
    "mark_failure",
    "render",
    "split_sentences",
    "sample_sentences",
    "segment_text",
    "is_heading_line",
    "serialize",
    "deserialize",
    "save_sketch",
    "load_sketch",
    "SKETCH_SUFFIX",
]

SKETCH_SUFFIX = ".sketch.json"


class SectionKind(str, Enum):
    PHONOLOGY = "phonology"
    GRAMMAR = "grammar"
    LEXICON = "lexicon"


SECTION_ORDER = (SectionKind.PHONOLOGY, SectionKind.GRAMMAR, SectionKind.LEXICON)


class BlockKind(str, Enum):
    HEADER = "header"
    BODY = "body"


class EmptyAppend(ValueError):
    pass


class SketchFormatError(ValueError):
    """Raised when a sketch document is malformed; the message names the field."""

    def __init__(self, field_path: str, problem: str):
        self.field = field_path
        super().__init__(f"{field_path}: {problem}")


@dataclass(frozen=True)
class TextBlock:
    kind: BlockKind
    text: str

    def __post_init__(self):
        object.__setattr__(self, "kind", BlockKind(self.kind))
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("TextBlock text must be non-empty")

    @classmethod
    def header(cls, text: str) -> "TextBlock":
        return cls(BlockKind.HEADER, text)

    @classmethod
    def body(cls, text: str) -> "TextBlock":
        return cls(BlockKind.BODY, text)


@dataclass(frozen=True)
class Section:
    kind: SectionKind
    blocks: tuple[TextBlock, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", SectionKind(self.kind))
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def is_empty(self) -> bool:
        return not self.blocks

    def body_blocks(self) -> list[TextBlock]:
        return [b for b in self.blocks if b.kind is BlockKind.BODY]


@dataclass(frozen=True)
class ProvenanceEntry:
    stage: str
    timestamp: str
    model_id: str
    summary: str = ""


@dataclass(frozen=True)
class LanguageSketch:
    id: str
    seed: int
    user_constraint: str
    sections: tuple[Section, ...]
    provenance: tuple[ProvenanceEntry, ...] = ()
    version: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        kinds = [s.kind for s in self.sections]
        if kinds != list(SECTION_ORDER):
            raise ValueError(f"sketch must hold exactly the sections {[k.value for k in SECTION_ORDER]}")
        object.__setattr__(self, "sections", tuple(self.sections))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __getitem__(self, kind) -> Section:
        return self.sections[SECTION_ORDER.index(SectionKind(kind))]

    def is_complete(self) -> bool:
        return all(not s.is_empty() for s in self.sections)


def new_sketch(seed: int, constraint: str = "", sketch_id: str | None = None) -> LanguageSketch:
    """Return a version-0 sketch with three empty sections.

    ``sketch_id`` defaults to a random UUID; pass one explicitly when the
    sketch must be reproducible byte-for-byte.
    """
    return LanguageSketch(
        id=sketch_id if sketch_id is not None else uuid.uuid4().hex,
        seed=int(seed),
        user_constraint=constraint,
        sections=tuple(Section(k) for k in SECTION_ORDER),
    )


def append(
    sketch: LanguageSketch,
    kind: SectionKind,
    blocks: Iterable[TextBlock],
    provenance: ProvenanceEntry,
) -> LanguageSketch:
    return append_many(sketch, {kind: blocks}, provenance)


def append_many(sketch: LanguageSketch, additions: dict, provenance: ProvenanceEntry) -> LanguageSketch:
    """Append blocks to several sections as one mutation (one version step)."""
    additions = {SectionKind(k): tuple(v) for k, v in additions.items()}
    if not additions:
        raise EmptyAppend("no sections given")
    for kind, blocks in additions.items():
        if not blocks:
            raise EmptyAppend(f"no blocks given for section {kind.value}")
    sections = tuple(replace(s, blocks=s.blocks + additions.get(s.kind, ())) for s in sketch.sections)
    return replace(
        sketch,
        sections=sections,
        provenance=sketch.provenance + (provenance,),
        version=sketch.version + 1,
    )


def mark_failure(sketch: LanguageSketch, provenance: ProvenanceEntry) -> LanguageSketch:
    """Record a provenance-only event (e.g. a failed stage) as a new snapshot."""
    return replace(sketch, provenance=sketch.provenance + (provenance,), version=sketch.version + 1)


_HEADINGS = {k: f"[{k.value.upper()}]" for k in SECTION_ORDER}


def render(sketch: LanguageSketch) -> str:
    """Plain-text form of the sketch used to condition every prompt."""
    parts = []
    for section in sketch.sections:
        parts.append(_HEADINGS[section.kind])
        parts.extend(block.text for block in section.blocks)
    return "\n\n".join(parts) + "\n"


# Sentence boundary: after a terminator that is followed by whitespace; line
# breaks are hard boundaries too (lexicon entries rarely carry a full stop).
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\s*\n\s*")


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def _sampling_rng(rng_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([rng_seed & 0xFFFFFFFF, rng_seed >> 32, 0x5A3D]))


def sample_sentences(
    sketch: LanguageSketch, per_section: int = 5, rng_seed: int = 0
) -> list[tuple[SectionKind, str]]:
    """Draw up to ``per_section`` body sentences from each section without replacement.

    Sections with fewer eligible sentences contribute all of them. Within a
    section, sampled sentences keep their document order.
    """
    if per_section < 1:
        raise ValueError("per_section must be >= 1")
    rng = _sampling_rng(int(rng_seed))
    out: list[tuple[SectionKind, str]] = []
    for section in sketch.sections:
        pool = [s for b in section.body_blocks() for s in split_sentences(b.text)]
        if len(pool) <= per_section:
            picked = range(len(pool))
        else:
            picked = sorted(rng.choice(len(pool), size=per_section, replace=False).tolist())
        out.extend((section.kind, pool[i]) for i in picked)
    return out


_MD_HEADING = re.compile(r"^#+\s*\S")
_OUTLINE_HEADING = re.compile(r"^\d+(?:\.\d+)*\.?\s+[^.!?:]{1,60}$")
_BOLD_HEADING = re.compile(r"^\*\*[^*]+\*\*:?$")


def is_heading_line(line: str) -> bool:
    line = line.strip()
    return bool(_MD_HEADING.match(line) or _OUTLINE_HEADING.match(line) or _BOLD_HEADING.match(line))


def segment_text(text: str) -> list[TextBlock]:
    """Split model output into heading blocks and one body block per paragraph."""
    blocks: list[TextBlock] = []
    para: list[str] = []

    def flush():
        body = "\n".join(para).strip()
        if body:
            blocks.append(TextBlock.body(body))
        para.clear()

    for line in text.splitlines():
        if is_heading_line(line):
            flush()
            blocks.append(TextBlock.header(line.strip()))
        elif not line.strip():
            flush()
        else:
            para.append(line.rstrip())
    flush()
    return blocks


def to_dict(sketch: LanguageSketch) -> dict:
    return {
        "id": sketch.id,
        "seed": sketch.seed,
        "user_constraint": sketch.user_constraint,
        "version": sketch.version,
        "sections": [
            {
                "kind": s.kind.value,
                "blocks": [{"kind": b.kind.value, "text": b.text} for b in s.blocks],
            }
            for s in sketch.sections
        ],
        "provenance": [
            {"stage": p.stage, "timestamp": p.timestamp, "model_id": p.model_id, "summary": p.summary}
            for p in sketch.provenance
        ],
    }


def serialize(sketch: LanguageSketch) -> str:
    return json.dumps(to_dict(sketch), ensure_ascii=False, indent=2) + "\n"


def _expect(obj, key, typ, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SketchFormatError(f"{where}{key}", "missing")
    value = obj[key]
    if typ is int and isinstance(value, bool) or not isinstance(value, typ):
        raise SketchFormatError(f"{where}{key}", f"expected {typ.__name__}, got {type(value).__name__}")
    return value


def from_dict(doc: dict) -> LanguageSketch:
    if not isinstance(doc, dict):
        raise SketchFormatError("<root>", "expected an object")
    sketch_id = _expect(doc, "id", str, "")
    seed = _expect(doc, "seed", int, "")
    if not 0 <= seed < 2**64:
        raise SketchFormatError("seed", "out of 64-bit unsigned range")
    constraint = _expect(doc, "user_constraint", str, "")
    version = _expect(doc, "version", int, "")
    raw_sections = _expect(doc, "sections", list, "")
    sections = []
    for i, s in enumerate(raw_sections):
        where = f"sections[{i}]."
        kind = _expect(s, "kind", str, where)
        try:
            kind = SectionKind(kind)
        except ValueError:
            raise SketchFormatError(f"{where}kind", f"unknown section kind {kind!r}") from None
        blocks = []
        for j, b in enumerate(_expect(s, "blocks", list, where)):
            bwhere = f"{where}blocks[{j}]."
            bkind = _expect(b, "kind", str, bwhere)
            text = _expect(b, "text", str, bwhere)
            try:
                bkind = BlockKind(bkind)
            except ValueError:
                raise SketchFormatError(f"{bwhere}kind", f"unknown block kind {bkind!r}") from None
            try:
                blocks.append(TextBlock(bkind, text))
            except ValueError as exc:
                raise SketchFormatError(f"{bwhere[:-1]}", str(exc)) from None
        sections.append(Section(kind, tuple(blocks)))
    if [s.kind for s in sections] != list(SECTION_ORDER):
        raise SketchFormatError("sections", "must list phonology, grammar, lexicon in that order")
    provenance = []
    for i, p in enumerate(_expect(doc, "provenance", list, "")):
        where = f"provenance[{i}]."
        provenance.append(
            ProvenanceEntry(
                stage=_expect(p, "stage", str, where),
                timestamp=_expect(p, "timestamp", str, where),
                model_id=_expect(p, "model_id", str, where),
                summary=_expect(p, "summary", str, where),
            )
        )
    return LanguageSketch(sketch_id, seed, constraint, tuple(sections), tuple(provenance), version)


def deserialize(text: str) -> LanguageSketch:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SketchFormatError("<document>", f"invalid JSON ({exc})") from None
    return from_dict(doc)


def save_sketch(sketch: LanguageSketch, path) -> Path:
    return atomic_write_text(path, serialize(sketch))


def load_sketch(path) -> LanguageSketch:
    return deserialize(Path(path).read_text(encoding="utf-8"))
