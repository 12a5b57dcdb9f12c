"""Staged, seeded construction of language sketches with LLMs, plus translation and evaluation."""

from .bootstrap import BootstrapError, bootstrap, generate_baseline, run_stage
from .evaluator import (
    diversity,
    encode_profile,
    language_consistency,
    load_feature_set,
    translation_consistency,
)
from .fields import FieldSchema, ParseError, emit_fields, extract_fields
from .gateway import FixtureMiss, Gateway, StructuredOutputFailure
from .refine import RefineConfig, RefineTrace, critique, edit, refine_loop
from .rng import ChecklistSelection, SeededRng, draw_selection
from .sketch import (
    LanguageSketch,
    SectionKind,
    TextBlock,
    append,
    deserialize,
    load_sketch,
    new_sketch,
    render,
    sample_sentences,
    save_sketch,
    serialize,
)
from .translator import TranslationRecord, gloss_alignment, translate, translate_suite

__version__ = "0.1.0"

__all__ = [
    "BootstrapError", "bootstrap", "generate_baseline", "run_stage",
    "diversity", "encode_profile", "language_consistency", "load_feature_set", "translation_consistency",
    "FieldSchema", "ParseError", "emit_fields", "extract_fields",
    "FixtureMiss", "Gateway", "StructuredOutputFailure",
    "RefineConfig", "RefineTrace", "critique", "edit", "refine_loop",
    "ChecklistSelection", "SeededRng", "draw_selection",
    "LanguageSketch", "SectionKind", "TextBlock", "append", "deserialize", "load_sketch", "new_sketch",
    "render", "sample_sentences", "save_sketch", "serialize",
    "TranslationRecord", "gloss_alignment", "translate", "translate_suite",
]
