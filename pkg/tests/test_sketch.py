import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conlangkit.sketch import (
    BlockKind,
    EmptyAppend,
    LanguageSketch,
    ProvenanceEntry,
    SectionKind,
    SketchFormatError,
    TextBlock,
    append,
    deserialize,
    load_sketch,
    new_sketch,
    render,
    sample_sentences,
    save_sketch,
    segment_text,
    serialize,
    split_sentences,
)

from conftest import PROV


def _without_id(s):
    return serialize(s).replace(s.id, "<id>")


def test_new_sketch_is_empty_version_zero():
    s = new_sketch(0, "")
    assert [sec.kind for sec in s.sections] == list(SectionKind)
    assert all(sec.is_empty() for sec in s.sections)
    assert s.version == 0 and s.provenance == ()


def test_constraint_stored_byte_for_byte():
    c = "no consonant phonemes"
    assert new_sketch(42, c).user_constraint == c


def test_equal_inputs_equal_except_id():
    a, b = new_sketch(7, "x"), new_sketch(7, "x")
    assert a.id != b.id
    assert _without_id(a) == _without_id(b)


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seed_must_be_u64(seed):
    with pytest.raises(ValueError):
        new_sketch(seed)


def test_append_two_blocks_to_phonology():
    s0 = new_sketch(0)
    s1 = append(s0, SectionKind.PHONOLOGY, [TextBlock.body("a."), TextBlock.body("b.")], PROV)
    assert len(s1[SectionKind.PHONOLOGY].blocks) == 2
    assert s1.version == 1
    assert s0[SectionKind.PHONOLOGY].is_empty() and s0.version == 0


def test_append_is_section_isolated():
    s0 = append(new_sketch(0), "phonology", [TextBlock.body("p.")], PROV)
    s1 = append(s0, SectionKind.GRAMMAR, [TextBlock.body("g.")], PROV)
    assert s1[SectionKind.PHONOLOGY] == s0[SectionKind.PHONOLOGY]


def test_provenance_order_matches_calls():
    s = new_sketch(0)
    for i, kind in enumerate([SectionKind.PHONOLOGY, SectionKind.GRAMMAR, SectionKind.LEXICON]):
        s = append(s, kind, [TextBlock.body(f"t{i}")], ProvenanceEntry(f"stage{i}", "t", "m", ""))
    assert [p.stage for p in s.provenance] == ["stage0", "stage1", "stage2"]
    assert s.version == 3


def test_empty_append_rejected():
    with pytest.raises(EmptyAppend):
        append(new_sketch(0), SectionKind.LEXICON, [], PROV)


def test_blank_block_text_rejected():
    with pytest.raises(ValueError):
        TextBlock.body("   ")


def test_input_snapshot_bytes_unchanged(tmp_path):
    s0 = append(new_sketch(0, sketch_id="a"), SectionKind.PHONOLOGY, [TextBlock.body("x.")], PROV)
    before = serialize(s0)
    append(s0, SectionKind.PHONOLOGY, [TextBlock.body("y.")], PROV)
    assert serialize(s0) == before


def test_render_empty_sketch_three_headings():
    lines = [line for line in render(new_sketch(0)).splitlines() if line.strip()]
    assert lines == ["[PHONOLOGY]", "[GRAMMAR]", "[LEXICON]"]


def test_render_order_sensitive():
    a, b = TextBlock.body("first."), TextBlock.body("second.")
    s1 = append(new_sketch(0, sketch_id="x"), SectionKind.GRAMMAR, [a, b], PROV)
    s2 = append(new_sketch(0, sketch_id="x"), SectionKind.GRAMMAR, [b, a], PROV)
    assert render(s1) != render(s2)


def test_split_sentences_rules():
    assert split_sentences("One. Two! Three? tail") == ["One.", "Two!", "Three?", "tail"]
    assert split_sentences("3.5 is a number. Next") == ["3.5 is a number.", "Next"]
    assert split_sentences("a (n): dog\nb (v): go") == ["a (n): dog", "b (v): go"]
    assert split_sentences("  \n ") == []


def _sketch_with(phon, gram=(TextBlock.body("g."),), lex=(TextBlock.body("l."),)):
    s = new_sketch(0, sketch_id="t")
    for kind, blocks in ((SectionKind.PHONOLOGY, phon), (SectionKind.GRAMMAR, gram), (SectionKind.LEXICON, lex)):
        s = append(s, kind, list(blocks), PROV)
    return s


def test_sample_exactly_five_returns_all():
    body = TextBlock.body(" ".join(f"Sentence {i}." for i in range(5)))
    s = _sketch_with([body])
    got = [t for k, t in sample_sentences(s, 5, 3) if k is SectionKind.PHONOLOGY]
    assert got == [f"Sentence {i}." for i in range(5)]


def test_header_only_section_contributes_nothing():
    s = _sketch_with([TextBlock.header("# Only a header")])
    assert all(k is not SectionKind.PHONOLOGY for k, _ in sample_sentences(s))


def test_sampling_deterministic_on_40_sentences():
    text = " ".join(f"Fact number {i} holds." for i in range(40))
    s = _sketch_with([TextBlock.body(text)])
    assert sample_sentences(s, 5, 11) == sample_sentences(s, 5, 11)
    assert sample_sentences(s, 5, 11) != sample_sentences(s, 5, 12)


def test_sample_per_section_must_be_positive():
    with pytest.raises(ValueError):
        sample_sentences(_sketch_with([TextBlock.body("x.")]), 0)


def test_segment_text_headings_and_paragraphs():
    text = "# Phonology\nIntro line.\nSecond line.\n\n1.2 Nouns\nNouns inflect.\n**Verbs**\nVerbs agree."
    blocks = segment_text(text)
    assert [b.kind for b in blocks] == [BlockKind.HEADER, BlockKind.BODY, BlockKind.HEADER, BlockKind.BODY,
                                        BlockKind.HEADER, BlockKind.BODY]
    assert blocks[1].text == "Intro line.\nSecond line."


def test_save_and_load(tmp_path):
    s = _sketch_with([TextBlock.body("x.")])
    path = save_sketch(s, tmp_path / "a.sketch.json")
    assert load_sketch(path) == s
    assert path.read_text(encoding="utf-8") == serialize(s)


def test_file_keys_exact():
    doc = json.loads(serialize(_sketch_with([TextBlock.body("x.")])))
    assert set(doc) == {"id", "seed", "user_constraint", "version", "sections", "provenance"}
    assert set(doc["sections"][0]) == {"kind", "blocks"}
    assert set(doc["sections"][0]["blocks"][0]) == {"kind", "text"}


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.pop("seed"), "seed"),
        (lambda d: d.__setitem__("version", "3"), "version"),
        (lambda d: d["sections"][1].__setitem__("kind", "syntax"), "sections[1].kind"),
        (lambda d: d["sections"][0]["blocks"][0].__setitem__("kind", "footer"), "sections[0].blocks[0].kind"),
        (lambda d: d["sections"][0]["blocks"][0].__setitem__("text", "  "), "sections[0].blocks[0]"),
        (lambda d: d["sections"].pop(), "sections"),
        (lambda d: d["provenance"][0].pop("model_id"), "provenance[0].model_id"),
    ],
)
def test_corrupt_document_names_field(mutate, field):
    doc = json.loads(serialize(_sketch_with([TextBlock.body("x.")])))
    mutate(doc)
    with pytest.raises(SketchFormatError) as info:
        deserialize(json.dumps(doc))
    assert info.value.field == field


def test_invalid_json():
    with pytest.raises(SketchFormatError):
        deserialize("{not json")


# Text without surrogates (JSON cannot carry lone surrogates through UTF-8).
_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1).filter(lambda t: t.strip())
_block = st.builds(TextBlock, st.sampled_from(list(BlockKind)), _text)
_prov = st.builds(ProvenanceEntry, st.text(), st.text(), st.text(), st.text())


@st.composite
def sketches(draw):
    s = new_sketch(draw(st.integers(0, 2**64 - 1)), draw(st.text()), draw(st.text(min_size=1)))
    for kind in SectionKind:
        blocks = draw(st.lists(_block, max_size=4))
        if blocks:
            s = append(s, kind, blocks, draw(_prov))
    return s


@settings(max_examples=1000, deadline=None)
@given(sketches())
def test_round_trip_property(s):
    back = deserialize(serialize(s))
    assert back == s
    assert render(back) == render(s)
    assert isinstance(back, LanguageSketch)
