import json
import subprocess
import sys
from html.parser import HTMLParser
from pathlib import Path

import pytest

from conlangkit.cli import main
from conlangkit.config import ConfigError, RunConfig, load_config
from conlangkit.report import build_report
from conlangkit.sketch import load_sketch, save_sketch
from conlangkit.testing import ScriptedBackend, SyntheticModel
from conlangkit.translator import read_translations

from conftest import DEMO_CONFIG, ROOT, small_sketch


def replay(tmp_path, *args):
    return ["--config", str(DEMO_CONFIG), "--out", str(tmp_path), *args]


def synthetic(tmp_path, *args):
    return ["--model", "gen", "--judge-model", "judge", "--mode", "record",
            "--fixtures", str(tmp_path / "rec.fixtures.jsonl"), "--out", str(tmp_path), *args]


def sketches_in(d):
    return sorted(Path(d).glob("*.sketch.json"))


class Links(HTMLParser):
    def __init__(self):
        super().__init__()
        self.hrefs = []

    def handle_starttag(self, tag, attrs):
        self.hrefs += [v for k, v in attrs if k == "href"]


def hrefs(path):
    p = Links()
    p.feed(path.read_text(encoding="utf-8"))
    return p.hrefs


# ---- config ---------------------------------------------------------------


def test_config_file_and_overrides(tmp_path):
    cfg = load_config(DEMO_CONFIG, seed=7)
    assert cfg.seed == 7 and cfg.n_languages == 3
    assert Path(cfg.fixtures_path) == ROOT / "fixtures" / "demo.fixtures.jsonl"
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(ConfigError):
        load_config(bad)


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(gateway_mode="replay").validate()
    with pytest.raises(ConfigError):
        RunConfig(gateway_mode="replay", fixtures_path="/nonexistent/x.jsonl").validate()
    with pytest.raises(ConfigError):
        RunConfig(seed=-1).validate()
    with pytest.raises(ConfigError):
        RunConfig(refine_threshold=12).validate()


def test_judge_equal_to_generator_warns():
    with pytest.warns(UserWarning):
        RunConfig(generator_model_id="m", judge_model_id="m").validate()


def test_distinct_judge_no_warning(recwarn):
    RunConfig(generator_model_id="a", judge_model_id="b").validate()
    assert len(recwarn) == 0


# ---- generate -------------------------------------------------------------


def test_generate_replay_two_languages(tmp_path):
    assert main(["generate", *replay(tmp_path, "--n", "2")]) == 0
    files = sketches_in(tmp_path)
    assert len(files) == 2
    manifest = json.loads((tmp_path / "generate.manifest.json").read_text())
    assert [e["seed"] for e in manifest["languages"]] == [0, 1]
    assert all(e["status"] == "ok" for e in manifest["languages"])
    assert manifest["generator_model_id"] == "synthetic-generator"
    assert all(load_sketch(f).is_complete() for f in files)


def test_replay_missing_fixtures_is_config_error(tmp_path, capsys):
    spy = ScriptedBackend(default="unused")
    code = main(["generate", "--mode", "replay", "--fixtures", str(tmp_path / "missing.jsonl"),
                 "--out", str(tmp_path)], backend=spy)
    assert code == 2 and spy.calls == []
    assert "missing.jsonl" in capsys.readouterr().err
    assert sketches_in(tmp_path) == []


def test_constraint_in_every_sketch(tmp_path):
    c = "the language has no nasal consonants"
    assert main(["generate", *synthetic(tmp_path, "--n", "3", "--constraint", c)], backend=SyntheticModel()) == 0
    assert [load_sketch(f).user_constraint for f in sketches_in(tmp_path)] == [c] * 3


def test_generate_failure_exit_1_and_partial(tmp_path):
    model = SyntheticModel()

    def route(request, prompt):
        if request.template_id == "stage_lexicon" and "seed=1" not in prompt:
            return "broken"
        return model(request, prompt)

    # Seeds 0 and 1 run; the lexicon stage fails for every language.
    code = main(["generate", *synthetic(tmp_path, "--n", "2")], backend=route)
    assert code == 1
    manifest = json.loads((tmp_path / "generate.manifest.json").read_text())
    assert {e["status"] for e in manifest["languages"]} == {"failed"}
    assert manifest["languages"][0]["failed_stage"] == "lexicon"
    assert len(list(tmp_path.glob("*.partial.json"))) == 2


# ---- translate ------------------------------------------------------------


def test_translate_default_sentences(tmp_path):
    main(["generate", *replay(tmp_path, "--n", "1")])
    assert main(["translate", *replay(tmp_path)]) == 0
    (tfile,) = tmp_path.glob("*.translations.jsonl")
    recs = read_translations(tfile)
    assert len(recs) == 10 and all(r.translation and r.gloss for r in recs)


def test_translate_custom_sentences(tmp_path):
    sents = tmp_path / "three.txt"
    sents.write_text("The cat runs.\n\nBirds sing.\n  I see you.  \n")
    save_sketch(small_sketch(), tmp_path / "s1.sketch.json")
    assert main(["translate", *synthetic(tmp_path, "--sentences", str(sents))], backend=SyntheticModel()) == 0
    recs = read_translations(tmp_path / "s1.translations.jsonl")
    assert [r.source for r in recs] == ["The cat runs.", "Birds sing.", "I see you."]


def test_translate_corpus_mode_rewrites_sketch(tmp_path):
    save_sketch(small_sketch(), tmp_path / "s1.sketch.json")
    before = load_sketch(tmp_path / "s1.sketch.json")
    assert main(["translate", *synthetic(tmp_path, "--corpus")], backend=SyntheticModel()) == 0
    after = load_sketch(tmp_path / "s1.sketch.json")
    assert after.version > before.version
    manifest = json.loads((tmp_path / "translate.manifest.json").read_text())
    assert manifest["independent"] is False and manifest["languages"][0]["sketch_version"] == after.version


def test_translate_corrupt_sketch_names_field(tmp_path, capsys):
    path = tmp_path / "bad.sketch.json"
    save_sketch(small_sketch(), path)
    doc = json.loads(path.read_text())
    doc["sections"][1]["blocks"][0]["kind"] = "paragraph"
    path.write_text(json.dumps(doc))
    assert main(["translate", *synthetic(tmp_path), str(path)], backend=SyntheticModel()) == 2
    assert "sections[1].blocks[0].kind" in capsys.readouterr().err


def test_translate_partial_errors_exit_1(tmp_path):
    model = SyntheticModel()

    def route(request, prompt):
        if request.template_id == "translate" and "fish" in request.slots["SOURCE_TEXT"]:
            return "unparseable"
        return model(request, prompt)

    save_sketch(small_sketch(), tmp_path / "s1.sketch.json")
    sents = tmp_path / "s.txt"
    sents.write_text("The dog sleeps.\nThe fish swims.\n")
    assert main(["translate", *synthetic(tmp_path, "--sentences", str(sents))], backend=route) == 1
    manifest = json.loads((tmp_path / "translate.manifest.json").read_text())
    assert [e["index"] for e in manifest["languages"][0]["errors"]] == [1]
    assert len(read_translations(tmp_path / "s1.translations.jsonl")) == 1


# ---- evaluate -------------------------------------------------------------


def test_evaluate_single_sketch(tmp_path):
    save_sketch(small_sketch(), tmp_path / "s1.sketch.json")
    assert main(["evaluate", *synthetic(tmp_path)], backend=SyntheticModel()) == 0
    doc = json.loads((tmp_path / "run.metrics.json").read_text())
    assert doc["diversity"] is None
    assert any(n.startswith("diversity unavailable") for n in doc["notes"])
    assert doc["language_consistency"]["s1"]["n_total"] > 0
    assert not (tmp_path / "distance_matrix.csv").exists()


def test_evaluate_checksum_mismatch_hard_error(tmp_path, capsys):
    save_sketch(small_sketch(), tmp_path / "s1.sketch.json")
    custom = tmp_path / "features.json"
    custom.write_text(json.dumps({"features": []}))
    spy = ScriptedBackend(default="unused")
    assert main(["evaluate", *synthetic(tmp_path, "--features", str(custom))], backend=spy) == 2
    assert "checksum" in capsys.readouterr().err and spy.calls == []


def test_evaluate_twenty_sketches(tmp_path):
    model = SyntheticModel()
    assert main(["generate", *synthetic(tmp_path, "--n", "20", "--jobs", "4")], backend=model) == 0
    assert main(["translate", *synthetic(tmp_path, "--jobs", "4")], backend=model) == 0
    assert main(["evaluate", *synthetic(tmp_path, "--jobs", "4")], backend=model) == 0
    doc = json.loads((tmp_path / "run.metrics.json").read_text())
    assert 0.0 <= doc["diversity"]["d_mean"] <= 1.0
    assert doc["diversity"]["n_languages"] == 20 and len(doc["translation_consistency"]) == 20
    rows = (tmp_path / "distance_matrix.csv").read_text().splitlines()
    assert len(rows) == 21


# ---- report ---------------------------------------------------------------


def test_report_links_resolve(tmp_path):
    for cmd in ("generate", "translate", "evaluate"):
        assert main([cmd, *replay(tmp_path, "--n", "2")]) == 0
    site = build_report(tmp_path)
    pages = sorted(site.glob("*.html"))
    assert len(pages) == 3 and (site / "index.html") in pages
    for page in pages:
        for href in hrefs(page):
            target = href.split("#")[0]
            if target:
                assert (site / target).is_file(), f"{page.name} links to missing {href}"
    assert len([h for h in hrefs(site / "index.html") if h.startswith("lang-")]) == 2
    html = next(p for p in pages if p.name != "index.html").read_text()
    assert "<td>" in html and "Translations" in html


def test_report_without_translations(tmp_path):
    save_sketch(small_sketch(), tmp_path / "s1.sketch.json")
    site = build_report(tmp_path)
    html = (site / "lang-s1.html").read_text()
    assert "kala (n): dog" in html and "Translations" in html
    table = html.split("<h2>Translations</h2>", 1)[1].split("</table>", 1)[0]
    assert "<td>" not in table and "<th>Source</th>" in table


def test_report_deterministic(tmp_path):
    save_sketch(small_sketch(), tmp_path / "s1.sketch.json")
    a = {p.name: p.read_bytes() for p in build_report(tmp_path, tmp_path / "a").iterdir()}
    b = {p.name: p.read_bytes() for p in build_report(tmp_path, tmp_path / "b").iterdir()}
    assert a == b and len(a) == 2


def test_report_escapes_html(tmp_path):
    save_sketch(small_sketch(constraint="<script>alert(1)</script>"), tmp_path / "s1.sketch.json")
    html = (build_report(tmp_path) / "lang-s1.html").read_text()
    assert "<script>alert" not in html and "&lt;script&gt;" in html


def test_report_needs_sketches(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 2


# ---- process level --------------------------------------------------------


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "conlangkit", "generate", *replay(tmp_path, "--n", "1")],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0, proc.stderr
    assert "generated 1/1" in proc.stdout


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 2


def test_logs_never_contain_secret(tmp_path, monkeypatch, capfd):
    monkeypatch.setenv("OPENAI_API_KEY", "sk-super-secret-123")
    import logging

    def leaky(request, prompt):
        logging.getLogger("conlangkit.test").error("calling with sk-super-secret-123")
        return SyntheticModel()(request, prompt)

    main(["generate", *synthetic(tmp_path, "--n", "1")], backend=leaky)
    err = capfd.readouterr().err
    assert "sk-super-secret-123" not in err and "***" in err
    assert "sk-super-secret-123" not in (tmp_path / "rec.fixtures.jsonl").read_text()
