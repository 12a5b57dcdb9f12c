from __future__ import annotations

from pathlib import Path

import pytest

from conlangkit.fields import emit_fields
from conlangkit.gateway import Gateway
from conlangkit.sketch import ProvenanceEntry, SectionKind, TextBlock, append, new_sketch
from conlangkit.testing import ScriptedBackend

ROOT = Path(__file__).resolve().parents[1]
DEMO_CONFIG = ROOT / "fixtures" / "demo.config.json"
DEMO_FIXTURES = ROOT / "fixtures" / "demo.fixtures.jsonl"

PROV = ProvenanceEntry("test", "1970-01-01T00:00:00+00:00", "m", "")


def scripted(routes=None, default=None, **kw):
    """A live-mode gateway over a ScriptedBackend; returns ``(gateway, backend)``."""
    backend = ScriptedBackend(routes, default)
    kw.setdefault("backoff", 0.0)
    return Gateway(backend, mode="live", model_id="gen", **kw), backend


def critic_reply(score, issues=()):
    fields = {"SCORE": str(score)}
    if issues:
        fields["ISSUES"] = "\n".join(f"- {loc} | {desc}" for loc, desc in issues)
    return emit_fields(fields)


def small_sketch(seed=0, constraint="", sketch_id="s1"):
    """A complete three-section sketch with a tiny lexicon."""
    s = new_sketch(seed, constraint, sketch_id)
    s = append(s, SectionKind.PHONOLOGY, [TextBlock.header("# Phonology"),
                                           TextBlock.body("There are five vowels. Stress is initial.")], PROV)
    s = append(s, SectionKind.GRAMMAR, [TextBlock.header("# Grammar"),
                                         TextBlock.body("Word order is SOV. Adjectives follow nouns.")], PROV)
    s = append(s, SectionKind.LEXICON, [TextBlock.header("# Lexicon"),
                                         TextBlock.body("kala (n): dog\nmipu (v): sleep\ntoro (adj): big")], PROV)
    return s


# ---- acceptance criterion reporting -------------------------------------

_CRITERIA: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion covered by this test")
    config.addinivalue_line("markers", "live: needs provider credentials (non-gating)")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.setdefault(crit, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcomes in _CRITERIA.items():
        if "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"{status}  {name}")
