"""Offline backends: scripted responses for tests and a synthetic conlang model.

``SyntheticModel`` fakes every pipeline prompt deterministically from the
request contents. It exists so the full pipeline can be recorded into a
fixture file and replayed without credentials; its languages are toys.
"""

from __future__ import annotations

import hashlib
import re
import threading
from collections import defaultdict

from .fields import emit_fields
from .templates import PromptRequest

__all__ = ["ScriptedBackend", "SyntheticModel", "checklist_text"]


class ScriptedBackend:
    """Serve canned responses per template id and record every call.

    A route is a string (always returned), a list (consumed in order; the
    last item repeats), or a callable ``f(request) -> str``.
    """

    def __init__(self, routes=None, default=None):
        self.routes = dict(routes or {})
        self.default = default
        self.calls: list[tuple[PromptRequest, str]] = []
        self._pos = defaultdict(int)
        self._lock = threading.Lock()

    def prompts(self, template_id: str) -> list[str]:
        return [p for r, p in self.calls if r.template_id == template_id]

    def count(self, template_id: str | None = None) -> int:
        return sum(1 for r, _ in self.calls if template_id is None or r.template_id == template_id)

    def __call__(self, request: PromptRequest, prompt: str) -> str:
        with self._lock:
            self.calls.append((request, prompt))
            route = self.routes.get(request.template_id, self.default)
            if route is None:
                raise KeyError(f"no scripted response for template {request.template_id!r}")
            if callable(route):
                return route(request)
            if isinstance(route, str):
                return route
            i = self._pos[request.template_id]
            self._pos[request.template_id] = i + 1
            return route[min(i, len(route) - 1)]


def _h(*parts: str) -> int:
    return int.from_bytes(hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()[:8], "little")


PHONOLOGY_CHECKLIST = [
    ("Consonant inventory", ["Small (20 or fewer consonants)", "Large (more than 20 consonants)",
                             "Small with clicks", "Large with ejectives", "Small with prenasalised stops"]),
    ("Vowel inventory", ["Small (fewer than 9 vowel qualities)", "Large (9 or more vowel qualities)",
                         "Vertical three-vowel system", "Vowels with ATR harmony", "Nasal and oral vowel pairs"]),
    ("Tone", ["No tones", "Simple tone system", "Complex tone system", "Pitch accent", "Register tone"]),
    ("Syllable structure", ["CV only", "(C)V", "(C)V(C)", "(C)(C)V(C)", "Complex clusters allowed"]),
    ("Stress placement", ["Initial", "Final", "Penultimate", "Weight-sensitive", "Lexical"]),
    ("Secondary articulation", ["None", "Labialisation", "Palatalisation", "Pharyngealisation", "Several types"]),
    ("Vowel harmony", ["None", "Backness harmony", "Rounding harmony", "Height harmony", "ATR harmony"]),
    ("Phonation contrasts", ["Voicing only", "Aspiration", "Breathy voice", "Creaky voice", "Ejective series"]),
    ("Gemination", ["None", "Consonant length", "Vowel length", "Both", "Only at morpheme boundaries"]),
    ("Coda restrictions", ["No codas", "Nasals only", "Sonorants only", "Any single consonant", "Clusters"]),
]

GRAMMAR_CHECKLIST = [
    ("Basic word order", ["SOV", "SVO", "VSO", "VOS", "OVS"]),
    ("Morphological fusion", ["Isolating", "Agglutinating", "Fusional", "Polysynthetic", "Mixed"]),
    ("Gender inventory", ["None", "Two", "Three", "Four", "Five or more"]),
    ("Alignment typology", ["Neutral", "Nominative-accusative", "Ergative-absolutive", "Tripartite", "Active-stative"]),
    ("Adposition type", ["Postpositions", "Prepositions", "Inpositions", "More than one type", "No adpositions"]),
    ("Affixation balance", ["Little affixation", "Strongly suffixing", "Weakly suffixing",
                            "Equal prefixing and suffixing", "Strongly prefixing"]),
    ("Relative-clause order", ["Noun-Relative clause (head-initial)", "Relative clause-Noun (head-final)",
                               "Internally headed", "Correlative", "Adjoined"]),
    ("Question-marking strategy", ["Question particle", "Interrogative word order (inversion)",
                                   "Interrogative verb morphology", "Interrogative intonation only", "Mixed strategies"]),
    ("Valence morphology", ["None", "Causative only", "Passive only", "Causative and applicative",
                            "Causative, passive and applicative"]),
    ("Evidentiality", ["None", "Direct vs indirect", "Visual vs non-visual", "Reportative only", "Five-way system"]),
]


def checklist_text(features) -> str:
    lines = []
    for i, (name, options) in enumerate(features, start=1):
        lines.append(f"FEATURE {i}: {name}")
        lines.extend(f"{j}. {o}" for j, o in enumerate(options, start=1))
    return "\n".join(lines)


BASIC_WORDS = [
    ("I", "pron"), ("you", "pron"), ("he", "pron"), ("she", "pron"), ("we", "pron"), ("they", "pron"),
    ("me", "pron"), ("him", "pron"), ("my", "pron"), ("dog", "n"), ("cat", "n"), ("bird", "n"),
    ("book", "n"), ("water", "n"), ("house", "n"), ("child", "n"), ("woman", "n"), ("man", "n"),
    ("mountain", "n"), ("garden", "n"), ("person", "n"), ("food", "n"), ("sleep", "v"), ("give", "v"),
    ("walk", "v"), ("see", "v"), ("talk", "v"), ("play", "v"), ("eat", "v"), ("be", "v"), ("have", "v"),
    ("big", "adj"), ("red", "adj"), ("black", "adj"), ("hungry", "adj"), ("small", "adj"),
    ("two", "num"), ("three", "num"), ("one", "num"), ("this", "dem"), ("that", "dem"), ("where", "q"),
    ("not", "neg"), ("and", "conj"), ("to", "adp"), ("in", "adp"), ("yesterday", "adv"), ("the", "det"),
    ("a", "det"), ("there", "adv"),
]

_STEMS = {"sleeping": "sleep", "walked": "walk", "talking": "talk", "played": "play", "cats": "cat",
          "children": "child", "is": "be", "are": "be", "will": "FUT", "do": "AUX", "her": "she"}


class SyntheticModel:
    """Deterministic stand-in for a chat model, keyed on template id."""

    def __call__(self, request: PromptRequest, prompt: str) -> str:
        handler = getattr(self, "_" + request.template_id, None)
        if handler is None:
            raise KeyError(f"synthetic model has no handler for {request.template_id!r}")
        return handler(request.slots)

    # -- bootstrap ---------------------------------------------------------
    def _checklist_phonology(self, slots):
        return emit_fields({"CHECKLIST": checklist_text(PHONOLOGY_CHECKLIST)}, "Here is the checklist.")

    def _checklist_grammar(self, slots):
        return emit_fields({"CHECKLIST": checklist_text(GRAMMAR_CHECKLIST)}, "Here is the checklist.")

    def _syllables(self, key: str) -> list[str]:
        cons = "ptkbdgmnslrwjhfvzqx"
        vows = "aeiouy"
        h = _h("inventory", key)
        cs = [cons[(h >> (3 * i)) % len(cons)] for i in range(7)]
        vs = [vows[(h >> (40 + 2 * i)) % len(vows)] for i in range(4)]
        return sorted({c + v for c in cs for v in vs})

    def _stage_phonology(self, slots):
        picks = slots["SELECTION"].splitlines()
        syl = self._syllables(slots["SELECTION"])
        consonants = sorted({s[0] for s in syl})
        vowels = sorted({s[1] for s in syl})
        text = ["# Phonology", "## Typological profile"]
        text.append("\n".join(p.lstrip("- ") + "." for p in picks))
        text.append("## Inventory")
        text.append(
            f"The consonants are /{' '.join(consonants)}/. The vowels are /{' '.join(vowels)}/. "
            f"Syllables are built from {len(syl)} core CV units."
        )
        if slots["USER_CONSTRAINT"] and not slots["USER_CONSTRAINT"].startswith("(none"):
            text.append(f"The design honours the constraint: {slots['USER_CONSTRAINT']}")
        return emit_fields({"CONTENT": "\n\n".join(text)})

    def _stage_grammar(self, slots):
        picks = slots["SELECTION"].splitlines()
        text = ["# Grammar", "## Typological profile", "\n".join(p.lstrip("- ") + "." for p in picks)]
        text.append("## Negation")
        text.append("Negation is marked by a preverbal particle. Plural nouns take a suffix.")
        return emit_fields({"CONTENT": "\n\n".join(text)})

    def _stage_lexicon(self, slots):
        syl = self._syllables(slots["SKETCH"][:400])
        n = min(int(slots["LEXICON_SIZE"]), len(BASIC_WORDS))
        lines, used = [], set()
        for word, pos in BASIC_WORDS[:n]:
            form = self._coin(word, syl, used)
            lines.append(f"{form} ({pos}): {word}")
        return emit_fields({"CONTENT": "# Lexicon\n\n" + "\n".join(lines)})

    def _coin(self, word, syl, used):
        h = _h("form", word, "".join(syl))
        k = 1 + h % 2
        while True:
            form = "".join(syl[(h >> (8 * i)) % len(syl)] for i in range(k))
            if form not in used:
                used.add(form)
                return form
            h = _h(str(h))
            k = min(k + 1, 4)

    # -- refinement --------------------------------------------------------
    def _critic(self, slots):
        cand = slots["CANDIDATE"]
        if "Clarification" in cand:
            return emit_fields({"SCORE": "9", "ISSUES": "none"})
        score = 7 + _h("critic", cand) % 3
        issues = "none" if score >= 9 else "- opening paragraph | One statement is ambiguous and needs clarification"
        return emit_fields({"SCORE": str(score), "ISSUES": issues})

    def _editor(self, slots):
        cand = slots["CANDIDATE"]
        if "===FIELD TRANSLATION===" in cand:
            fields = dict(re.findall(r"===FIELD ([A-Z_]+)===\n(.*?)\n===END===", cand, flags=re.S))
            rule = "Clarification of usage | Word order in this sentence follows the basic order strictly."
            fields["NEW_RULES"] = (fields.get("NEW_RULES", "") + "\n" + rule).strip()
            return emit_fields(fields)
        return emit_fields({"REVISION": cand.rstrip() + "\n\nClarification: every form above obeys the stated phonotactics."})

    # -- translation -------------------------------------------------------
    def _lexicon(self, sketch):
        lex = {}
        for m in re.finditer(r"^(\S+) \(([^)]*)\): (.+?)(?:\. Note:.*)?$", sketch, flags=re.M):
            lex.setdefault(m.group(3).strip(), m.group(1))
        return lex

    def _translate(self, slots):
        sketch = slots["SKETCH"]
        lex = self._lexicon(sketch)
        syl = self._syllables(sketch[:400])
        used = set(lex.values())
        words = re.findall(r"[A-Za-z']+", slots["SOURCE_TEXT"])
        forms, glosses, new = [], [], []
        for w in words:
            base = _STEMS.get(w.lower(), w if w == "I" else w.lower())
            if base in lex:
                form = lex[base]
            else:
                form = self._coin(base, syl, used)
                lex[base] = form
                new.append(f"{form} | {base} | ? | coined for this sentence")
            forms.append(form)
            glosses.append(base.upper() if base.isupper() or base in ("the", "a") else base)
        fields = {"TRANSLATION": " ".join(forms), "GLOSS": " ".join(glosses)}
        if new:
            fields["NEW_LEXEMES"] = "\n".join(new)
        if slots["SOURCE_TEXT"].endswith("?") and "Question marking" not in sketch:
            fields["NEW_RULES"] = "Question marking | Polar and content questions end with a rising-tone particle."
        return emit_fields(fields)

    # -- baseline ----------------------------------------------------------
    def _baseline(self, slots):
        syl = self._syllables(slots["USER_CONSTRAINT"])
        used: set = set()
        lex = {w: self._coin(w, syl, used) for w, _ in BASIC_WORDS}
        fields = {
            "PHONOLOGY": "# Phonology\n\nThe language has five vowels and a simple CV syllable.",
            "GRAMMAR": "# Grammar\n\nBasic word order: SVO.\nMorphological fusion: Isolating.",
            "LEXICON": "\n".join(f"{f} ({p}): {w}" for (w, p), f in zip(BASIC_WORDS, lex.values())),
        }
        sentences = [re.sub(r"^\d+\.\s*", "", s) for s in slots["SENTENCES"].splitlines()]
        for i, s in enumerate(sentences, start=1):
            words = [_STEMS.get(w.lower(), w.lower()) for w in re.findall(r"[A-Za-z']+", s)]
            fields[f"TRANSLATION_{i}"] = " ".join(lex.get(w) or self._coin(w, syl, used) for w in words)
            fields[f"GLOSS_{i}"] = " ".join(words)
        return emit_fields(fields)

    # -- judging -----------------------------------------------------------
    def _judge_wals(self, slots):
        sketch = slots["SKETCH"]
        out = {}
        for line in slots["FEATURES"].splitlines():
            m = re.match(r"^(WALS_\w+) \((.+?), WALS [^)]*\): (.*)$", line)
            if not m:
                continue
            code, name, values = m.groups()
            allowed = [v.strip() for v in values.split(" | ")]
            stated = re.search(rf"^{re.escape(name)}: (.+?)\.$", sketch, flags=re.M)
            if stated and stated.group(1) in allowed:
                out[code] = stated.group(1)
            else:
                out[code] = allowed[_h("wals", code, sketch) % len(allowed)]
        return emit_fields(out)

    def _judge_language(self, slots):
        ok = _h("lang", slots["STATEMENT"]) % 6 != 0
        why = "Matches the rest of the description." if ok else "Conflicts with another statement."
        return emit_fields({"VERDICT": "consistent" if ok else "inconsistent", "RATIONALE": why})

    def _judge_translation(self, slots):
        ok = _h("trans", slots["TRANSLATION"], slots["GLOSS"]) % 3 != 0
        why = "Forms and order follow the grammar." if ok else "Word order departs from the stated basic order."
        return emit_fields({"VERDICT": "consistent" if ok else "inconsistent", "RATIONALE": why})
