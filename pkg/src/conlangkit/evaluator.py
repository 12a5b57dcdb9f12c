"""Judge-based evaluation: typological profiles, diversity, and consistency rates.

Diversity is the mean over language pairs of the fraction of typological
features on which the two languages take different values. A feature only
counts for a pair when the judge assigned it a value in both languages, so
each pair is normalised by its own number of comparable features.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .fields import FieldSchema, ParseError
from .gateway import Gateway, StructuredOutputFailure
from .sketch import LanguageSketch, render, sample_sentences
from .translator import TranslationRecord

__all__ = [
    "WalsFeature",
    "WalsFeatureSet",
    "WalsProfile",
    "DiversityResult",
    "ItemVerdict",
    "ConsistencyResult",
    "TooFewProfiles",
    "NoComparablePairs",
    "FeatureSetChecksumError",
    "SHIPPED_FEATURES_SHA256",
    "load_feature_set",
    "encode_profile",
    "diversity",
    "language_consistency",
    "translation_consistency",
    "export_distance_matrix",
    "read_distance_matrix",
    "metrics_report",
    "write_metrics",
    "METRICS_SUFFIX",
]

log = logging.getLogger(__name__)

METRICS_SUFFIX = ".metrics.json"
SHIPPED_FEATURES_SHA256 = "08ce46c547f7308c7c242090203c10636836e7bd29e587e36c1a14e17d406e22"
N_WALS_FEATURES = 16
NULL_ANSWERS = {"unspecified", "unknown", "null", "n/a", "not specified", "unclear"}


class TooFewProfiles(ValueError):
    pass


class NoComparablePairs(ValueError):
    pass


class FeatureSetChecksumError(ValueError):
    pass


@dataclass(frozen=True)
class WalsFeature:
    wals_number: str
    name: str
    allowed_values: tuple[str, ...]

    @property
    def field_name(self) -> str:
        return "WALS_" + self.wals_number.replace("-", "_")

    def normalise(self, answer: str):
        """Map a judge answer to a canonical allowed value, ``None``, or raise KeyError."""
        a = answer.strip().strip("\"'").rstrip(".").strip()
        if a.casefold() in NULL_ANSWERS:
            return None
        for value in self.allowed_values:
            if value.casefold() == a.casefold():
                return value
        raise KeyError(a)


@dataclass(frozen=True)
class WalsFeatureSet:
    features: tuple[WalsFeature, ...]
    checksum: str = ""

    def __len__(self):
        return len(self.features)

    def prompt_listing(self) -> str:
        return "\n".join(
            f"{f.field_name} ({f.name}, WALS {f.wals_number}): {' | '.join(f.allowed_values)} | unspecified"
            for f in self.features
        )


def load_feature_set(path=None, expected_checksum: str | None = SHIPPED_FEATURES_SHA256) -> WalsFeatureSet:
    """Load the feature definitions and verify their SHA-256 checksum.

    Pass ``expected_checksum=None`` to skip verification for custom sets.
    """
    if path is None:
        raw = resources.files("conlangkit").joinpath("data", "wals_features.json").read_bytes()
    else:
        raw = Path(path).read_bytes()
    checksum = hashlib.sha256(raw).hexdigest()
    if expected_checksum is not None and checksum != expected_checksum:
        raise FeatureSetChecksumError(f"feature set checksum {checksum} does not match expected {expected_checksum}")
    doc = json.loads(raw.decode("utf-8"))
    features = tuple(
        WalsFeature(str(f["wals_number"]), f["name"], tuple(f["allowed_values"])) for f in doc["features"]
    )
    if expected_checksum == SHIPPED_FEATURES_SHA256 and len(features) != N_WALS_FEATURES:
        raise ValueError(f"expected {N_WALS_FEATURES} features, found {len(features)}")
    return WalsFeatureSet(features, checksum)


@dataclass(frozen=True)
class WalsProfile:
    language_id: str
    values: tuple  # one allowed value or None per feature

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    def check(self, feature_set: WalsFeatureSet) -> None:
        if len(self.values) != len(feature_set):
            raise ValueError(f"profile {self.language_id} has {len(self.values)} values for {len(feature_set)} features")
        for v, f in zip(self.values, feature_set.features):
            if v is not None and v not in f.allowed_values:
                raise ValueError(f"{v!r} is not an allowed value of {f.name}")


class _OutOfVocabulary(ParseError):
    def __init__(self, values, bad):
        self.values = values
        self.bad = bad
        super().__init__(
            "answers outside the allowed values: " + "; ".join(f"{name}={ans!r}" for name, ans in bad.items())
        )


def encode_profile(
    gateway: Gateway,
    judge_model: str,
    sketch: LanguageSketch,
    feature_set: WalsFeatureSet,
    max_retries: int = 3,
) -> WalsProfile:
    """Have the judge classify the sketch on every feature.

    Answers that stay outside a feature's allowed values after the retries
    are recorded as ``None``, like explicit "unspecified" answers.
    """
    if not sketch.is_complete():
        raise ValueError(f"sketch {sketch.id} is incomplete")
    schema = FieldSchema(required=tuple(f.field_name for f in feature_set.features))
    req = gateway.request(
        "judge_wals",
        {"SKETCH": render(sketch), "FEATURES": feature_set.prompt_listing()},
        judge_model,
    )

    def parse(resp):
        values, bad = [], {}
        for f in feature_set.features:
            try:
                values.append(f.normalise(resp[f.field_name]))
            except KeyError:
                values.append(None)
                bad[f.field_name] = resp[f.field_name].strip()
        if bad:
            raise _OutOfVocabulary(values, bad)
        return values

    try:
        values = gateway.complete_structured(req, schema, max_retries, parse)
    except StructuredOutputFailure as exc:
        last = exc.errors[-1]
        if not isinstance(last, _OutOfVocabulary):
            raise
        log.warning("profile %s: nulling out-of-vocabulary answers %s", sketch.id, last.bad)
        values = last.values
    return WalsProfile(sketch.id, tuple(values))


@dataclass
class DiversityResult:
    d_mean: float
    pairwise: np.ndarray  # NaN marks pairs without comparable features
    n_languages: int
    language_ids: list[str] = field(default_factory=list)
    comparable: np.ndarray | None = None  # per-pair count of mutually non-null features

    @property
    def included_pairs(self) -> int:
        iu = np.triu_indices(self.n_languages, k=1)
        return int(np.count_nonzero(~np.isnan(self.pairwise[iu])))


def _codes(profiles) -> np.ndarray:
    k = len(profiles[0].values)
    codes = np.full((len(profiles), k), -1, dtype=np.int64)
    for j in range(k):
        vocab: dict = {}
        for i, p in enumerate(profiles):
            v = p.values[j]
            if v is not None:
                codes[i, j] = vocab.setdefault(v, len(vocab))
    return codes


def diversity(profiles) -> DiversityResult:
    profiles = list(profiles)
    if len(profiles) < 2:
        raise TooFewProfiles(f"diversity needs at least 2 profiles, got {len(profiles)}")
    k = len(profiles[0].values)
    if any(len(p.values) != k for p in profiles):
        raise ValueError("profiles do not share one feature set")
    codes = _codes(profiles)
    known = codes >= 0
    both = known[:, None, :] & known[None, :, :]
    differ = both & (codes[:, None, :] != codes[None, :, :])
    comparable = both.sum(axis=2)
    mismatches = differ.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        pairwise = np.where(comparable > 0, mismatches / np.maximum(comparable, 1), np.nan)
    np.fill_diagonal(pairwise, 0.0)
    iu = np.triu_indices(len(profiles), k=1)
    upper = pairwise[iu]
    kept = upper[~np.isnan(upper)]
    if kept.size == 0:
        raise NoComparablePairs("no pair of profiles shares a non-null feature")
    short = comparable[iu][comparable[iu] != k]
    if short.size:
        log.info("%d pair(s) compared on fewer than %d features", short.size, k)
    return DiversityResult(
        d_mean=float(kept.mean()),
        pairwise=pairwise,
        n_languages=len(profiles),
        language_ids=[p.language_id for p in profiles],
        comparable=comparable,
    )


@dataclass(frozen=True)
class ItemVerdict:
    item: str
    verdict: bool
    judge_rationale: str = ""


@dataclass
class ConsistencyResult:
    kind: str  # "language" or "translation"
    per_item: list[ItemVerdict]

    @property
    def n_total(self) -> int:
        return len(self.per_item)

    @property
    def n_consistent(self) -> int:
        return sum(1 for v in self.per_item if v.verdict)

    @property
    def rate(self) -> float:
        if not self.per_item:
            raise ValueError(f"{self.kind} consistency has no items")
        return self.n_consistent / self.n_total

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_consistent": self.n_consistent,
            "n_total": self.n_total,
            "rate": self.rate,
            "per_item": [
                {"item": v.item, "verdict": v.verdict, "judge_rationale": v.judge_rationale} for v in self.per_item
            ],
        }


VERDICT_SCHEMA = FieldSchema(required=("VERDICT",), optional=("RATIONALE",))
_YES = {"consistent", "yes", "true", "correct", "valid"}
_NO = {"inconsistent", "no", "false", "incorrect", "invalid"}


def _parse_verdict(resp) -> tuple[bool, str]:
    word = resp["VERDICT"].strip().strip("*.\"'").casefold()
    if word in _YES:
        return True, resp.get("RATIONALE", "").strip()
    if word in _NO:
        return False, resp.get("RATIONALE", "").strip()
    raise ParseError(f"VERDICT must be 'consistent' or 'inconsistent', got {resp['VERDICT'].strip()!r}")


def _judge(gateway, template_id, slots, judge_model, item, max_retries) -> ItemVerdict:
    req = gateway.request(template_id, slots, judge_model)
    try:
        ok, why = gateway.complete_structured(req, VERDICT_SCHEMA, max_retries, _parse_verdict)
    except StructuredOutputFailure as exc:
        return ItemVerdict(item, False, f"judge reply could not be parsed: {exc.errors[-1]}")
    return ItemVerdict(item, ok, why)


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def language_consistency(
    gateway: Gateway,
    judge_model: str,
    sketch: LanguageSketch,
    per_section: int = 5,
    rng_seed: int = 0,
    max_retries: int = 3,
    jobs: int = 1,
) -> ConsistencyResult:
    """Judge sampled body sentences against the whole sketch.

    The denominator is the number of sentences actually sampled, which is
    below ``3 * per_section`` when a section is short.
    """
    if not sketch.is_complete():
        raise ValueError(f"sketch {sketch.id} is incomplete")
    context = render(sketch)
    sample = sample_sentences(sketch, per_section, rng_seed)

    def one(pair):
        kind, sentence = pair
        slots = {"SKETCH": context, "SECTION": kind.value, "STATEMENT": sentence}
        return _judge(gateway, "judge_language", slots, judge_model, f"[{kind.value}] {sentence}", max_retries)

    return ConsistencyResult("language", _map(one, sample, jobs))


def translation_consistency(
    gateway: Gateway,
    judge_model: str,
    sketch: LanguageSketch,
    records,
    max_retries: int = 3,
    jobs: int = 1,
) -> ConsistencyResult:
    records = list(records)
    if not records:
        raise ValueError("records must be non-empty")
    context = render(sketch)

    def one(rec: TranslationRecord):
        slots = {"SKETCH": context, "SOURCE_TEXT": rec.source, "TRANSLATION": rec.translation, "GLOSS": rec.gloss}
        return _judge(gateway, "judge_translation", slots, judge_model, rec.source, max_retries)

    return ConsistencyResult("translation", _map(one, records, jobs))


def export_distance_matrix(result: DiversityResult, path) -> Path:
    """Write the pairwise matrix as CSV with language ids on both axes.

    Values use ``repr`` so they parse back exactly; excluded pairs are empty cells.
    """
    ids = result.language_ids or [str(i) for i in range(result.n_languages)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["language_id", *ids])
    for lang, row in zip(ids, result.pairwise):
        w.writerow([lang, *("" if math.isnan(x) else repr(float(x)) for x in row)])
    return atomic_write_text(path, buf.getvalue())


def read_distance_matrix(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    ids = rows[0][1:]
    matrix = np.array([[float(c) if c else np.nan for c in r[1:]] for r in rows[1:]], dtype=float)
    return ids, matrix


def metrics_report(
    feature_set: WalsFeatureSet,
    profiles,
    diversity_result: DiversityResult | None,
    language: dict,
    translation: dict,
    matrix_file: str | None = None,
    notes=(),
) -> dict:
    """Assemble the metrics document; ``language``/``translation`` map sketch id to result."""
    return {
        "feature_set_checksum": feature_set.checksum,
        "features": [f.field_name for f in feature_set.features],
        "profiles": [{"language_id": p.language_id, "values": list(p.values)} for p in profiles],
        "diversity": None
        if diversity_result is None
        else {
            "d_mean": diversity_result.d_mean,
            "n_languages": diversity_result.n_languages,
            "included_pairs": diversity_result.included_pairs,
            "distance_matrix": matrix_file,
        },
        "language_consistency": {k: v.to_dict() for k, v in sorted(language.items())},
        "translation_consistency": {k: v.to_dict() for k, v in sorted(translation.items())},
        "notes": list(notes),
    }


def write_metrics(report: dict, path) -> Path:
    return atomic_write_text(path, json.dumps(report, ensure_ascii=False, indent=2) + "\n")
