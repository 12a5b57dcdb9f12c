"""Critic/editor self-refinement loop.

Each iteration scores the current candidate with the critic. The loop stops
as soon as the score reaches the threshold, the critic reports no issues, or
the iteration cap is hit; otherwise the editor revises the candidate against
the itemised issues and the next iteration begins. No edit follows the final
critique, so the returned text is always one the critic has scored, except
when an error cuts the loop short.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Callable

from .fields import FieldSchema, ParseError, emit_fields
from .gateway import Gateway, StructuredOutputFailure

__all__ = [
    "Issue",
    "CritiqueReport",
    "RefineConfig",
    "IterationRecord",
    "RefineTrace",
    "ScoreOutOfRange",
    "critique",
    "edit",
    "refine_loop",
    "format_issues",
    "parse_issues",
]

log = logging.getLogger(__name__)

CRITIC_SCHEMA = FieldSchema(required=("SCORE",), optional=("ISSUES",))
EDITOR_SCHEMA = FieldSchema(required=("REVISION",))


class ScoreOutOfRange(ParseError):
    def __init__(self, score: int):
        self.score = score
        super().__init__(f"critic score {score} is outside 1-10")


@dataclass(frozen=True)
class Issue:
    location: str
    description: str


@dataclass(frozen=True)
class CritiqueReport:
    score: int
    issues: tuple[Issue, ...] = ()

    def __post_init__(self):
        if not 1 <= self.score <= 10:
            raise ScoreOutOfRange(self.score)
        object.__setattr__(self, "issues", tuple(self.issues))


@dataclass(frozen=True)
class RefineConfig:
    threshold: int = 9
    max_iterations: int = 10
    model_id: str | None = None  # critic/editor model; None means the gateway default
    max_retries: int = 3

    def __post_init__(self):
        if not 1 <= self.threshold <= 10:
            raise ValueError("threshold must lie in 1..10")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    score: int
    issue_count: int


@dataclass
class RefineTrace:
    iterations: list[IterationRecord] = field(default_factory=list)
    edits: int = 0
    terminated_by: str = ""  # threshold | no_issues | cap | error
    error: str | None = None

    @property
    def final_score(self) -> int | None:
        return self.iterations[-1].score if self.iterations else None

    def to_dict(self) -> dict:
        return {
            "iterations": [{"score": it.score, "issue_count": it.issue_count} for it in self.iterations],
            "edits": self.edits,
            "final_score": self.final_score,
            "terminated_by": self.terminated_by,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RefineTrace":
        return cls(
            [IterationRecord(int(it["score"]), int(it["issue_count"])) for it in doc.get("iterations", [])],
            int(doc.get("edits", 0)),
            doc.get("terminated_by", ""),
            doc.get("error"),
        )

    def summary(self) -> str:
        scores = ",".join(str(it.score) for it in self.iterations)
        text = f"refine: {len(self.iterations)} critique(s) [{scores}], {self.edits} edit(s), stop={self.terminated_by}"
        if self.error:
            text += f", error={self.error}"
        return text


_ISSUE_LINE = re.compile(r"^\s*(?:[-*]|\d+[.)])\s*(.*)$")
_NONE = {"", "none", "no issues", "n/a", "-"}


def parse_issues(text: str) -> list[Issue]:
    """Read ``- location | description`` lines; a bare line has an empty location."""
    issues = []
    for line in text.splitlines():
        if not line.strip() or line.strip().lower().rstrip(".") in _NONE:
            continue
        m = _ISSUE_LINE.match(line)
        body = (m.group(1) if m else line).strip()
        if not body:
            continue
        if " | " in body:
            loc, desc = body.split(" | ", 1)
            issues.append(Issue(loc.strip(), desc.strip()))
        else:
            issues.append(Issue("", body))
    return issues


def format_issues(issues) -> str:
    return "\n".join(f"- {i.location} | {i.description}" if i.location else f"- {i.description}" for i in issues)


def _parse_score(text: str) -> int:
    m = re.fullmatch(r"\s*(-?\d+)\s*(?:/\s*10)?\s*", text)
    if not m:
        raise ParseError(f"SCORE must be an integer from 1 to 10, got {text.strip()!r}")
    score = int(m.group(1))
    if not 1 <= score <= 10:
        raise ScoreOutOfRange(score)
    return score


def _parse_critique(resp) -> CritiqueReport:
    return CritiqueReport(_parse_score(resp["SCORE"]), tuple(parse_issues(resp.get("ISSUES", ""))))


def critique(gateway: Gateway, context: str, candidate: str, model_id=None, max_retries=3) -> CritiqueReport:
    if not candidate.strip():
        raise ValueError("candidate must be non-empty")
    req = gateway.request("critic", {"SKETCH": context, "CANDIDATE": candidate}, model_id)
    try:
        return gateway.complete_structured(req, CRITIC_SCHEMA, max_retries, _parse_critique)
    except StructuredOutputFailure as exc:
        if isinstance(exc.errors[-1], ScoreOutOfRange):
            raise exc.errors[-1] from exc
        raise


def edit(
    gateway: Gateway,
    context: str,
    candidate: str,
    issues,
    model_id=None,
    max_retries=3,
    output_schema: FieldSchema | None = None,
    validate: Callable[[str], object] | None = None,
) -> str:
    """Ask the editor to revise ``candidate`` so it resolves ``issues``.

    Plain candidates come back in a single REVISION field. When
    ``output_schema`` is given the candidate is itself a field-block record
    and the editor answers with those fields directly; the revision is the
    re-emitted block text. ``validate`` may reject a revision with a
    :class:`ParseError`, which triggers a retry.
    """
    issues = list(issues)
    if not issues:
        raise ValueError("edit requires at least one issue")
    if output_schema is None:
        fmt = "Return the complete revised text in a single REVISION field."
        schema = EDITOR_SCHEMA
    else:
        names = ", ".join(output_schema.required + output_schema.optional)
        fmt = f"Return the complete revised record using the same fields as the candidate ({names})."
        schema = output_schema
    slots = {"SKETCH": context, "CANDIDATE": candidate, "ISSUES": format_issues(issues), "OUTPUT_FORMAT": fmt}
    req = gateway.request("editor", slots, model_id)

    def parse(resp):
        if output_schema is None:
            text = resp["REVISION"]
        else:
            text = emit_fields({k: resp.fields[k] for k in schema.names if k in resp.fields})
        if validate is not None:
            validate(text)
        return text

    return gateway.complete_structured(req, schema, max_retries, parse)


def refine_loop(
    gateway: Gateway,
    context: str,
    candidate: str,
    cfg: RefineConfig | None = None,
    extra_issues: Callable[[str], list] | None = None,
    output_schema: FieldSchema | None = None,
    validate: Callable[[str], object] | None = None,
) -> tuple[str, RefineTrace]:
    """Run critique/edit rounds and return ``(text, trace)``.

    ``extra_issues`` lets the caller add mechanically detected problems
    (e.g. gloss misalignment) to every critique before the stop test.

    Transport errors and fixture misses propagate. A model reply that cannot
    be parsed ends the loop early; the best-scored candidate so far is
    returned and the trace carries the error.
    """
    cfg = cfg or RefineConfig()
    trace = RefineTrace()
    current = candidate
    best, best_score = candidate, None
    for i in range(1, cfg.max_iterations + 1):
        try:
            report = critique(gateway, context, current, cfg.model_id, cfg.max_retries)
        except (StructuredOutputFailure, ScoreOutOfRange) as exc:
            trace.terminated_by, trace.error = "error", f"critique: {exc}"
            log.warning("refine stopped: %s", trace.error)
            return best, trace
        issues = list(report.issues)
        if extra_issues is not None:
            issues.extend(extra_issues(current))
        trace.iterations.append(IterationRecord(report.score, len(issues)))
        if best_score is None or report.score >= best_score:
            best, best_score = current, report.score
        if report.score >= cfg.threshold:
            trace.terminated_by = "threshold"
            return current, trace
        if not issues:
            trace.terminated_by = "no_issues"
            return current, trace
        if i == cfg.max_iterations:
            trace.terminated_by = "cap"
            return current, trace
        try:
            current = edit(gateway, context, current, issues, cfg.model_id, cfg.max_retries, output_schema, validate)
        except StructuredOutputFailure as exc:
            trace.terminated_by, trace.error = "error", f"edit: {exc}"
            log.warning("refine stopped: %s", trace.error)
            return best, trace
        trace.edits += 1
    raise AssertionError("unreachable")
