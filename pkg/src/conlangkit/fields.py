"""Fenced field blocks in model output.

Models are asked to wrap every answer field as::

    ===FIELD TRANSLATION===
    ...free text, any number of lines...
    ===END===

Markers must sit on their own line (surrounding whitespace is ignored).
Everything outside blocks is treated as prose and skipped. Field content is
returned exactly as written between the marker lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = [
    "FieldSchema",
    "StructuredResponse",
    "ParseError",
    "MissingField",
    "DuplicateField",
    "MalformedBlock",
    "extract_fields",
    "emit_fields",
    "FORMAT_HELP",
]

_NAME = r"[A-Z][A-Z0-9_]*"
_OPEN = re.compile(rf"^===FIELD ({_NAME})===$")
_OPEN_LOOSE = re.compile(r"^===\s*FIELD\b.*$", re.IGNORECASE)
_END = "===END==="

FORMAT_HELP = (
    "Wrap each answer field in its own block, markers on their own lines:\n"
    "===FIELD NAME===\n<content>\n===END===\n"
    "NAME is uppercase letters, digits and underscores."
)


class ParseError(ValueError):
    """Base class for recoverable problems with a model response."""


class MissingField(ParseError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"required field {name} is missing or empty")


class DuplicateField(ParseError):
    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        super().__init__(f"field {name} appears more than once (again at line {line})")


class MalformedBlock(ParseError):
    def __init__(self, position: int, problem: str):
        self.position = position
        super().__init__(f"malformed field block at line {position}: {problem}")


@dataclass(frozen=True)
class FieldSchema:
    required: tuple[str, ...] = ()
    optional: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "required", tuple(self.required))
        object.__setattr__(self, "optional", tuple(self.optional))
        overlap = set(self.required) & set(self.optional)
        if overlap:
            raise ValueError(f"fields both required and optional: {sorted(overlap)}")
        for name in self.required + self.optional:
            if not re.fullmatch(_NAME, name):
                raise ValueError(f"invalid field name {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return self.required + self.optional


@dataclass(frozen=True)
class StructuredResponse:
    fields: dict[str, str]
    raw: str = field(repr=False, default="")

    def __getitem__(self, name: str) -> str:
        return self.fields[name]

    def get(self, name: str, default=None):
        return self.fields.get(name, default)


def _blocks(raw: str):
    """Yield (name, content, line_no) for every fenced block in ``raw``."""
    lines = raw.split("\n")
    open_name = None
    open_line = 0
    body: list[str] = []
    for no, line in enumerate(lines, start=1):
        stripped = line.strip()
        m = _OPEN.match(stripped)
        if open_name is None:
            if m:
                open_name, open_line, body = m.group(1), no, []
            elif stripped == _END:
                raise MalformedBlock(no, "END marker without an open field")
            elif _OPEN_LOOSE.match(stripped):
                raise MalformedBlock(no, f"bad field marker {stripped!r}")
        else:
            if stripped == _END:
                yield open_name, "\n".join(body), open_line
                open_name = None
            elif m or _OPEN_LOOSE.match(stripped):
                raise MalformedBlock(no, f"field {open_name} opened at line {open_line} is not closed")
            else:
                body.append(line)
    if open_name is not None:
        raise MalformedBlock(open_line, f"field {open_name} is never closed")


def extract_fields(raw: str, schema: FieldSchema) -> StructuredResponse:
    """Parse fenced field blocks and check them against ``schema``.

    Fields not named by the schema are kept. Required fields must be present
    and non-blank; absent optional fields are simply omitted from the map.
    """
    found: dict[str, str] = {}
    for name, content, line in _blocks(raw):
        if name in found:
            raise DuplicateField(name, line)
        found[name] = content
    for name in schema.required:
        if name not in found or not found[name].strip():
            raise MissingField(name)
    return StructuredResponse(found, raw)


def emit_fields(fields: dict[str, str], prose: str = "") -> str:
    """Inverse of :func:`extract_fields` for content without marker lines."""
    parts = [prose] if prose else []
    for name, content in fields.items():
        if not re.fullmatch(_NAME, name):
            raise ValueError(f"invalid field name {name!r}")
        for line in content.split("\n"):
            s = line.strip()
            if s == _END or _OPEN_LOOSE.match(s):
                raise ValueError(f"content of {name} contains a marker line")
        parts.append(f"===FIELD {name}===\n{content}\n{_END}")
    return "\n".join(parts) + "\n"
