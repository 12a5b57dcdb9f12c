"""Prompt templates with ``{{SLOT}}`` placeholders and the request objects built from them."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

__all__ = [
    "DecodingParams",
    "PromptRequest",
    "TemplateLibrary",
    "TemplateError",
    "UnboundSlot",
    "template_slots",
]

_SLOT = re.compile(r"\{\{([A-Z][A-Z0-9_]*)\}\}")


class TemplateError(LookupError):
    pass


class UnboundSlot(TemplateError):
    def __init__(self, template_id: str, missing):
        self.missing = sorted(missing)
        super().__init__(f"template {template_id!r} has unbound slots: {', '.join(self.missing)}")


def template_slots(text: str) -> set[str]:
    return set(_SLOT.findall(text))


@dataclass(frozen=True)
class DecodingParams:
    """Sampling settings. ``None`` means "use the provider's recommended default";
    for ``max_output_tokens`` it means the provider's maximum."""

    temperature: float | None = None
    top_p: float | None = None
    max_output_tokens: int | None = None

    def __post_init__(self):
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.top_p is not None and not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.max_output_tokens is not None and self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")

    def resolved(self) -> dict:
        return {
            "temperature": "provider-default" if self.temperature is None else float(self.temperature),
            "top_p": "provider-default" if self.top_p is None else float(self.top_p),
            "max_output_tokens": "provider-max" if self.max_output_tokens is None else int(self.max_output_tokens),
        }


@dataclass(frozen=True)
class PromptRequest:
    template_id: str
    slots: dict[str, str]
    model_id: str
    template: str = field(repr=False, compare=False)
    decoding: DecodingParams = field(default_factory=DecodingParams)
    # Repair notes appended on structured-output retries.
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        missing = template_slots(self.template) - set(self.slots)
        if missing:
            raise UnboundSlot(self.template_id, missing)
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def prompt(self) -> str:
        text = _SLOT.sub(lambda m: self.slots[m.group(1)], self.template)
        for note in self.notes:
            text += "\n\n" + note
        return text

    def canonical(self) -> str:
        doc = {
            "template_id": self.template_id,
            "slots": sorted(self.slots.items()),
            "model_id": self.model_id,
            "decoding": self.decoding.resolved(),
        }
        if self.notes:
            doc["notes"] = list(self.notes)
        return json.dumps(doc, ensure_ascii=False, sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def with_note(self, note: str) -> "PromptRequest":
        return PromptRequest(
            self.template_id, self.slots, self.model_id, self.template, self.decoding, self.notes + (note,)
        )


class TemplateLibrary:
    """Loads ``<template_id>.txt`` files from a directory (the bundled prompts by default)."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory is not None else None
        self._cache: dict[str, str] = {}

    def get(self, template_id: str) -> str:
        if template_id not in self._cache:
            name = f"{template_id}.txt"
            try:
                if self.directory is None:
                    text = resources.files("conlangkit").joinpath("prompts", name).read_text(encoding="utf-8")
                else:
                    text = (self.directory / name).read_text(encoding="utf-8")
            except FileNotFoundError:
                raise TemplateError(f"no template named {template_id!r}") from None
            self._cache[template_id] = text
        return self._cache[template_id]

    def request(self, template_id, slots, model_id, decoding=None) -> PromptRequest:
        return PromptRequest(
            template_id, dict(slots), model_id, self.get(template_id), decoding or DecodingParams()
        )
