"""HTTP chat-completion backends.

Credentials come from environment variables and are never logged:

=============  =====================  ==================================
model prefix   key variable           endpoint
=============  =====================  ==================================
``gemini-``    ``GEMINI_API_KEY``     Google Generative Language API
``deepseek-``  ``DEEPSEEK_API_KEY``   ``https://api.deepseek.com``
anything else  ``OPENAI_API_KEY``     ``OPENAI_BASE_URL`` or api.openai.com
=============  =====================  ==================================
"""

from __future__ import annotations

import logging
import os

import httpx

from .gateway import ProviderError
from .templates import PromptRequest

__all__ = ["OpenAICompatibleBackend", "GeminiBackend", "backend_for_model", "default_backend", "SECRET_ENV_VARS", "RedactSecrets"]

SECRET_ENV_VARS = ("OPENAI_API_KEY", "GEMINI_API_KEY", "DEEPSEEK_API_KEY")


def _key(var: str) -> str:
    value = os.environ.get(var)
    if not value:
        raise ProviderError(f"environment variable {var} is not set")
    return value


class OpenAICompatibleBackend:
    def __init__(self, key_var="OPENAI_API_KEY", base_url=None, timeout=600.0):
        self.key_var = key_var
        self.base_url = (base_url or os.environ.get("OPENAI_BASE_URL") or "https://api.openai.com/v1").rstrip("/")
        self.timeout = timeout

    def __call__(self, request: PromptRequest, prompt: str) -> str:
        body = {"model": request.model_id, "messages": [{"role": "user", "content": prompt}]}
        d = request.decoding
        if d.temperature is not None:
            body["temperature"] = d.temperature
        if d.top_p is not None:
            body["top_p"] = d.top_p
        if d.max_output_tokens is not None:
            body["max_tokens"] = d.max_output_tokens
        headers = {"Authorization": f"Bearer {_key(self.key_var)}"}
        try:
            r = httpx.post(f"{self.base_url}/chat/completions", json=body, headers=headers, timeout=self.timeout)
            r.raise_for_status()
            return r.json()["choices"][0]["message"]["content"] or ""
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"{request.model_id}: {type(exc).__name__}: {exc}") from None


class GeminiBackend:
    URL = "https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent"

    def __init__(self, timeout=600.0):
        self.timeout = timeout

    def __call__(self, request: PromptRequest, prompt: str) -> str:
        config = {}
        d = request.decoding
        if d.temperature is not None:
            config["temperature"] = d.temperature
        if d.top_p is not None:
            config["topP"] = d.top_p
        if d.max_output_tokens is not None:
            config["maxOutputTokens"] = d.max_output_tokens
        body = {"contents": [{"role": "user", "parts": [{"text": prompt}]}]}
        if config:
            body["generationConfig"] = config
        try:
            r = httpx.post(
                self.URL.format(model=request.model_id),
                json=body,
                headers={"x-goog-api-key": _key("GEMINI_API_KEY")},
                timeout=self.timeout,
            )
            r.raise_for_status()
            parts = r.json()["candidates"][0]["content"]["parts"]
            return "".join(p.get("text", "") for p in parts if not p.get("thought"))
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"{request.model_id}: {type(exc).__name__}: {exc}") from None


class _Router:
    def __init__(self):
        self._gemini = GeminiBackend()
        self._deepseek = OpenAICompatibleBackend("DEEPSEEK_API_KEY", "https://api.deepseek.com")
        self._openai = OpenAICompatibleBackend()

    def __call__(self, request: PromptRequest, prompt: str) -> str:
        return backend_for_model(request.model_id, self)(request, prompt)


def backend_for_model(model_id: str, router: _Router | None = None):
    router = router or _Router()
    if model_id.startswith("gemini-"):
        return router._gemini
    if model_id.startswith("deepseek-"):
        return router._deepseek
    return router._openai


def default_backend():
    """Backend that dispatches each request by its model id."""
    return _Router()


class RedactSecrets(logging.Filter):
    """Logging filter that masks the values of credential environment variables."""

    def filter(self, record: logging.LogRecord) -> bool:
        secrets = [os.environ[v] for v in SECRET_ENV_VARS if os.environ.get(v)]
        if secrets:
            msg = record.getMessage()
            for s in secrets:
                msg = msg.replace(s, "***")
            record.msg, record.args = msg, ()
        return True
