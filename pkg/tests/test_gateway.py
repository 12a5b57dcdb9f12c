import json
import logging
import threading
import time

import httpx
import pytest

from conlangkit import providers
from conlangkit.fields import FieldSchema, emit_fields
from conlangkit.gateway import FixtureMiss, Gateway, ProviderError, StructuredOutputFailure
from conlangkit.testing import ScriptedBackend

SCHEMA = FieldSchema(required=("TRANSLATION", "GLOSS"))
GOOD = emit_fields({"TRANSLATION": "kala", "GLOSS": "dog"})
SLOTS = {"SKETCH": "s", "SOURCE_TEXT": "The dog."}


Spy = ScriptedBackend


def test_replay_returns_fixture_bytes(tmp_path):
    fx = tmp_path / "f.fixtures.jsonl"
    gw = Gateway(mode="replay", fixtures_path=fx)
    req = gw.request("translate", SLOTS)
    text = "exact  bytes\n\twith ünïcode\n"
    fx.write_text(json.dumps({"digest": req.digest, "response": text}) + "\n", encoding="utf-8")
    gw = Gateway(mode="replay", fixtures_path=fx)
    assert gw.complete(req) == text


def test_replay_miss_names_digest(tmp_path):
    spy = Spy(default="should not be called")
    gw = Gateway(spy, mode="replay", fixtures_path=tmp_path / "none.jsonl")
    req = gw.request("translate", SLOTS)
    with pytest.raises(FixtureMiss) as info:
        gw.complete(req)
    assert info.value.digest == req.digest and req.digest in str(info.value)
    assert spy.calls == [] and gw.calls == 0


def test_record_caches_and_persists(tmp_path):
    fx = tmp_path / "f.fixtures.jsonl"
    spy = Spy(default=GOOD)
    gw = Gateway(spy, mode="record", fixtures_path=fx)
    req = gw.request("translate", SLOTS)
    assert gw.complete(req) == GOOD
    assert gw.complete(req) == GOOD
    assert len(spy.calls) == 1
    lines = fx.read_text(encoding="utf-8").splitlines()
    assert [json.loads(x) for x in lines] == [{"digest": req.digest, "response": GOOD}]
    # A fresh replay gateway serves the recorded response.
    assert Gateway(mode="replay", fixtures_path=fx).complete(req) == GOOD


def test_mode_validation(tmp_path):
    with pytest.raises(ValueError):
        Gateway(mode="replay")
    with pytest.raises(ValueError):
        Gateway(mode="live")
    with pytest.raises(ValueError):
        Gateway(Spy(), mode="bogus")


def test_structured_first_ok_one_call():
    spy = Spy(default=GOOD)
    gw = Gateway(spy)
    resp = gw.complete_structured(gw.request("translate", SLOTS), SCHEMA)
    assert resp["GLOSS"] == "dog" and len(spy.calls) == 1


def test_structured_retry_then_success():
    spy = Spy({"translate": ["garbage", GOOD]})
    gw = Gateway(spy)
    resp = gw.complete_structured(gw.request("translate", SLOTS), SCHEMA, max_retries=2)
    assert resp["TRANSLATION"] == "kala"
    assert len(spy.calls) == 2
    # The retry prompt carries the parse error.
    note = spy.calls[1][1].split("could not be used:", 1)[1]
    assert "TRANSLATION" in note.splitlines()[0]
    assert spy.calls[1][0].digest != spy.calls[0][0].digest


def test_structured_all_fail():
    spy = Spy(default="no fields here")
    gw = Gateway(spy)
    with pytest.raises(StructuredOutputFailure) as info:
        gw.complete_structured(gw.request("translate", SLOTS), SCHEMA, max_retries=2)
    assert len(info.value.attempts) == 3 and len(spy.calls) == 3


def test_structured_negative_retries():
    gw = Gateway(Spy(default=GOOD))
    with pytest.raises(ValueError):
        gw.complete_structured(gw.request("translate", SLOTS), SCHEMA, max_retries=-1)


def test_transport_retries_then_success():
    n = {"k": 0}

    def flaky(request, prompt):
        n["k"] += 1
        if n["k"] < 3:
            raise ProviderError("503")
        return GOOD

    gw = Gateway(flaky, backoff=0.0)
    assert gw.complete(gw.request("translate", SLOTS)) == GOOD
    assert gw.calls == 3


def test_transport_retries_bounded():
    def down(request, prompt):
        raise ProviderError("quota")

    gw = Gateway(down, backoff=0.0, transport_retries=3)
    with pytest.raises(ProviderError):
        gw.complete(gw.request("translate", SLOTS))
    assert gw.calls == 4


def test_per_model_in_flight_cap():
    active, peak, lock = [0], [0], threading.Lock()

    def slow(request, prompt):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1
        return GOOD

    gw = Gateway(slow, max_in_flight=2)
    reqs = [gw.request("translate", {"SKETCH": str(i), "SOURCE_TEXT": "x"}) for i in range(8)]
    threads = [threading.Thread(target=gw.complete, args=(r,)) for r in reqs]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] <= 2


def test_concurrent_record_writes_are_whole_lines(tmp_path):
    fx = tmp_path / "f.fixtures.jsonl"
    gw = Gateway(lambda r, p: "x" * 5000 + r.slots["SKETCH"], mode="record", fixtures_path=fx, max_in_flight=16)
    reqs = [gw.request("translate", {"SKETCH": str(i), "SOURCE_TEXT": "x"}) for i in range(40)]
    threads = [threading.Thread(target=gw.complete, args=(r,)) for r in reqs]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    recs = [json.loads(line) for line in fx.read_text().splitlines()]
    assert len(recs) == 40 and {r["digest"] for r in recs} == {r.digest for r in reqs}


def test_judge_model_is_per_call():
    spy = Spy(default=GOOD)
    gw = Gateway(spy, model_id="gen")
    gw.complete(gw.request("translate", SLOTS, model_id="judge"))
    assert spy.calls[0][0].model_id == "judge"


def test_replay_timestamp_fixed(tmp_path):
    gw = Gateway(mode="replay", fixtures_path=tmp_path / "x")
    assert gw.now() == gw.now() == "1970-01-01T00:00:00+00:00"


# ---- providers ------------------------------------------------------------


def test_routing_by_prefix():
    r = providers._Router()
    assert providers.backend_for_model("gemini-2.5-pro", r) is r._gemini
    assert providers.backend_for_model("deepseek-reasoner", r) is r._deepseek
    assert providers.backend_for_model("o3", r) is r._openai


def test_missing_key_is_provider_error(monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    gw = Gateway(providers.OpenAICompatibleBackend(), backoff=0.0, transport_retries=0)
    with pytest.raises(ProviderError, match="OPENAI_API_KEY"):
        gw.complete(gw.request("translate", SLOTS, model_id="o3"))


def test_openai_backend_request_shape(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "sk-secret-value")
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(url=url, body=json, headers=headers)
        return httpx.Response(200, json={"choices": [{"message": {"content": "hi"}}]},
                              request=httpx.Request("POST", url))

    monkeypatch.setattr(providers.httpx, "post", fake_post)
    gw = Gateway(providers.OpenAICompatibleBackend(base_url="https://example.test/v1"))
    assert gw.complete(gw.request("translate", SLOTS, model_id="o3")) == "hi"
    assert seen["url"] == "https://example.test/v1/chat/completions"
    assert seen["body"]["model"] == "o3" and "temperature" not in seen["body"]
    assert seen["headers"]["Authorization"] == "Bearer sk-secret-value"


def test_gemini_backend_drops_thought_parts(monkeypatch):
    monkeypatch.setenv("GEMINI_API_KEY", "g-secret")

    def fake_post(url, json=None, headers=None, timeout=None):
        assert headers == {"x-goog-api-key": "g-secret"} and "g-secret" not in url
        parts = [{"text": "thinking", "thought": True}, {"text": "answer"}]
        return httpx.Response(200, json={"candidates": [{"content": {"parts": parts}}]},
                              request=httpx.Request("POST", url))

    monkeypatch.setattr(providers.httpx, "post", fake_post)
    gw = Gateway(providers.GeminiBackend())
    assert gw.complete(gw.request("translate", SLOTS, model_id="gemini-2.5-pro")) == "answer"


def test_http_error_maps_to_provider_error(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "k")

    def fake_post(url, json=None, headers=None, timeout=None):
        return httpx.Response(429, request=httpx.Request("POST", url))

    monkeypatch.setattr(providers.httpx, "post", fake_post)
    gw = Gateway(providers.OpenAICompatibleBackend(), backoff=0.0, transport_retries=1)
    with pytest.raises(ProviderError):
        gw.complete(gw.request("translate", SLOTS, model_id="o3"))
    assert gw.calls == 2


def test_secrets_redacted_in_logs(monkeypatch, caplog):
    monkeypatch.setenv("GEMINI_API_KEY", "AIza-very-secret")
    logger = logging.getLogger("conlangkit.redaction-test")
    logger.addFilter(providers.RedactSecrets())
    with caplog.at_level(logging.INFO):
        logger.info("key is %s", "AIza-very-secret")
    assert "AIza-very-secret" not in caplog.text and "***" in caplog.text


def test_secrets_never_in_fixtures(monkeypatch, tmp_path):
    monkeypatch.setenv("OPENAI_API_KEY", "sk-never-store")

    def fake_post(url, json=None, headers=None, timeout=None):
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]},
                              request=httpx.Request("POST", url))

    monkeypatch.setattr(providers.httpx, "post", fake_post)
    fx = tmp_path / "f.fixtures.jsonl"
    gw = Gateway(providers.OpenAICompatibleBackend(), mode="record", fixtures_path=fx)
    gw.complete(gw.request("translate", SLOTS, model_id="o3"))
    assert "sk-never-store" not in fx.read_text()
