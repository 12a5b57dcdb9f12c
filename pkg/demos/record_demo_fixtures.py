"""Re-record fixtures/demo.fixtures.jsonl from the offline synthetic model.

The shipped fixtures let every demo and the replay tests run without network
access or API keys. Fixture keys cover the template id, the slot values, the
model id and the decoding settings, so re-record after changing what the
pipeline puts into a slot or how the synthetic model answers:

    python3 demos/record_demo_fixtures.py
"""

import json
import sys
import tempfile
from pathlib import Path

from conlangkit.cli import main

ROOT = Path(__file__).resolve().parents[1]
CONFIG = ROOT / "fixtures" / "demo.config.json"
FIXTURES = ROOT / "fixtures" / "demo.fixtures.jsonl"


def record():
    FIXTURES.unlink(missing_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        # The backend has no flag, so record from a copy of the demo config.
        doc = json.loads(CONFIG.read_text())
        doc.update(backend="synthetic", gateway_mode="record", fixtures_path=str(FIXTURES))
        cfg = Path(tmp) / "record.json"
        cfg.write_text(json.dumps(doc))
        common = ["--config", str(cfg), "--out", tmp]
        for command in ("generate", "translate", "baseline", "evaluate"):
            code = main([command, *common])
            if code:
                sys.exit(f"{command} failed with exit code {code}")
    print(f"wrote {sum(1 for _ in FIXTURES.open())} fixtures to {FIXTURES}")


if __name__ == "__main__":
    record()
