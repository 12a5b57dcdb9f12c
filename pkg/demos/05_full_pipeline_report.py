"""Run the whole command-line pipeline from fixtures and build the HTML report.

Equivalent shell session:

    python3 -m conlangkit generate  --config fixtures/demo.config.json --out demo-out
    python3 -m conlangkit translate --config fixtures/demo.config.json --out demo-out
    python3 -m conlangkit baseline  --config fixtures/demo.config.json --out demo-out
    python3 -m conlangkit evaluate  --config fixtures/demo.config.json --out demo-out
    python3 -m conlangkit report    --out demo-out
"""

import sys
import tempfile
from pathlib import Path

from conlangkit.cli import main

from _common import CONFIG

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="conlangkit-demo-"))
for command in ("generate", "translate", "baseline", "evaluate", "report"):
    code = main([command, "--config", str(CONFIG), "--out", str(out)])
    if code:
        sys.exit(f"{command} exited with {code}")
print("\nfiles:")
for path in sorted(out.rglob("*")):
    if path.is_file():
        print("  ", path.relative_to(out))
