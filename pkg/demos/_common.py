"""Shared paths for the demo scripts."""

from pathlib import Path

from conlangkit.gateway import Gateway

ROOT = Path(__file__).resolve().parents[1]
CONFIG = ROOT / "fixtures" / "demo.config.json"
FIXTURES = ROOT / "fixtures" / "demo.fixtures.jsonl"
GENERATOR = "synthetic-generator"
JUDGE = "synthetic-judge"


def replay_gateway() -> Gateway:
    """A gateway that answers only from the shipped fixtures, so no keys or network are needed."""
    return Gateway(mode="replay", fixtures_path=FIXTURES, model_id=GENERATOR)


def banner(title: str) -> None:
    print(f"\n{title}\n{'-' * len(title)}")
