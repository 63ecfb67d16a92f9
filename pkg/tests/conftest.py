import json
import sys
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def carrier():
    """Background, examples and candidate hypotheses of the carrier task."""
    from nesyc.interpretation import Example, Interpretation
    from nesyc.lptext import parse

    raw = json.loads((DATA / "carrier.json").read_text())

    def interp(facts):
        return Interpretation(frozenset(c.head for c in parse(" ".join(f + "." for f in facts))))

    ex = {k: Example(interp(v), True, "T", k) for k, v in raw["positives"].items()}
    ex.update({k: Example(interp(v), False, "T", k) for k, v in raw["negatives"].items()})
    return {"bk": parse(raw["background"]), "examples": ex,
            "h1": parse(raw["candidates"]["h1"]), "h2": parse(raw["candidates"]["h2"]),
            "raw": raw}


@pytest.fixture(scope="session")
def orange_text():
    return (DATA / "pickup_orange.lp").read_text()


_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def criterion():
    """Record one pass/fail line for an acceptance criterion."""
    def record(n: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[n] = (ok, detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
