import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fcdl import parse_program  # noqa: E402

CORPUS = Path(str(resources.files("fcdl") / "corpus"))


def load(name: str):
    return parse_program((CORPUS / name).read_text())


def corpus_programs() -> list[str]:
    return sorted(p.name for p in CORPUS.glob("*.fcd"))


def corpus_regexes() -> list[str]:
    lines = (CORPUS / "regexes.drx").read_text().splitlines()
    return [s.strip() for s in lines if s.strip() and not s.startswith("#")]


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def programs():
    return {name: load(name) for name in corpus_programs()}
