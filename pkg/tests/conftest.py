import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

# Deterministic property tests: the suite must stay green run over run.
settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("ci")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def geodesy_oracle() -> list[dict]:
    return json.loads((FIXTURES / "geodesy_oracle.json").read_text())["points"]
