import json
import math
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from timebin_epp.channels import NoiseParams
from timebin_epp.state import H, V, PhotonBasis, PureState

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GOLDEN = Path(__file__).parent / "golden"
SQ = 1 / math.sqrt(2)


@pytest.fixture(scope="session")
def pattern_table():
    return json.loads((GOLDEN / "pattern_table.json").read_text())


def one(mode, pol=H, delay=0):
    """Single-photon basis state."""
    return PureState({(PhotonBasis(mode, pol, delay),): 1.0})


def superpose(*pairs):
    """Normalized sum of ``(amplitude, [(mode, pol, delay), ...])`` pairs."""
    terms = {}
    for amp, photons in pairs:
        k = tuple(PhotonBasis(*p) for p in photons)
        terms[k] = terms.get(k, 0) + amp
    return PureState(terms, normalize=True)


def _to_params(counts):
    total = sum(counts)
    f, a, b = (x / total for x in counts[:3])
    return NoiseParams(f, a, b, max(0.0, 1 - math.fsum((f, a, b))))


# Bell-diagonal weights on the simplex, including its faces and corners
simplex_params = (st.lists(st.integers(0, 50), min_size=4, max_size=4)
                  .filter(lambda c: sum(c) > 0)
                  .map(_to_params))


# -- acceptance reporting ----------------------------------------------------------

_RESULTS: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record and assert one acceptance criterion; printed in the terminal summary."""

    def check(number: int, title: str, passed: bool, detail: str = "") -> None:
        _RESULTS.append((number, title, bool(passed), detail))
        assert passed, f"criterion {number} ({title}) failed: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_RESULTS):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] criterion {number:>2}: {title}  ({detail})")


__all__ = ["one", "superpose", "simplex_params", "SQ", "H", "V"]
