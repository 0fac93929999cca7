from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def random_adjacency(rng: np.random.Generator, n: int) -> np.ndarray:
    """Symmetric non-negative weights with a positive diagonal; some edges absent."""
    a = rng.uniform(0.0, 2.0, size=(n, n))
    a[rng.random((n, n)) < 0.3] = 0.0
    a = np.triu(a, 1)
    a = a + a.T
    np.fill_diagonal(a, rng.uniform(0.1, 2.0, size=n))
    return a


# criterion number -> (passed, title, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}: {title}: {detail}")
