import numpy as np
import pytest

from wsbd import qsim
from wsbd.observables import Hamiltonian, PauliString


def random_state(n, rng):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return qsim.StateVector(n, v / np.linalg.norm(v))


def random_hamiltonian(n, n_terms, rng):
    terms = [PauliString(float(rng.normal()), "".join(rng.choice(list("IXYZ"), size=n))) for _ in range(n_terms)]
    return Hamiltonian(n, terms)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one outcome line per acceptance criterion; printed after the run."""
    log = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number, ok, detail, seconds):
        log[number] = (bool(ok), detail, seconds)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        ok, detail, seconds = log[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  ({seconds:.1f} s)  {detail}")
