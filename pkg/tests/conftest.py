import numpy as np
import pytest

from onebit_bht.estimator import ReducedProblem
from onebit_bht.model import sign_quantize


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_reduced_problem(rng, n_active, n_meas, sigma_e=0.1, sigma_n=0.1):
    return ReducedProblem(
        h_mat=rng.standard_normal((n_active, n_meas)),
        y=sign_quantize(rng.standard_normal(n_meas)),
        active_index=np.arange(n_active),
        sigma_e=sigma_e,
        sigma_n=sigma_n,
    )


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            for name, value in getattr(rep, "user_properties", []):
                if name == "acceptance":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
