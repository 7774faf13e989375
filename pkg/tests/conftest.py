import functools

import numpy as np
import pytest

from szegolab import hardy
from szegolab.presets import preset
from szegolab.reduction import locus_point

BUNDLED = ("cp1-s1-12", "cp2-t2", "cp1-su2")
ALL_SCENARIOS = BUNDLED + ("cp1-plain",)

ACCEPTANCE_LINES = []


class Scenario:
    def __init__(self, name):
        self.name = name
        self.config = preset(name)
        self.action = self.config.build_action()
        self.nu = self.config.build_weight(self.action)
        self.model = self.action.model
        self._bases = {}

    def basis(self, k):
        if k not in self._bases:
            self._bases[k] = hardy.isotype_basis(self.action, self.nu, k)
        return self._bases[k]

    @functools.cached_property
    def data(self):
        return locus_point(self.action, self.nu, self.config.seed_points(self.model)[0])


@functools.lru_cache(maxsize=None)
def scenario(name) -> Scenario:
    return Scenario(name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def record_acceptance(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
