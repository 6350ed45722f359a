import numpy as np
import pytest

from lorahop import core, trace


def random_scenario(rng, max_states=60_000):
    """Random small instance whose brute-force state count stays enumerable."""
    while True:
        n = int(rng.integers(1, 4))
        g = int(rng.integers(1, 3))
        f = int(rng.integers(1, 3))
        t = int(rng.integers(1, 4))
        if (g * f + 1) ** (n * t) > max_states:
            continue
        freqs = tuple(868.0 + 0.2 * k for k in range(f))
        fcap = tuple(int(rng.integers(2, 7)) for _ in range(f))
        bmin = int(rng.integers(1, min(fcap) + 1))
        gcap = tuple(int(rng.integers(1, n + 1)) for _ in range(g))
        demand = tuple(int(rng.integers(0, max(fcap) * t + 2)) for _ in range(n))
        return core.Scenario(n, g, freqs, t, gcap, fcap, bmin, demand)


@pytest.fixture(scope="session")
def bundled_trace():
    return trace.load_bundled_trace()
