import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tinymask import datakit, quantizer
from tinymask.netgraph import build_network, zoo

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def synth_small():
    """400 synthetic faces as (manifest, normalized images, labels)."""
    m = datakit.synth_dataset(400, seed=3)
    x, y = datakit.to_arrays(m)
    return m, x, y


@pytest.fixture(scope="session")
def tinymask_q(synth_small):
    """Untrained tinymask-ref, calibrated on synthetic faces and quantized."""
    _, x, _ = synth_small
    net, params = build_network(zoo("tinymask-ref"), seed=0)
    stats = quantizer.calibrate(net, params, x[:64])
    return net, params, quantizer.quantize_model(net, params, stats)


def random_int8(rng, shape):
    return rng.integers(-128, 128, size=shape).astype(np.int8)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.summary_line(n, mod.RESULTS[n]))
