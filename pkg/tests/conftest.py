"""Shared fixtures.

The reference design is synthesized once per session through the real CLI
(the run is timed for the acceptance gate) and reused by every test that
needs a feasible detector.
"""

import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from estguard import cli, serialize, synth
from estguard.config import load_project
from estguard.sim import simulate

REFERENCE_CONFIG = Path(__file__).resolve().parent.parent / "configs" / \
    "reference.json"


@pytest.fixture(scope="session")
def reference_project():
    return load_project(REFERENCE_CONFIG)


@pytest.fixture(scope="session")
def design_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("design") / "design.json"
    runner = CliRunner()
    t0 = time.monotonic()
    res = runner.invoke(cli.main, ["synth", "--config", str(REFERENCE_CONFIG),
                                   "--out", str(out)])
    elapsed = time.monotonic() - t0
    assert res.exit_code == 0, res.output
    return {"path": out, "doc": serialize.load_json(out), "elapsed": elapsed,
            "output": res.output}


@pytest.fixture(scope="session")
def detector(design_bundle):
    det = serialize.result_from_dict(design_bundle["doc"]["detector"])
    assert det.feasible
    return det


@pytest.fixture(scope="session")
def baseline_gains(design_bundle):
    base = serialize.result_from_dict(design_bundle["doc"]["baseline"])
    assert base.feasible
    return base.as_filter_gains()


@pytest.fixture(scope="session")
def l2_detector(reference_project, detector):
    """The weaker-tracking redesign: state-error weight set to zero."""
    spec = reference_project.synthesis
    cfg = synth.SynthesisConfig(
        gamma=detector.gamma, alphas=spec.alphas, Q=spec.Q,
        Qbar=tuple(np.zeros_like(q) for q in spec.Qbar),
        margin=spec.margin, budget=spec.budget, seed=spec.seed)
    res = synth.synthesize(reference_project.graph, reference_project.plant,
                           reference_project.sensors,
                           reference_project.trackers, cfg)
    assert res.feasible, res.diagnostics
    return res


@pytest.fixture(scope="session")
def trace_decay(reference_project, detector, baseline_gains):
    p = reference_project
    return simulate(p.scenario("decay"), p.plant, p.sensors, baseline_gains,
                    detector, p.graph)


@pytest.fixture(scope="session")
def trace_bias(reference_project, detector, baseline_gains):
    p = reference_project
    return simulate(p.scenario("bias"), p.plant, p.sensors, baseline_gains,
                    detector, p.graph)


@pytest.fixture(scope="session")
def trace_pulse(reference_project, l2_detector, baseline_gains):
    p = reference_project
    return simulate(p.scenario("pulse"), p.plant, p.sensors, baseline_gains,
                    l2_detector, p.graph)
