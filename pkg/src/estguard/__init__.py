"""estguard: distributed H-infinity detectors for biasing attacks on
consensus estimator networks — synthesis, simulation and verification."""

from .graph import DirectedGraph, comparison_matrix, cycle_graph, pi_weight
from .model import (AttackSignal, AugmentedNode, FilterGains, NodeSensor,
                    PlantModel, TrackerModel, attack_value, augment,
                    lowpass_tracker, residual_outputs)
from .synth import (DetectorGains, SynthesisConfig, SynthesisResult,
                    bisect_gamma, recover_gains, synthesize,
                    verify_certificates)

__version__ = "0.1.0"

__all__ = [
    "AttackSignal", "AugmentedNode", "DetectorGains", "DirectedGraph",
    "FilterGains", "NodeSensor", "PlantModel", "SynthesisConfig",
    "SynthesisResult", "TrackerModel", "attack_value", "augment",
    "bisect_gamma", "comparison_matrix", "cycle_graph", "lowpass_tracker",
    "pi_weight", "recover_gains", "residual_outputs", "synthesize",
    "verify_certificates", "__version__",
]
