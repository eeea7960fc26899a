"""Project configuration: one JSON document describing the plant, the
network, the design weights and the simulation scenarios.

Every matrix dimension is cross-checked before any computation starts and
rejection messages name the offending field.  Node ids are 1-based in the
file and converted here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import constants
from .graph import DirectedGraph
from .model import AttackSignal, FilterGains, ModelError, NodeSensor, \
    PlantModel, TrackerModel, lowpass_tracker
from .sim import DisturbanceSpec, ScenarioConfig
from .synth import SynthesisConfig


class ConfigError(ValueError):
    """Configuration document rejected; the message names the field."""


def _require(d: dict, key: str, ctx: str):
    if key not in d:
        raise ConfigError(f"{ctx}.{key} is missing")
    return d[key]


def _matrix(obj, ctx: str, rows: int | None = None,
            cols: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{ctx} is not a numeric matrix") from None
    if arr.ndim != 2:
        raise ConfigError(f"{ctx} must be a nested (2-D) array")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{ctx} has non-finite entries")
    if rows is not None and arr.shape[0] != rows:
        raise ConfigError(f"{ctx} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise ConfigError(f"{ctx} has {arr.shape[1]} columns, expected {cols}")
    return arr


def _vector(obj, ctx: str, length: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError(f"{ctx} is not a numeric vector") from None
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{ctx} has non-finite entries")
    if length is not None and arr.shape[0] != length:
        raise ConfigError(f"{ctx} has length {arr.shape[0]}, expected {length}")
    return arr


def _per_node(obj, count: int, ctx: str, size: int) -> tuple:
    """A weight given either once (shared) or as a list of per-node blocks."""
    if isinstance(obj, (int, float)):
        return tuple(float(obj) * np.eye(size) for _ in range(count))
    arr = obj
    if isinstance(arr, list) and arr and isinstance(arr[0], list) \
            and arr[0] and isinstance(arr[0][0], list):
        if len(arr) != count:
            raise ConfigError(f"{ctx} must list {count} matrices")
        return tuple(_matrix(a, f"{ctx}[{k}]", size, size)
                     for k, a in enumerate(arr))
    shared = _matrix(arr, ctx, size, size)
    return tuple(shared.copy() for _ in range(count))


def _alphas(obj, count: int, ctx: str) -> tuple:
    if isinstance(obj, (int, float)):
        return tuple(float(obj) for _ in range(count))
    vec = _vector(obj, ctx, count)
    return tuple(float(v) for v in vec)


@dataclass
class BaselineSpec:
    """How the baseline consensus-filter gains are obtained."""

    mode: str                    # "synth" | "explicit"
    gamma: float | None = None
    gamma_range: tuple | None = None
    weight: tuple | None = None  # per-node estimation-error weight
    alphas: tuple | None = None
    gains: list | None = None    # explicit FilterGains


@dataclass
class SynthesisSpec:
    gamma: float | None
    gamma_range: tuple | None
    alphas: tuple
    Q: tuple
    Qbar: tuple
    margin: float = constants.DEFAULT_MARGIN
    budget: int = constants.DEFAULT_BUDGET
    seed: int = 0

    def to_config(self, gamma: float) -> SynthesisConfig:
        return SynthesisConfig(gamma=gamma, alphas=self.alphas, Q=self.Q,
                               Qbar=self.Qbar, margin=self.margin,
                               budget=self.budget, seed=self.seed)


@dataclass
class ProjectConfig:
    plant: PlantModel
    graph: DirectedGraph
    sensors: list
    trackers: list
    baseline: BaselineSpec
    synthesis: SynthesisSpec
    scenarios: dict = field(default_factory=dict)

    def scenario(self, name: str) -> ScenarioConfig:
        if name not in self.scenarios:
            known = ", ".join(sorted(self.scenarios)) or "(none)"
            raise ConfigError(f"unknown scenario {name!r}; available: {known}")
        return self.scenarios[name]


def _parse_trackers(doc, n: int, count: int) -> list:
    kind = _require(doc, "kind", "trackers")
    if kind == "lowpass":
        eps = doc.get("eps", 0.5)
        if isinstance(eps, (int, float)):
            eps = [float(eps)] * count
        if len(eps) != count:
            raise ConfigError(f"trackers.eps must list {count} values")
        try:
            return [lowpass_tracker(n, float(e)) for e in eps]
        except ModelError as exc:
            raise ConfigError(f"trackers.eps: {exc}") from None
    if kind == "explicit":
        models = _require(doc, "models", "trackers")
        if len(models) != count:
            raise ConfigError(f"trackers.models must list {count} entries")
        out = []
        for k, mdl in enumerate(models):
            Om = _matrix(_require(mdl, "Omega", f"trackers.models[{k}]"),
                         f"trackers.models[{k}].Omega")
            Ga = _matrix(_require(mdl, "Gamma", f"trackers.models[{k}]"),
                         f"trackers.models[{k}].Gamma", Om.shape[0], n)
            try:
                out.append(TrackerModel(Omega=Om, Gamma=Ga))
            except ModelError as exc:
                raise ConfigError(f"trackers.models[{k}]: {exc}") from None
        return out
    raise ConfigError(f"trackers.kind must be 'lowpass' or 'explicit', "
                      f"got {kind!r}")


def _parse_gamma(doc: dict, ctx: str) -> tuple:
    gamma = doc.get("gamma")
    rng = doc.get("gamma_range")
    if (gamma is None) == (rng is None):
        raise ConfigError(f"{ctx} needs exactly one of gamma or gamma_range")
    if gamma is not None:
        if not (isinstance(gamma, (int, float)) and gamma > 0):
            raise ConfigError(f"{ctx}.gamma must be positive")
        return float(gamma), None
    if not (isinstance(rng, list) and len(rng) == 2 and 0 < rng[0] < rng[1]):
        raise ConfigError(f"{ctx}.gamma_range must be [lo, hi] with 0 < lo < hi")
    return None, (float(rng[0]), float(rng[1]))


_ATTACK_FIELDS = {"node", "kind", "target", "t_on", "tau", "t_off"}


def _parse_scenario(doc: dict, idx: int, n: int, count: int) -> ScenarioConfig:
    ctx = f"scenarios[{idx}]"
    name = doc.get("name", f"scenario{idx}")
    T = doc.get("T", 60.0)
    if not (isinstance(T, (int, float)) and T > 0):
        raise ConfigError(f"{ctx}.T must be positive")
    h = doc.get("h")
    if h is not None and not (isinstance(h, (int, float)) and 0 < h <= T):
        raise ConfigError(f"{ctx}.h must satisfy 0 < h <= T")
    x0 = doc.get("x0")
    if x0 is not None:
        x0 = _vector(x0, f"{ctx}.x0", n)
    dist = doc.get("disturbance", {"kind": "none"})
    try:
        spec = DisturbanceSpec(**dist)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{ctx}.disturbance: {exc}") from None
    attacks = [None] * count
    for k, a in enumerate(doc.get("attacks", [])):
        actx = f"{ctx}.attacks[{k}]"
        unknown = set(a) - _ATTACK_FIELDS
        if unknown:
            raise ConfigError(f"{actx} has unknown fields {sorted(unknown)}")
        node = _require(a, "node", actx)
        if not (isinstance(node, int) and 1 <= node <= count):
            raise ConfigError(f"{actx}.node must be a 1-based id <= {count}")
        kwargs = {k2: v for k2, v in a.items() if k2 != "node"}
        if "target" in kwargs:
            kwargs["target"] = _vector(kwargs["target"], f"{actx}.target", n)
        try:
            attacks[node - 1] = AttackSignal(**kwargs)
        except ModelError as exc:
            raise ConfigError(f"{actx}: {exc}") from None
    thresholds = doc.get("thresholds", {})
    if not isinstance(thresholds, dict):
        raise ConfigError(f"{ctx}.thresholds must be an object")
    return ScenarioConfig(name=name, T=float(T),
                          h=None if h is None else float(h),
                          seed=int(doc.get("seed", 0)), x0=x0,
                          disturbance=spec, attacks=tuple(attacks),
                          thresholds=dict(thresholds))


def load_project(path) -> ProjectConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_project(doc)


def parse_project(doc: dict) -> ProjectConfig:
    pdoc = _require(doc, "plant", "config")
    A = _matrix(_require(pdoc, "A", "plant"), "plant.A")
    if A.shape[0] != A.shape[1]:
        raise ConfigError(f"plant.A must be square, got {A.shape}")
    n = A.shape[0]
    B2 = _matrix(_require(pdoc, "B2", "plant"), "plant.B2", rows=n)
    x0 = _vector(pdoc.get("x0", np.zeros(n)), "plant.x0", n)
    plant = PlantModel(A=A, B2=B2, x0=x0)

    gdoc = _require(doc, "graph", "config")
    count = _require(gdoc, "nodes", "graph")
    if not (isinstance(count, int) and count >= 1):
        raise ConfigError("graph.nodes must be a positive integer")
    edges = _require(gdoc, "edges", "graph")
    for k, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2
                and all(isinstance(v, int) and 1 <= v <= count for v in e)):
            raise ConfigError(f"graph.edges[{k}] must be a pair of 1-based "
                              f"node ids <= {count}")
        if e[0] == e[1]:
            raise ConfigError(f"graph.edges[{k}] is a self-loop")
    graph = DirectedGraph.from_edges(count,
                                     [(j - 1, i - 1) for (j, i) in edges])

    sdocs = _require(doc, "sensors", "config")
    if len(sdocs) != count:
        raise ConfigError(f"sensors must list {count} entries, "
                          f"got {len(sdocs)}")
    sensors = []
    for k, sd in enumerate(sdocs):
        ctx = f"sensors[{k}]"
        C2 = _matrix(_require(sd, "C2", ctx), f"{ctx}.C2", cols=n)
        r = C2.shape[0]
        D2 = _matrix(_require(sd, "D2", ctx), f"{ctx}.D2", r, plant.m)
        Dbar2 = _matrix(_require(sd, "Dbar2", ctx), f"{ctx}.Dbar2", rows=r)
        try:
            sensors.append(NodeSensor(C2=C2, D2=D2, Dbar2=Dbar2))
        except ModelError as exc:
            raise ConfigError(f"{ctx}: {exc}") from None

    trackers = _parse_trackers(_require(doc, "trackers", "config"), n, count)

    ddoc = _require(doc, "synthesis", "config")
    gamma, rng = _parse_gamma(ddoc, "synthesis")
    alphas = _alphas(_require(ddoc, "alphas", "synthesis"), count,
                     "synthesis.alphas")
    if any(a <= 0 for a in alphas):
        raise ConfigError("synthesis.alphas must all be positive")
    Q = _per_node_sized(_require(ddoc, "Q", "synthesis"), count,
                        "synthesis.Q", [tr.n_omega for tr in trackers])
    Qbar = _per_node(_require(ddoc, "Qbar", "synthesis"), count,
                     "synthesis.Qbar", n)
    margin = float(ddoc.get("margin", constants.DEFAULT_MARGIN))
    if margin <= 0:
        raise ConfigError("synthesis.margin must be positive")
    budget = int(ddoc.get("budget", constants.DEFAULT_BUDGET))
    if budget < 1:
        raise ConfigError("synthesis.budget must be at least 1")
    synthesis = SynthesisSpec(gamma=gamma, gamma_range=rng, alphas=alphas,
                              Q=Q, Qbar=Qbar, margin=margin, budget=budget,
                              seed=int(ddoc.get("seed", 0)))

    bdoc = doc.get("baseline", {"mode": "synth"})
    mode = bdoc.get("mode", "synth")
    if mode == "synth":
        if "gamma" in bdoc or "gamma_range" in bdoc:
            bgamma, brng = _parse_gamma(bdoc, "baseline")
        else:
            bgamma, brng = None, (0.5, 64.0)
        weight = _per_node(bdoc.get("weight", 1.0), count, "baseline.weight", n)
        balphas = _alphas(bdoc.get("alphas", list(alphas)), count,
                          "baseline.alphas")
        baseline = BaselineSpec(mode="synth", gamma=bgamma, gamma_range=brng,
                                weight=weight, alphas=balphas)
    elif mode == "explicit":
        gains_doc = _require(bdoc, "gains", "baseline")
        if len(gains_doc) != count:
            raise ConfigError(f"baseline.gains must list {count} entries")
        gains = []
        for k, gd in enumerate(gains_doc):
            L = _matrix(_require(gd, "L", f"baseline.gains[{k}]"),
                        f"baseline.gains[{k}].L", n, sensors[k].r)
            K = _matrix(_require(gd, "K", f"baseline.gains[{k}]"),
                        f"baseline.gains[{k}].K", n, n)
            gains.append(FilterGains(L=L, K=K))
        baseline = BaselineSpec(mode="explicit", gains=gains)
    else:
        raise ConfigError(f"baseline.mode must be 'synth' or 'explicit', "
                          f"got {mode!r}")

    scenarios = {}
    for idx, sdoc in enumerate(doc.get("scenarios", [])):
        sc = _parse_scenario(sdoc, idx, n, count)
        if sc.name in scenarios:
            raise ConfigError(f"duplicate scenario name {sc.name!r}")
        scenarios[sc.name] = sc

    return ProjectConfig(plant=plant, graph=graph, sensors=sensors,
                         trackers=trackers, baseline=baseline,
                         synthesis=synthesis, scenarios=scenarios)


def _per_node_sized(obj, count: int, ctx: str, sizes: list) -> tuple:
    """Per-node square weights whose required size differs per node."""
    if isinstance(obj, (int, float)):
        return tuple(float(obj) * np.eye(sizes[k]) for k in range(count))
    arr = obj
    if isinstance(arr, list) and arr and isinstance(arr[0], list) \
            and arr[0] and isinstance(arr[0][0], list):
        if len(arr) != count:
            raise ConfigError(f"{ctx} must list {count} matrices")
        return tuple(_matrix(a, f"{ctx}[{k}]", sizes[k], sizes[k])
                     for k, a in enumerate(arr))
    if len(set(sizes)) != 1:
        raise ConfigError(f"{ctx}: shared matrix needs equal tracker "
                          "dimensions on every node")
    shared = _matrix(arr, ctx, sizes[0], sizes[0])
    return tuple(shared.copy() for _ in range(count))
