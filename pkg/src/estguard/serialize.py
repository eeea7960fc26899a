"""File formats: synthesis-result JSON, verification-report JSON, trace CSV.

Matrices serialize as row-major nested lists.  Floats go through Python's
repr (the shortest string that round-trips exactly), so save/load/save is
byte-stable and re-verification reproduces identical eigenvalue reports.
Node ids are 1-based in every file; the conversion to the package's
0-based ids happens here.
"""

from __future__ import annotations

import json

import numpy as np

from . import constants
from .graph import DirectedGraph
from .model import NodeSensor, PlantModel, TrackerModel
from .sdp import CertEntry
from .sim import SimulationTrace, VerificationReport
from .synth import DetectorGains, SynthesisResult


def _mat(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _vec(a) -> list:
    return np.asarray(a, dtype=float).reshape(-1).tolist()


def graph_to_dict(g: DirectedGraph) -> dict:
    edges = sorted((j + 1, i + 1) for (j, i) in g.edges)
    return {"nodes": g.node_count, "edges": [list(e) for e in edges]}


def graph_from_dict(d: dict) -> DirectedGraph:
    return DirectedGraph.from_edges(
        int(d["nodes"]), [(j - 1, i - 1) for (j, i) in d["edges"]])


def result_to_dict(result: SynthesisResult) -> dict:
    out = {
        "schema_version": constants.SCHEMA_VERSION,
        "kind": "synthesis_result",
        "status": result.status,
        "mode": result.mode,
        "gamma": result.gamma,
        "margin": result.margin,
        "iterations": result.iterations,
        "alphas": [float(a) for a in result.alphas],
        "graph": graph_to_dict(result.graph),
        "plant": {"A": _mat(result.plant.A), "B2": _mat(result.plant.B2),
                  "x0": _vec(result.plant.x0)},
        "sensors": [{"C2": _mat(s.C2), "D2": _mat(s.D2),
                     "Dbar2": _mat(s.Dbar2)} for s in result.sensors],
        "trackers": None if result.trackers is None else
            [{"Omega": _mat(tr.Omega), "Gamma": _mat(tr.Gamma)}
             for tr in result.trackers],
        "weights": {
            "Q": None if result.Q is None else [_mat(q) for q in result.Q],
            "Qbar": [_mat(q) for q in result.Qbar],
        },
        "variables": {
            "X": None if result.X is None else [_mat(x) for x in result.X],
            "M": None if result.M is None else [_mat(m) for m in result.M],
        },
        "gains": None if result.gains is None else
            [{"L_tilde": _mat(gn.L_tilde), "K_tilde": _mat(gn.K_tilde),
              "F_eta": _mat(gn.F_eta), "H_eta": _mat(gn.H_eta)}
             for gn in result.gains],
        "P": None if result.P is None else _mat(result.P),
        "certificates": [
            {"label": c.label, "sense": c.sense, "margin": c.margin,
             "extreme": c.extreme, "satisfied": bool(c.satisfied)}
            for c in result.certificates],
        "diagnostics": result.diagnostics,
        "notes": list(result.notes),
    }
    return out


def result_from_dict(d: dict) -> SynthesisResult:
    if d.get("kind") != "synthesis_result":
        raise ValueError("not a synthesis result document")
    g = graph_from_dict(d["graph"])
    plant = PlantModel(A=d["plant"]["A"], B2=d["plant"]["B2"],
                       x0=d["plant"]["x0"])
    sensors = [NodeSensor(C2=s["C2"], D2=s["D2"], Dbar2=s["Dbar2"])
               for s in d["sensors"]]
    trackers = None
    if d["trackers"] is not None:
        trackers = [TrackerModel(Omega=t["Omega"], Gamma=t["Gamma"])
                    for t in d["trackers"]]
    Q = d["weights"]["Q"]
    Q = None if Q is None else tuple(np.asarray(q, dtype=float) for q in Q)
    Qbar = tuple(np.asarray(q, dtype=float) for q in d["weights"]["Qbar"])
    X = d["variables"]["X"]
    X = None if X is None else [np.asarray(x, dtype=float) for x in X]
    M = d["variables"]["M"]
    M = None if M is None else [np.asarray(m, dtype=float) for m in M]
    gains = None
    if d["gains"] is not None:
        gains = [DetectorGains(
            L_tilde=np.asarray(gn["L_tilde"], dtype=float),
            K_tilde=np.asarray(gn["K_tilde"], dtype=float),
            F_eta=np.asarray(gn["F_eta"], dtype=float).reshape(
                (-1, np.asarray(gn["L_tilde"]).shape[1])),
            H_eta=np.asarray(gn["H_eta"], dtype=float).reshape(
                (-1, np.asarray(gn["K_tilde"]).shape[1])))
            for gn in d["gains"]]
    certs = [CertEntry(c["label"], c["sense"], float(c["margin"]),
                       float(c["extreme"]), bool(c["satisfied"]))
             for c in d["certificates"]]
    return SynthesisResult(
        status=d["status"], mode=d["mode"], gamma=float(d["gamma"]),
        margin=float(d["margin"]), alphas=tuple(float(a) for a in d["alphas"]),
        Q=Q, Qbar=Qbar, graph=g, plant=plant, sensors=sensors,
        trackers=trackers, gains=gains, X=X, M=M,
        P=None if d["P"] is None else np.asarray(d["P"], dtype=float),
        certificates=certs, iterations=int(d["iterations"]),
        diagnostics=dict(d.get("diagnostics", {})),
        notes=list(d.get("notes", [])))


def bundle_to_dict(detector: SynthesisResult,
                   baseline: SynthesisResult | None) -> dict:
    return {
        "schema_version": constants.SCHEMA_VERSION,
        "kind": "design_bundle",
        "detector": result_to_dict(detector),
        "baseline": None if baseline is None else result_to_dict(baseline),
    }


def report_to_dict(report: VerificationReport) -> dict:
    return {
        "schema_version": constants.SCHEMA_VERSION,
        "kind": "verification_report",
        "scenario": report.scenario,
        "overall_pass": report.overall_pass,
        "entries": [
            {"name": e.name, "value": e.value, "threshold": e.threshold,
             "pass": e.passed, "note": e.note} for e in report.entries],
        "warnings": list(report.warnings),
    }


def save_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def trace_to_csv(trace: SimulationTrace, path) -> None:
    """Fixed column order: t, plant state, then per node the estimate,
    the residual output, the innovation stream and the storage sample.
    The first line is a comment carrying the schema version."""
    N = len(trace.zeta)
    n = trace.x.shape[1]
    cols = ["t"] + [f"x[{k}]" for k in range(n)]
    for i in range(N):
        cols += [f"node{i + 1}.xhat[{k}]" for k in range(n)]
        cols += [f"node{i + 1}.etahat[{k}]" for k in range(n)]
        cols += [f"node{i + 1}.zeta[{k}]" for k in range(trace.zeta[i].shape[1])]
        cols += [f"node{i + 1}.V"]
    blocks = [trace.t[:, None], trace.x]
    for i in range(N):
        blocks += [trace.xhat[i], trace.etahat[i], trace.zeta[i],
                   trace.V[i][:, None]]
    data = np.hstack(blocks)
    with open(path, "w") as fh:
        fh.write(f"# schema_version: {constants.SCHEMA_VERSION}\n")
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
