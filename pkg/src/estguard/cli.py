"""Command-line front end.

Subcommands compose through files: `synth` (and `bisect-gamma`) write a
design bundle JSON, `simulate` consumes it together with the project
config and writes a trace CSV, a verification report JSON and figures,
`check` independently re-verifies a bundle's certificates.

Exit codes: 0 ok, 1 config/IO error, 2 infeasible, 3 verification
failure, 4 divergence.
"""

from __future__ import annotations

import dataclasses
import os
import sys

import click

from . import serialize, sim, synth
from .config import ConfigError, ProjectConfig, load_project

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFICATION = 3
EXIT_DIVERGENCE = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_project_or_exit(path) -> ProjectConfig:
    try:
        return load_project(path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))


def _baseline_result(project: ProjectConfig, seed, margin):
    spec = project.baseline
    if spec.mode == "explicit":
        return None, spec.gains
    cfg = synth.SynthesisConfig(
        gamma=spec.gamma if spec.gamma is not None else 1.0,
        alphas=spec.alphas, Q=None, Qbar=spec.weight,
        margin=margin if margin is not None else project.synthesis.margin,
        budget=project.synthesis.budget,
        seed=seed if seed is not None else project.synthesis.seed)
    if spec.gamma is not None:
        res = synth.synthesize(project.graph, project.plant, project.sensors,
                               None, cfg)
    else:
        lo, hi = spec.gamma_range
        res, _ = synth.bisect_gamma(project.graph, project.plant,
                                    project.sensors, None, cfg, lo, hi)
    if not res.feasible:
        return res, None
    return res, res.as_filter_gains()


def _detector_result(project: ProjectConfig, seed, margin, lo=None, hi=None):
    spec = project.synthesis
    eff_margin = margin if margin is not None else spec.margin
    eff_seed = seed if seed is not None else spec.seed
    base = synth.SynthesisConfig(
        gamma=spec.gamma if spec.gamma is not None else 1.0,
        alphas=spec.alphas, Q=spec.Q, Qbar=spec.Qbar, margin=eff_margin,
        budget=spec.budget, seed=eff_seed)
    if lo is not None or hi is not None or spec.gamma is None:
        if lo is None or hi is None:
            if spec.gamma_range is None:
                _fail(EXIT_CONFIG, "bisection requested but the config has "
                      "no synthesis.gamma_range")
            clo, chi = spec.gamma_range
            lo = lo if lo is not None else clo
            hi = hi if hi is not None else chi
        if not 0 < lo < hi:
            _fail(EXIT_CONFIG, f"need 0 < lo < hi, got [{lo}, {hi}]")
        return synth.bisect_gamma(project.graph, project.plant,
                                  project.sensors, project.trackers,
                                  base, lo, hi)
    res = synth.synthesize(project.graph, project.plant, project.sensors,
                           project.trackers, base)
    return res, [{"gamma": base.gamma, "status": res.status,
                  "iterations": res.iterations}]


def _print_certificates(result):
    for c in result.certificates:
        mark = "ok" if c.satisfied else "FAIL"
        kind = "lambda_max" if c.sense == "neg_def" else "lambda_min"
        click.echo(f"  {c.label:<16} {kind} = {c.extreme: .6e}  "
                   f"margin {c.margin:.3e}  {mark}")


def _run_synth(config, out, seed, margin, lo=None, hi=None):
    project = _load_project_or_exit(config)
    bres, gains = _baseline_result(project, seed, margin)
    if bres is not None and not bres.feasible:
        serialize.save_json(serialize.bundle_to_dict(bres, None), out)
        _fail(EXIT_INFEASIBLE,
              f"baseline synthesis {bres.status}: {bres.diagnostics}")
    dres, history = _detector_result(project, seed, margin, lo, hi)
    for probe in history:
        click.echo(f"probe gamma = {probe['gamma']:.6g}: {probe['status']} "
                   f"({probe['iterations']} iterations)")
    doc = serialize.bundle_to_dict(dres, bres)
    if project.baseline.mode == "explicit":
        doc["baseline_explicit"] = [
            {"L": fk.L.tolist(), "K": fk.K.tolist()} for fk in gains]
    serialize.save_json(doc, out)
    if not dres.feasible:
        _fail(EXIT_INFEASIBLE,
              f"detector synthesis {dres.status}: {dres.diagnostics}")
    click.echo(f"feasible at gamma = {dres.gamma:.6g} "
               f"({dres.iterations} iterations); wrote {out}")
    _print_certificates(dres)
    sys.exit(EXIT_OK)


@click.group()
@click.version_option(package_name="estguard")
def main():
    """Distributed attack-detector synthesis and verification toolkit."""


@main.command("synth")
@click.option("--config", required=True, type=click.Path(exists=False),
              help="project configuration JSON")
@click.option("--out", required=True, type=click.Path(),
              help="output design-bundle JSON")
@click.option("--seed", type=int, default=None, help="override solver seed")
@click.option("--margin", type=float, default=None,
              help="override strictness margin")
def cmd_synth(config, out, seed, margin):
    """Synthesize baseline and detector gains from a project config."""
    _run_synth(config, out, seed, margin)


@main.command("bisect-gamma")
@click.option("--config", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--lo", type=float, default=None, help="lower bracket")
@click.option("--hi", type=float, default=None, help="upper bracket")
@click.option("--seed", type=int, default=None)
@click.option("--margin", type=float, default=None)
def cmd_bisect(config, out, lo, hi, seed, margin):
    """Find the smallest feasible performance level by bisection."""
    project = _load_project_or_exit(config)
    if lo is None or hi is None:
        rng = project.synthesis.gamma_range
        if rng is None:
            rng = (0.5, 64.0)
        lo = lo if lo is not None else rng[0]
        hi = hi if hi is not None else rng[1]
    _run_synth(config, out, seed, margin, lo=lo, hi=hi)


def _load_bundle_or_exit(path):
    try:
        doc = serialize.load_json(path)
    except (OSError, ValueError) as exc:
        _fail(EXIT_CONFIG, f"cannot read gains file: {exc}")
    try:
        if doc.get("kind") == "design_bundle":
            det = serialize.result_from_dict(doc["detector"])
            base = doc.get("baseline")
            base = None if base is None else serialize.result_from_dict(base)
            explicit = doc.get("baseline_explicit")
            return det, base, explicit
        return serialize.result_from_dict(doc), None, None
    except (KeyError, TypeError, ValueError) as exc:
        _fail(EXIT_CONFIG, f"malformed gains file: {exc}")


@main.command("check")
@click.option("--gains", required=True, type=click.Path(),
              help="design-bundle or synthesis-result JSON")
def cmd_check(gains):
    """Independently re-verify every certificate in a design file."""
    det, base, _ = _load_bundle_or_exit(gains)
    ok = True
    for label, result in (("detector", det), ("baseline", base)):
        if result is None:
            continue
        if result.X is None or result.M is None:
            _fail(EXIT_CONFIG, f"{label} result carries no variables")
        certs = synth.verify_certificates(result)
        click.echo(f"{label} (gamma = {result.gamma:.6g}):")
        for c in certs:
            mark = "ok" if c.satisfied else "FAIL"
            kind = "lambda_max" if c.sense == "neg_def" else "lambda_min"
            click.echo(f"  {c.label:<16} {kind} = {c.extreme: .6e}  "
                       f"margin {c.margin:.3e}  {mark}")
        ok = ok and all(c.satisfied for c in certs)
    if not ok:
        _fail(EXIT_VERIFICATION, "certificate re-verification failed")
    sys.exit(EXIT_OK)


@main.command("simulate")
@click.option("--config", required=True, type=click.Path())
@click.option("--gains", required=True, type=click.Path())
@click.option("--scenario", required=True, help="scenario name from the config")
@click.option("--out", required=True, type=click.Path(),
              help="output directory")
@click.option("--seed", type=int, default=None, help="override scenario seed")
@click.option("--figures/--no-figures", default=True,
              help="render PNG figures alongside the CSV/JSON output")
def cmd_simulate(config, gains, scenario, out, seed, figures):
    """Simulate one scenario against a synthesized design and verify it."""
    project = _load_project_or_exit(config)
    det, base, explicit = _load_bundle_or_exit(gains)
    if not det.feasible or det.mode != "detector":
        _fail(EXIT_CONFIG, "gains file does not hold a feasible detector design")
    if det.plant.n != project.plant.n \
            or det.graph.node_count != project.graph.node_count:
        _fail(EXIT_CONFIG, "gains file was synthesized for a different "
              "network (state dimension or node count mismatch)")
    if explicit is not None:
        from .model import FilterGains
        filter_gains = [FilterGains(L=e["L"], K=e["K"]) for e in explicit]
    elif base is not None and base.feasible:
        filter_gains = base.as_filter_gains()
    elif project.baseline.mode == "explicit":
        filter_gains = project.baseline.gains
    else:
        _fail(EXIT_CONFIG, "no baseline filter gains available")
    try:
        sc = project.scenario(scenario)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    if seed is not None:
        sc = dataclasses.replace(sc, seed=seed)
    os.makedirs(out, exist_ok=True)
    try:
        trace = sim.simulate(sc, project.plant, project.sensors,
                             filter_gains, det, project.graph)
    except sim.DivergenceError as exc:
        _fail(EXIT_DIVERGENCE, str(exc))
    report = sim.verify(trace, det, filter_gains, sc, project.plant,
                        project.sensors, project.graph)
    serialize.trace_to_csv(trace, os.path.join(out, "trace.csv"))
    serialize.save_json(serialize.report_to_dict(report),
                        os.path.join(out, "report.json"))
    for w in report.warnings:
        click.echo(f"warning: {w}", err=True)
    if figures:
        from .plots import render_figures
        slack = sim.dissipation_slack(trace, det.X, det.alphas, det.gamma,
                                      project.graph)
        render_figures(trace, slack, out)
    for e in report.entries:
        state = {True: "pass", False: "FAIL", None: "info"}[e.passed]
        click.echo(f"  {e.name:<26} {e.value: .6g}  "
                   f"(threshold {e.threshold:g})  {state}")
    if not report.overall_pass:
        _fail(EXIT_VERIFICATION, f"scenario {scenario!r} failed verification")
    click.echo(f"scenario {scenario!r} passed; outputs in {out}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
