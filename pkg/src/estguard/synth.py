"""Detector synthesis: coupled-inequality assembly, feasibility solve and
closed-form gain recovery.

Each node i contributes one block inequality

    [ S_i                X_i B1   X_i B2 W   -M_i H ...  -M_i H ]
    [ B1' X_i            -g^2 I   0           0    ...    0     ]
    [ W B2' X_i           0       -g^2 I      0    ...    0     ]
    [ -H' M_i'            0        0        -pi_j1 X_j1 ... 0   ]
    [  ...                                        ...           ]  < 0

    S_i = X_i At + At' X_i + p_i (M_i H + H' M_i') + Q_mu
          - g^2 C' E^-1 C,        At = A_mu + alpha_i I + B2 D' E^-1 C,
    W   = I - D' E^-1 D,          pi_j = 2 alpha_j / (q_j + 1),

coupled across the network through the trailing neighbor blocks, plus
X_i > 0.  The inequalities are affine in (X_i, M_i); the injection gain is
not a free variable but recovered afterwards as

    K_mu_i = -X_i^{-1} M_i,
    L_mu_i = (g^2 X_i^{-1} C' - B2 D') E^{-1},

and split into the detector coefficients.  A from-scratch dense assembly
(`assemble_node_lmi_direct`) re-verifies every certificate through a code
path disjoint from the solver's.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import constants, linalg, sdp
from .graph import DirectedGraph, pi_weight
from .model import AugmentedNode, FilterGains, PlantModel, augment
from .sdp import CertEntry, LmiConstraint, LmiTerm, LmiVariable


@dataclass(frozen=True)
class SynthesisConfig:
    """Design knobs: performance level gamma, per-node dissipation rates
    alpha_i, tracking-error weights Q (positive definite) and state-error
    weights Qbar (semidefinite; definite when asymptotic tracking is the
    goal, zero for the weaker L2 tracking design)."""

    gamma: float
    alphas: tuple
    Q: tuple | None        # per-node delta weights; None in baseline mode
    Qbar: tuple            # per-node z weights; the only weight in baseline mode
    margin: float = constants.DEFAULT_MARGIN
    budget: int = constants.DEFAULT_BUDGET
    seed: int = 0

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if any(a <= 0.0 for a in self.alphas):
            raise ValueError("alphas must all be positive")
        if self.margin <= 0.0:
            raise ValueError("margin must be positive")


@dataclass(frozen=True)
class DetectorGains:
    """Per-node detector coefficients.

    Stacking [L_tilde; F_eta] gives the full injection gain and
    [K_tilde; H_eta] the full coupling gain of the augmented design.
    """

    L_tilde: np.ndarray    # n x r
    K_tilde: np.ndarray    # n x n
    F_eta: np.ndarray      # n_omega x r
    H_eta: np.ndarray      # n_omega x n

    @property
    def L_mu(self) -> np.ndarray:
        return np.vstack([self.L_tilde, self.F_eta])

    @property
    def K_mu(self) -> np.ndarray:
        return np.vstack([self.K_tilde, self.H_eta])


@dataclass
class SynthesisResult:
    """Outcome of one feasibility solve, carrying the full problem data so
    it can be re-verified and simulated standalone."""

    status: str
    mode: str                    # "detector" | "baseline"
    gamma: float
    margin: float
    alphas: tuple
    Q: tuple | None
    Qbar: tuple
    graph: DirectedGraph
    plant: PlantModel
    sensors: list
    trackers: list | None
    gains: list | None
    X: list | None
    M: list | None
    P: np.ndarray | None
    certificates: list
    iterations: int
    diagnostics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def as_filter_gains(self) -> list:
        """Baseline-mode gains as plain consensus-filter gains."""
        if self.mode != "baseline" or self.gains is None:
            raise ValueError("no baseline gains available")
        return [FilterGains(L=gi.L_tilde, K=gi.K_tilde) for gi in self.gains]

    def warm_start(self) -> dict | None:
        if self.X is None or self.M is None:
            return None
        init = {}
        for i, (Xi, Mi) in enumerate(zip(self.X, self.M)):
            init[f"X{i}"] = Xi
            init[f"M{i}"] = Mi
        return init


def _selector(total: int, offset: int, width: int) -> np.ndarray:
    S = np.zeros((width, total))
    S[:, offset:offset + width] = np.eye(width)
    return S


def build_S(node: AugmentedNode, alpha: float, gamma: float, p_i: int,
            x_name: str, m_name: str, frame: np.ndarray | None = None) -> tuple:
    """Constant part and affine terms of the S block.

    `frame` embeds the block into a larger symmetric frame (shape
    node.dim x total); identity when omitted.  With p_i = 0 the coupling
    variable M drops out entirely.
    """
    nmu = node.dim
    if frame is None:
        frame = np.eye(nmu)
    Atil = node.A_mu + alpha * np.eye(nmu) + node.B2_DtEinvC
    const = frame.T @ (node.Q_mu - gamma ** 2 * node.CtEinvC) @ frame
    terms = [LmiTerm(x_name, left=frame, right=Atil @ frame, coeff=2.0)]
    if p_i > 0:
        terms.append(LmiTerm(m_name, left=frame, right=node.H_mu @ frame,
                             coeff=2.0 * p_i))
    return linalg.symmetrize(const), terms


def build_coupled_lmi(g: DirectedGraph, nodes: list,
                      cfg: SynthesisConfig) -> tuple:
    """Variables and constraints for the network-coupled feasibility problem.

    Per node: one strict negative-definite block constraint of size
    dim + n + (m + m_i) + sum of neighbor dims (neighbor columns ordered by
    ascending node id) and one strict positive-definite constraint on X_i.
    The block-constraint margin is scale aware:
    margin * (1 + ||constant part||_2).
    """
    if len(nodes) != g.node_count or len(cfg.alphas) != g.node_count:
        raise ValueError("graph, node list and alphas must agree in length")
    variables = []
    for i, node in enumerate(nodes):
        variables.append(LmiVariable(f"X{i}", node.dim, node.dim, symmetric=True))
        variables.append(LmiVariable(f"M{i}", node.dim, node.n, symmetric=False))
    constraints = []
    g2 = cfg.gamma ** 2
    for i, node in enumerate(nodes):
        nbrs = g.in_neighbors(i)
        p_i = len(nbrs)
        widths = [node.dim, node.n, node.m + node.m_i] + \
                 [nodes[j].dim for j in nbrs]
        offsets = np.concatenate([[0], np.cumsum(widths)]).astype(int)
        total = int(offsets[-1])
        sel = [_selector(total, offsets[k], widths[k])
               for k in range(len(widths))]
        s_const, terms = build_S(node, cfg.alphas[i], cfg.gamma, p_i,
                                 f"X{i}", f"M{i}", frame=sel[0])
        const = s_const
        const = const - g2 * (sel[1].T @ sel[1]) - g2 * (sel[2].T @ sel[2])
        terms.append(LmiTerm(f"X{i}", left=sel[0],
                             right=node.B1_mu @ sel[1], coeff=2.0))
        terms.append(LmiTerm(f"X{i}", left=sel[0],
                             right=node.B2W @ sel[2], coeff=2.0))
        for k, j in enumerate(nbrs):
            terms.append(LmiTerm(f"M{i}", left=sel[0],
                                 right=nodes[j].H_mu @ sel[3 + k], coeff=-2.0))
            terms.append(LmiTerm(f"X{j}", left=sel[3 + k], right=sel[3 + k],
                                 coeff=-pi_weight(g, j, cfg.alphas[j])))
        lo, hi = linalg.lambda_extremes(const)
        margin_i = cfg.margin * (1.0 + max(abs(lo), abs(hi)))
        constraints.append(LmiConstraint(
            label=f"lmi[node{i + 1}]", constant=const, terms=tuple(terms),
            sense="neg_def", margin=margin_i))
    for i, node in enumerate(nodes):
        I = np.eye(node.dim)
        constraints.append(LmiConstraint(
            label=f"Xpos[node{i + 1}]", constant=np.zeros((node.dim, node.dim)),
            terms=(LmiTerm(f"X{i}", left=I, right=I, coeff=1.0),),
            sense="pos_def", margin=cfg.margin))
    return variables, constraints


def recover_gains(node: AugmentedNode, X: np.ndarray, M: np.ndarray,
                  gamma: float) -> DetectorGains:
    """Closed-form gain recovery from a feasible (X, M)."""
    K_mu = -linalg.solve(X, M)
    T = gamma ** 2 * linalg.solve(X, node.C2_mu.T) - node.B2_mu @ node.D2_mu.T
    L_mu = linalg.solve(node.E2, T.T).T
    n = node.n
    return DetectorGains(L_tilde=L_mu[:n], K_tilde=K_mu[:n],
                         F_eta=L_mu[n:], H_eta=K_mu[n:])


def assemble_node_lmi_direct(g: DirectedGraph, nodes: list, alphas, gamma: float,
                             X: list, M: list, i: int) -> np.ndarray:
    """Dense from-scratch assembly of node i's block inequality.

    Intentionally disjoint from the solver-side symbolic assembly so it can
    audit it.
    """
    node = nodes[i]
    nbrs = g.in_neighbors(i)
    p = len(nbrs)
    g2 = gamma ** 2
    Xi, Mi = X[i], M[i]
    Atil = node.A_mu + alphas[i] * np.eye(node.dim) + node.B2_DtEinvC
    S = (Xi @ Atil + Atil.T @ Xi
         + p * (Mi @ node.H_mu + node.H_mu.T @ Mi.T)
         + node.Q_mu - g2 * node.CtEinvC)
    nw = node.m + node.m_i
    row0 = [S, Xi @ node.B1_mu, Xi @ node.B2W]
    row1 = [node.B1_mu.T @ Xi, -g2 * np.eye(node.n), np.zeros((node.n, nw))]
    row2 = [node.B2W.T @ Xi, np.zeros((nw, node.n)), -g2 * np.eye(nw)]
    for j in nbrs:
        row0.append(-Mi @ nodes[j].H_mu)
        row1.append(np.zeros((node.n, nodes[j].dim)))
        row2.append(np.zeros((nw, nodes[j].dim)))
    rows = [row0, row1, row2]
    for k, j in enumerate(nbrs):
        dj = nodes[j].dim
        row = [-nodes[j].H_mu.T @ Mi.T, np.zeros((dj, node.n)),
               np.zeros((dj, nw))]
        for kk, jj in enumerate(nbrs):
            if kk == k:
                row.append(-pi_weight(g, j, alphas[j]) * X[j])
            else:
                row.append(np.zeros((dj, nodes[jj].dim)))
        rows.append(row)
    return linalg.symmetrize(np.block(rows))


def _direct_certificates(g, nodes, cfg, X, M) -> list:
    """Certificates via the dense assembly path and the Jacobi eigensolver."""
    zeros_X = [np.zeros_like(Xi) for Xi in X]
    zeros_M = [np.zeros_like(Mi) for Mi in M]
    out = []
    for i in range(len(nodes)):
        const = assemble_node_lmi_direct(g, nodes, cfg.alphas, cfg.gamma,
                                         zeros_X, zeros_M, i)
        lo, hi = linalg.lambda_extremes(const)
        margin_i = cfg.margin * (1.0 + max(abs(lo), abs(hi)))
        block = assemble_node_lmi_direct(g, nodes, cfg.alphas, cfg.gamma,
                                         X, M, i)
        lam = linalg.lambda_extremes(block)[1]
        out.append(CertEntry(f"lmi[node{i + 1}]", "neg_def", margin_i, lam,
                             lam <= -margin_i))
    for i in range(len(nodes)):
        lam = linalg.lambda_extremes(X[i])[0]
        out.append(CertEntry(f"Xpos[node{i + 1}]", "pos_def", cfg.margin, lam,
                             lam >= cfg.margin))
    return out


_WEIGHT_NOTE = ("per-node weight matrices and dissipation rates carry one "
                "entry for each of the N network nodes")


def synthesize(g: DirectedGraph, plant: PlantModel, sensors: list,
               trackers: list | None, cfg: SynthesisConfig,
               init: dict | None = None) -> SynthesisResult:
    """Build the coupled problem, solve it, recover and split the gains.

    trackers=None selects baseline mode: the tracking block is removed
    (n_omega = 0) and the result's gains are plain consensus-filter gains.
    """
    N = g.node_count
    mode = "baseline" if trackers is None else "detector"
    nodes = []
    for i in range(N):
        tr = None if trackers is None else trackers[i]
        Qi = None if cfg.Q is None else cfg.Q[i]
        nodes.append(augment(plant, sensors[i], tr, Qi, cfg.Qbar[i]))
    variables, constraints = build_coupled_lmi(g, nodes, cfg)
    sol = sdp.solve_feasibility(variables, constraints, budget=cfg.budget,
                                seed=cfg.seed, init=init)
    X = [sol.assignment[f"X{i}"] for i in range(N)]
    M = [sol.assignment[f"M{i}"] for i in range(N)]
    result = SynthesisResult(
        status=sol.status, mode=mode, gamma=cfg.gamma, margin=cfg.margin,
        alphas=tuple(cfg.alphas), Q=cfg.Q, Qbar=cfg.Qbar, graph=g,
        plant=plant, sensors=list(sensors),
        trackers=None if trackers is None else list(trackers),
        gains=None, X=X, M=M, P=None, certificates=sol.certificates,
        iterations=sol.iterations, notes=[_WEIGHT_NOTE])
    if sol.status != "feasible":
        result.diagnostics = {"worst_constraint": sol.worst_label,
                              "violation": sol.best_violation}
        return result
    certs = _direct_certificates(g, nodes, cfg, X, M)
    if not all(c.satisfied for c in certs):
        bad = [c.label for c in certs if not c.satisfied]
        result.status = "numerical_failure"
        result.diagnostics = {"recheck_failed": bad}
        result.certificates = certs
        return result
    result.certificates = certs
    result.gains = [recover_gains(nodes[i], X[i], M[i], cfg.gamma)
                    for i in range(N)]
    n = plant.n
    P = sum(Xi[:n, :n] for Xi in X) / cfg.gamma ** 2
    result.P = linalg.symmetrize(P)
    return result


def verify_certificates(result: SynthesisResult) -> list:
    """Re-verify a (possibly deserialized) result from scratch."""
    if result.X is None or result.M is None:
        raise ValueError("result carries no variables to verify")
    cfg = SynthesisConfig(gamma=result.gamma, alphas=tuple(result.alphas),
                          Q=result.Q, Qbar=result.Qbar, margin=result.margin)
    nodes = []
    for i in range(result.graph.node_count):
        tr = None if result.trackers is None else result.trackers[i]
        Qi = None if result.Q is None else result.Q[i]
        nodes.append(augment(result.plant, result.sensors[i], tr, Qi,
                             result.Qbar[i]))
    return _direct_certificates(result.graph, nodes, cfg, result.X, result.M)


def bisect_gamma(g: DirectedGraph, plant: PlantModel, sensors: list,
                 trackers: list | None, cfg: SynthesisConfig,
                 lo: float, hi: float,
                 rtol: float = constants.GAMMA_BISECT_RTOL) -> tuple:
    """Smallest feasible gamma within a multiplicative tolerance.

    Geometric bisection over [lo, hi]; every feasible probe warm-starts the
    next one.  Returns (result at the final feasible gamma, probe history);
    when even `hi` is infeasible the failing result is returned so callers
    can report the diagnostic.
    """
    if not (0.0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    history = []
    res = synthesize(g, plant, sensors, trackers, replace(cfg, gamma=hi))
    history.append({"gamma": hi, "status": res.status,
                    "iterations": res.iterations})
    if not res.feasible:
        return res, history
    best = res
    warm = res.warm_start()
    while hi / lo > rtol:
        mid = float(np.sqrt(lo * hi))
        probe = synthesize(g, plant, sensors, trackers,
                           replace(cfg, gamma=mid), init=warm)
        history.append({"gamma": mid, "status": probe.status,
                        "iterations": probe.iterations})
        if probe.feasible:
            hi, best, warm = mid, probe, probe.warm_start()
        else:
            lo = mid
    return best, history
