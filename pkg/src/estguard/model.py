"""Plant, sensing, baseline filter, attack signals and the input-tracking
model, plus the per-node augmented matrices the detector design works on.

The augmented state stacks the detector error z_i (dimension n) on top of
the tracking-model error delta_i (dimension n_omega).  Block layout:

    A_mu = [[A, -J], [0, Omega_i]],  J = [I_n 0]  (n x n_omega)
    B1_mu = [I; Gamma_i]             (drives the tracking error input)
    B2_mu = [[-B2, 0], [0, 0]]       (process + measurement disturbances)
    C2_mu = [C_2i 0],  D2_mu = [D_2i  Dbar_2i],  H_mu = [I 0]
    Q_mu  = blockdiag(Qbar_i, Q_i)   (z-weight, then delta-weight)

With no tracking model (baseline filter design) n_omega = 0 and the same
layout degenerates to the plain estimation-error system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import constants, linalg
from .graph import DirectedGraph
from .linalg import as_matrix


class ModelError(ValueError):
    """Model data violates a structural requirement."""


@dataclass(frozen=True)
class PlantModel:
    """dx/dt = A x + B2 xi, x(0) = x0.  A may be unstable."""

    A: np.ndarray
    B2: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, name="plant.A")
        if A.shape[0] != A.shape[1]:
            raise ModelError(f"plant.A must be square, got {A.shape}")
        B2 = as_matrix(self.B2, rows=A.shape[0], name="plant.B2")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape[0] != A.shape[0]:
            raise ModelError(f"plant.x0 has length {x0.shape[0]}, "
                             f"expected {A.shape[0]}")
        if not np.all(np.isfinite(x0)):
            raise ModelError("plant.x0 has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B2", B2)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B2.shape[1]


@dataclass(frozen=True)
class NodeSensor:
    """y_i = C2 x + D2 xi + Dbar2 xi_i.

    The feedthrough Gram matrix E2 = D2 D2' + Dbar2 Dbar2' must be positive
    definite; it is checked at construction and cached.
    """

    C2: np.ndarray
    D2: np.ndarray
    Dbar2: np.ndarray
    E2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        C2 = as_matrix(self.C2, name="sensor.C2")
        r = C2.shape[0]
        D2 = as_matrix(self.D2, rows=r, name="sensor.D2")
        Dbar2 = as_matrix(self.Dbar2, rows=r, name="sensor.Dbar2")
        E2 = D2 @ D2.T + Dbar2 @ Dbar2.T
        min_eig = linalg.lambda_extremes(E2)[0]
        if min_eig <= constants.E2I_MIN_EIG:
            raise ModelError(
                "E_2i not positive definite: min eigenvalue of "
                f"D2 D2' + Dbar2 Dbar2' is {min_eig:.3e}")
        object.__setattr__(self, "C2", C2)
        object.__setattr__(self, "D2", D2)
        object.__setattr__(self, "Dbar2", Dbar2)
        object.__setattr__(self, "E2", E2)

    @property
    def r(self) -> int:
        return self.C2.shape[0]

    @property
    def m_i(self) -> int:
        return self.Dbar2.shape[1]


@dataclass(frozen=True)
class FilterGains:
    """Baseline consensus-filter gains: injection L (n x r), coupling K (n x n)."""

    L: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        L = as_matrix(self.L, name="gains.L")
        K = as_matrix(self.K, rows=L.shape[0], cols=L.shape[0], name="gains.K")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "K", K)


@dataclass(frozen=True)
class TrackerModel:
    """State-space input-tracking model: d omega/dt = Omega omega + Gamma nu,
    output eta = [I 0] omega."""

    Omega: np.ndarray
    Gamma: np.ndarray

    def __post_init__(self):
        Om = as_matrix(self.Omega, name="tracker.Omega")
        if Om.shape[0] != Om.shape[1]:
            raise ModelError(f"tracker.Omega must be square, got {Om.shape}")
        Ga = as_matrix(self.Gamma, rows=Om.shape[0], name="tracker.Gamma")
        if Om.shape[0] < Ga.shape[1]:
            raise ModelError("tracker state dimension must be at least the "
                             "tracked input dimension")
        object.__setattr__(self, "Omega", Om)
        object.__setattr__(self, "Gamma", Ga)

    @property
    def n_omega(self) -> int:
        return self.Omega.shape[0]

    @property
    def n(self) -> int:
        return self.Gamma.shape[1]

    def output_selector(self) -> np.ndarray:
        J = np.zeros((self.n, self.n_omega))
        J[:, : self.n] = np.eye(self.n)
        return J

    def loop_matrix(self) -> np.ndarray:
        """Closed tracking loop Omega + Gamma [I 0] driving eta toward the input."""
        return self.Omega + self.Gamma @ self.output_selector()


def lowpass_tracker(n: int, eps_i: float) -> TrackerModel:
    """First-order low-pass tracking family.

    Omega = [[0, I], [0, -2 eps I]], Gamma = [0; -I]; the open-loop block has
    eigenvalues {0 (n-fold), -2 eps (n-fold)} while the closed tracking loop
    is Hurwitz for every eps > 0.
    """
    if eps_i <= 0.0:
        raise ModelError(f"eps must be positive, got {eps_i}")
    I = np.eye(n)
    Z = np.zeros((n, n))
    Omega = np.block([[Z, I], [Z, -2.0 * eps_i * I]])
    Gamma = np.vstack([Z, -I])
    return TrackerModel(Omega, Gamma)


_ATTACK_KINDS = ("none", "constant_bias", "lowpass_transient", "l2_pulse")


@dataclass(frozen=True)
class AttackSignal:
    """Additive bias input injected into one node's observer dynamics.

    constant_bias and lowpass_transient have finite limits; l2_pulse is
    square integrable.
    """

    kind: str = "none"
    target: np.ndarray | None = None   # steady value / pulse amplitude
    t_on: float = 0.0
    tau: float = 1.0                   # transient time constant
    t_off: float = 0.0                 # pulse end (l2_pulse only)

    def __post_init__(self):
        if self.kind not in _ATTACK_KINDS:
            raise ModelError(f"unknown attack kind {self.kind!r}")
        if self.kind != "none":
            if self.target is None:
                raise ModelError(f"attack kind {self.kind!r} needs a target vector")
            tgt = np.asarray(self.target, dtype=float).reshape(-1)
            if not np.all(np.isfinite(tgt)):
                raise ModelError("attack target has non-finite entries")
            object.__setattr__(self, "target", tgt)
        if self.kind == "lowpass_transient" and self.tau <= 0.0:
            raise ModelError("transient time constant must be positive")
        if self.kind == "l2_pulse" and self.t_off <= self.t_on:
            raise ModelError("pulse needs t_off > t_on")


def attack_value(a: AttackSignal, t: float, n: int) -> np.ndarray:
    """Attack input at time t (scalar t)."""
    return attack_series(a, np.asarray([t], dtype=float), n)[0]


def attack_series(a: AttackSignal, tgrid: np.ndarray, n: int) -> np.ndarray:
    """Attack input sampled on a time grid, shape (len(tgrid), n)."""
    t = np.asarray(tgrid, dtype=float)
    out = np.zeros((t.shape[0], n))
    if a.kind == "none":
        return out
    if a.target.shape[0] != n:
        raise ModelError(f"attack target has length {a.target.shape[0]}, "
                         f"expected {n}")
    if a.kind == "constant_bias":
        on = (t >= a.t_on).astype(float)
        out = np.outer(on, a.target)
    elif a.kind == "lowpass_transient":
        dt = np.maximum(t - a.t_on, 0.0)
        gain = np.where(t >= a.t_on, 1.0 - np.exp(-dt / a.tau), 0.0)
        out = np.outer(gain, a.target)
    elif a.kind == "l2_pulse":
        on = ((t >= a.t_on) & (t < a.t_off)).astype(float)
        out = np.outer(on, a.target)
    return out


@dataclass(frozen=True)
class AugmentedNode:
    """Per-node augmented matrices used by the detector design."""

    n: int
    n_omega: int
    m: int
    m_i: int
    r: int
    A_mu: np.ndarray
    B1_mu: np.ndarray
    B2_mu: np.ndarray
    C2_mu: np.ndarray
    D2_mu: np.ndarray
    H_mu: np.ndarray
    Q_mu: np.ndarray
    E2: np.ndarray
    Omega: np.ndarray
    Gamma: np.ndarray
    # cached combinations (all constant in the design variables)
    Einv_C: np.ndarray = field(repr=False, default=None)
    Einv_D: np.ndarray = field(repr=False, default=None)
    W: np.ndarray = field(repr=False, default=None)          # I - D' E^-1 D
    B2W: np.ndarray = field(repr=False, default=None)
    B2_DtEinvC: np.ndarray = field(repr=False, default=None)
    CtEinvC: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.n + self.n_omega

    def __post_init__(self):
        Einv_C = linalg.solve(self.E2, self.C2_mu)
        Einv_D = linalg.solve(self.E2, self.D2_mu)
        W = np.eye(self.m + self.m_i) - self.D2_mu.T @ Einv_D
        object.__setattr__(self, "Einv_C", Einv_C)
        object.__setattr__(self, "Einv_D", Einv_D)
        object.__setattr__(self, "W", linalg.symmetrize(W))
        object.__setattr__(self, "B2W", self.B2_mu @ self.W)
        object.__setattr__(self, "B2_DtEinvC",
                           self.B2_mu @ (self.D2_mu.T @ Einv_C))
        object.__setattr__(self, "CtEinvC",
                           linalg.symmetrize(self.C2_mu.T @ Einv_C))


def _check_weight(Qm, size: int, name: str, definite: bool) -> np.ndarray:
    Q = linalg.require_symmetric(as_matrix(Qm, rows=size, cols=size, name=name),
                                 name=name)
    min_eig = linalg.lambda_extremes(Q)[0]
    if definite and min_eig <= 0.0:
        raise ModelError(f"{name} must be positive definite "
                         f"(min eigenvalue {min_eig:.3e})")
    if not definite and min_eig < -1e-12:
        raise ModelError(f"{name} must be positive semidefinite "
                         f"(min eigenvalue {min_eig:.3e})")
    return Q


def augment(plant: PlantModel, sensor: NodeSensor, tracker: TrackerModel | None,
            Q_i, Qbar_i) -> AugmentedNode:
    """Assemble the augmented per-node matrices.

    With tracker=None the block layout degenerates to the plain estimation
    error system (baseline filter design); Qbar_i then weighs the full state
    and must be positive definite, while Q_i is unused.
    """
    n, m = plant.n, plant.m
    if sensor.C2.shape[1] != n:
        raise ModelError(f"sensor.C2 has {sensor.C2.shape[1]} columns, "
                         f"expected n={n}")
    if sensor.D2.shape[1] != m:
        raise ModelError(f"sensor.D2 has {sensor.D2.shape[1]} columns, "
                         f"expected m={m}")
    if tracker is None:
        n_w = 0
        Omega = np.zeros((0, 0))
        Gamma = np.zeros((0, n))
        Qbar = _check_weight(Qbar_i, n, "Q_e", definite=True)
        Q_mu = Qbar
    else:
        if tracker.n != n:
            raise ModelError(f"tracker expects input dimension {tracker.n}, "
                             f"plant has n={n}")
        n_w = tracker.n_omega
        Omega, Gamma = tracker.Omega, tracker.Gamma
        Q = _check_weight(Q_i, n_w, "Q_i", definite=True)
        Qbar = _check_weight(Qbar_i, n, "Qbar_i", definite=False)
        Q_mu = np.block([[Qbar, np.zeros((n, n_w))],
                         [np.zeros((n_w, n)), Q]])
    if n_w:
        J = np.zeros((n, n_w))
        J[:, :n] = np.eye(n)
        A_mu = np.block([[plant.A, -J],
                         [np.zeros((n_w, n)), Omega]])
    else:
        A_mu = plant.A.copy()
    B1_mu = np.vstack([np.eye(n), Gamma])
    B2_mu = np.block([[-plant.B2, np.zeros((n, sensor.m_i))],
                      [np.zeros((n_w, m)), np.zeros((n_w, sensor.m_i))]])
    C2_mu = np.hstack([sensor.C2, np.zeros((sensor.r, n_w))])
    D2_mu = np.hstack([sensor.D2, sensor.Dbar2])
    H_mu = np.hstack([np.eye(n), np.zeros((n, n_w))])
    return AugmentedNode(
        n=n, n_omega=n_w, m=m, m_i=sensor.m_i, r=sensor.r,
        A_mu=A_mu, B1_mu=B1_mu, B2_mu=B2_mu, C2_mu=C2_mu, D2_mu=D2_mu,
        H_mu=H_mu, Q_mu=Q_mu, E2=sensor.E2.copy(),
        Omega=Omega.copy(), Gamma=Gamma.copy())


def residual_outputs(xhats, y_i: np.ndarray, g: DirectedGraph, i: int,
                     sensor: NodeSensor) -> tuple:
    """Detector inputs at node i.

    zeta_i = y_i - C2 xhat_i (local innovation) and
    zetabar_i = sum over in-neighbors of (xhat_j - xhat_i) (disagreement).
    """
    g._check_node(i)
    if xhats[i] is None:
        raise ValueError(f"missing estimate for node {i}")
    xi = np.asarray(xhats[i], dtype=float).reshape(-1)
    zeta = np.asarray(y_i, dtype=float).reshape(-1) - sensor.C2 @ xi
    zetabar = np.zeros_like(xi)
    for j in g.in_neighbors(i):
        if xhats[j] is None:
            raise ValueError(f"missing neighbor estimate for node {j}")
        zetabar += np.asarray(xhats[j], dtype=float).reshape(-1) - xi
    return zeta, zetabar
