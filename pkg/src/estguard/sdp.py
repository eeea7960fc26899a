"""Feasibility solver for systems of strict linear matrix inequalities.

Constraints are affine in symmetric/rectangular matrix variables.  Each
constraint assembles as

    constant + sum_k coeff_k * sym(L_k' V_k R_k),   sym(B) = (B + B')/2,

with V_k the referenced variable (optionally transposed).  A symmetric
placement on the diagonal therefore contributes its coefficient once,
while an off-diagonal block and its mirror are produced by a single term
with twice the coefficient.

The solver minimizes phi(vars) = max over constraints of (violation
eigenvalue + margin) by subgradient descent with Polyak-style steps; phi
is convex because every assembled matrix is affine in the variables.  The
step targets an adaptive aspiration level best_phi - delta: the gap delta
halves whenever a progress window fails to deliver and grows again on
fast windows, so steps stay useful even when the feasible set sits far
from the starting point.

Inside the iteration numpy's eigh does the eigenwork for speed; every
reported certificate is recomputed with the independent Jacobi
eigensolver from linalg before a solution may claim feasibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constants, linalg


class AssemblyError(ValueError):
    """A constraint references unknown variables or non-conformable blocks."""


@dataclass(frozen=True)
class LmiVariable:
    name: str
    rows: int
    cols: int
    symmetric: bool = False

    def __post_init__(self):
        if self.symmetric and self.rows != self.cols:
            raise AssemblyError(f"symmetric variable {self.name} must be square")


@dataclass(frozen=True)
class LmiTerm:
    """One affine term: coeff * sym(left' V right) with V the (optionally
    transposed) variable."""

    var: str
    left: np.ndarray
    right: np.ndarray
    transpose: bool = False
    coeff: float = 1.0


@dataclass(frozen=True)
class LmiConstraint:
    label: str
    constant: np.ndarray
    terms: tuple
    sense: str                      # "neg_def" (< 0) or "pos_def" (> 0)
    margin: float = constants.DEFAULT_MARGIN

    def __post_init__(self):
        if self.sense not in ("neg_def", "pos_def"):
            raise AssemblyError(f"unknown sense {self.sense!r}")
        if self.margin <= 0.0:
            raise AssemblyError("margin must be positive")
        C = linalg.symmetrize(linalg.as_matrix(self.constant,
                                               name=f"{self.label} constant"))
        object.__setattr__(self, "constant", C)
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def size(self) -> int:
        return self.constant.shape[0]


def _effective_shape(var: LmiVariable, term: LmiTerm) -> tuple:
    return (var.cols, var.rows) if term.transpose else (var.rows, var.cols)


def check_conformable(variables, constraints) -> dict:
    """Validate every term against the declared variables; returns the
    variable table keyed by name."""
    table = {v.name: v for v in variables}
    if len(table) != len(variables):
        raise AssemblyError("duplicate variable names")
    for con in constraints:
        nt = con.size
        for term in con.terms:
            if term.var not in table:
                raise AssemblyError(
                    f"{con.label} references unknown variable {term.var!r}")
            p, q = _effective_shape(table[term.var], term)
            if term.left.shape != (p, nt):
                raise AssemblyError(
                    f"{con.label}: left multiplier for {term.var} has shape "
                    f"{term.left.shape}, expected {(p, nt)}")
            if term.right.shape != (q, nt):
                raise AssemblyError(
                    f"{con.label}: right multiplier for {term.var} has shape "
                    f"{term.right.shape}, expected {(q, nt)}")
    return table


def assemble(con: LmiConstraint, assignment: dict) -> np.ndarray:
    """Evaluate the constraint at an assignment; exactly linear in each
    variable and symmetric by construction."""
    acc = con.constant.copy()
    for term in con.terms:
        if term.var not in assignment:
            raise AssemblyError(f"{con.label}: no value for variable {term.var!r}")
        V = assignment[term.var]
        if term.transpose:
            V = V.T
        B = term.left.T @ V @ term.right
        acc += (0.5 * term.coeff) * (B + B.T)
    return linalg.symmetrize(acc)


@dataclass
class CertEntry:
    """Independently recomputed extreme eigenvalue of one constraint."""

    label: str
    sense: str
    margin: float
    extreme: float          # lambda_max for neg_def, lambda_min for pos_def
    satisfied: bool


@dataclass
class SdpSolution:
    status: str             # feasible / infeasible_budget / numerical_failure
    assignment: dict
    certificates: list
    iterations: int
    best_violation: float   # final phi = max constraint violation + margin
    worst_label: str


def certify(constraints, assignment: dict) -> list:
    """Recompute every constraint's extreme eigenvalue with the Jacobi
    eigensolver (independent of the solver's internals)."""
    out = []
    for con in constraints:
        val = assemble(con, assignment)
        lo, hi = linalg.lambda_extremes(val)
        if con.sense == "neg_def":
            out.append(CertEntry(con.label, con.sense, con.margin, hi,
                                 hi <= -con.margin))
        else:
            out.append(CertEntry(con.label, con.sense, con.margin, lo,
                                 lo >= con.margin))
    return out


class _Layout:
    """Flat packing of all variables into one vector (row-major slices)."""

    def __init__(self, variables):
        self.vars = list(variables)
        self.slices = {}
        off = 0
        for v in self.vars:
            size = v.rows * v.cols
            self.slices[v.name] = slice(off, off + size)
            off += size
        self.total = off

    def pack(self, assignment: dict) -> np.ndarray:
        x = np.empty(self.total)
        for v in self.vars:
            x[self.slices[v.name]] = assignment[v.name].reshape(-1)
        return x

    def unpack(self, x: np.ndarray) -> dict:
        out = {}
        for v in self.vars:
            out[v.name] = x[self.slices[v.name]].reshape(v.rows, v.cols).copy()
        return out

    def project(self, x: np.ndarray) -> None:
        """Symmetrize the symmetric-variable slices in place."""
        for v in self.vars:
            if v.symmetric:
                M = x[self.slices[v.name]].reshape(v.rows, v.cols)
                M[:] = 0.5 * (M + M.T)


def _transpose_permutation(rows: int, cols: int) -> np.ndarray:
    """P with vec_row(V') = P @ vec_row(V) for V of shape (rows, cols)."""
    idx = np.arange(rows * cols).reshape(rows, cols).T.reshape(-1)
    P = np.zeros((rows * cols, rows * cols))
    P[np.arange(rows * cols), idx] = 1.0
    return P


class _Compiled:
    """One constraint as an explicit affine map on the packed variables.

    The compiled value is negated for pos_def constraints so that every
    compiled constraint is checked the same way: lambda_max <= -margin.
    """

    def __init__(self, con: LmiConstraint, layout: _Layout, table: dict):
        self.label = con.label
        self.margin = con.margin
        self.size = con.size
        sign = 1.0 if con.sense == "neg_def" else -1.0
        self.const_flat = sign * con.constant.reshape(-1)
        nt2 = con.size * con.size
        self.T = np.zeros((nt2, layout.total))
        for term in con.terms:
            var = table[term.var]
            L, R = term.left, term.right
            p, q = (var.cols, var.rows) if term.transpose else (var.rows, var.cols)
            piece = np.kron(L.T, R.T)                      # vec(L' V R)
            piece = piece + _transpose_permutation(con.size, con.size) @ piece
            m = (0.5 * sign * term.coeff) * piece           # sym() of the block
            if term.transpose:
                m = m @ _transpose_permutation(var.rows, var.cols)
            self.T[:, layout.slices[term.var]] += m

    def value(self, x: np.ndarray) -> np.ndarray:
        V = (self.const_flat + self.T @ x).reshape(self.size, self.size)
        return 0.5 * (V + V.T)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return self.T.T @ np.outer(u, u).reshape(-1)


def solve_feasibility(variables, constraints, budget: int = constants.DEFAULT_BUDGET,
                      seed: int = 0, init: dict | None = None) -> SdpSolution:
    """Search for a strictly feasible point.

    Deterministic for a fixed seed (the seed only drives the one restart
    perturbation).  On success every certificate is re-verified through
    linalg.sym_eig; on failure the best-found violation and the constraint
    achieving it are reported.
    """
    table = check_conformable(variables, constraints)
    rng = np.random.default_rng(seed)
    layout = _Layout(variables)
    compiled = [_Compiled(con, layout, table) for con in constraints]
    hard = -0.5 * min(con.margin for con in constraints)

    def start_point() -> np.ndarray:
        if init is None:
            vals = {v.name: np.eye(v.rows) if v.symmetric
                    else np.zeros((v.rows, v.cols)) for v in variables}
        else:
            vals = {}
            for v in variables:
                x = np.array(init[v.name], dtype=float)
                if x.shape != (v.rows, v.cols):
                    raise AssemblyError(f"initial value for {v.name} has shape "
                                        f"{x.shape}, expected {(v.rows, v.cols)}")
                vals[v.name] = x
        x = layout.pack(vals)
        layout.project(x)
        return x

    # group equally-sized constraints so the eigenvalue work batches
    groups = {}
    for idx, c in enumerate(compiled):
        groups.setdefault(c.size, []).append(idx)
    batches = []
    for size, idxs in groups.items():
        T = np.vstack([compiled[i].T for i in idxs])
        const = np.stack([compiled[i].const_flat for i in idxs])
        margins = np.array([compiled[i].margin for i in idxs])
        batches.append((size, np.array(idxs), T, const, margins))

    def evaluate(xv):
        """(phi, active index, assembled value of the active constraint)."""
        phi, active, act_val = -np.inf, 0, None
        for size, idxs, T, const, margins in batches:
            vals = (T @ xv).reshape(len(idxs), size, size) + \
                const.reshape(len(idxs), size, size)
            vals = 0.5 * (vals + vals.transpose(0, 2, 1))
            tops = np.linalg.eigvalsh(vals)[:, -1] + margins
            k = int(np.argmax(tops))
            if tops[k] > phi:
                phi, active, act_val = float(tops[k]), int(idxs[k]), vals[k]
        return phi, active, act_val

    x = start_point()
    best_phi = np.inf
    best_x = x.copy()
    best_label = constraints[0].label
    iters = 0

    def finish(status):
        assignment = layout.unpack(best_x)
        certs = certify(constraints, assignment)
        return SdpSolution(status=status, assignment=assignment,
                           certificates=certs, iterations=iters,
                           best_violation=best_phi, worst_label=best_label)

    for attempt in range(2):
        if attempt == 1:
            # one restart from a perturbed copy of the best point
            scale = 0.1 * (1.0 + np.linalg.norm(best_x))
            x = best_x + scale * rng.standard_normal(best_x.shape)
            layout.project(x)
        delta = None
        window_best = np.inf
        since_window = 0
        while iters < budget:
            iters += 1
            phi, active, act_val = evaluate(x)
            if not np.isfinite(phi):
                return finish("numerical_failure")
            if phi < best_phi:
                best_phi = phi
                best_x = x.copy()
                best_label = constraints[active].label
            if phi <= hard:
                assignment = layout.unpack(best_x)
                certs = certify(constraints, assignment)
                if all(c.satisfied for c in certs):
                    return SdpSolution(status="feasible", assignment=assignment,
                                       certificates=certs, iterations=iters,
                                       best_violation=best_phi,
                                       worst_label=best_label)
                hard *= 2.0  # push deeper; Jacobi recheck disagreed
                continue
            if delta is None:
                delta = max(1.0, 0.5 * abs(phi))
                window_best = phi
            since_window += 1
            if since_window >= constants.ADAPT_WINDOW:
                # aspiration gap adapts to the progress the window delivered
                if window_best - best_phi < 0.25 * delta:
                    delta *= constants.ADAPT_SHRINK
                    if delta < constants.ADAPT_FLOOR_FRACTION * abs(hard):
                        break  # no useful step size left; restart or give up
                else:
                    delta *= constants.ADAPT_GROW
                window_best = best_phi
                since_window = 0
            _, U = np.linalg.eigh(act_val)
            g = compiled[active].gradient(np.ascontiguousarray(U[:, -1]))
            layout.project(g)  # steepest direction within the symmetric slices
            gn2 = float(g @ g)
            if gn2 <= 0.0:
                break  # flat direction; cannot move this constraint
            level = best_phi - delta
            step = (phi - level) / gn2
            x = x - step * g
            layout.project(x)
        if iters >= budget:
            break
    return finish("infeasible_budget")
