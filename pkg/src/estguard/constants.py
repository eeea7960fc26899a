"""Shared numeric tolerances and solver defaults.

Every tolerance that more than one module relies on lives here, so the
solver, the independent verification paths and the test suite all agree
on the same numbers.
"""

# --- dense kernel ---
SYMMETRY_RTOL = 1e-12        # accepted relative asymmetry before symmetrizing
JACOBI_OFF_TOL = 1e-12       # off-diagonal Frobenius threshold, relative
JACOBI_MAX_SWEEPS = 100
EIG_RECONSTRUCT_RTOL = 1e-10  # V diag(w) V' must reproduce the input this well
SOLVE_RESIDUAL_RTOL = 1e-8   # ||A X - B||_F <= tol * ||B||_F for linear solves
CONDITION_LIMIT = 1e12       # 1-norm condition estimate above this is singular

# --- model checks ---
E2I_MIN_EIG = 1e-10          # sensor feedthrough Gram matrix must clear this

# --- feasibility solver ---
DEFAULT_MARGIN = 1e-6        # strictness margin for definiteness constraints
DEFAULT_BUDGET = 50_000      # subgradient iterations per feasibility solve
ADAPT_WINDOW = 500           # iterations between aspiration-gap updates
ADAPT_SHRINK = 0.5           # gap multiplier after an unproductive window
ADAPT_GROW = 1.5             # gap multiplier after a productive window
ADAPT_FLOOR_FRACTION = 0.25  # give up when the gap falls below this x |target|
GAMMA_BISECT_RTOL = 1.05     # multiplicative gap at which the gamma search stops

# --- simulation ---
DEFAULT_STEP_CAP = 0.01      # largest admissible integration step, seconds
STEP_NORM_FACTOR = 0.05      # h <= STEP_NORM_FACTOR / ||closed loop||_2
COARSE_GRID_FACTOR = 0.1     # warn when h exceeds this over the fastest rate
DISSIPATION_TOL = 1e-3       # slack tolerance relative to the running scale

SCHEMA_VERSION = "estguard/1"
