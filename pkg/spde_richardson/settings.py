# The defaults below are read at call time by the solvers and
# the study harness. spde_richardson.configure_numerics can change them.

# Linear solver used by the drift-implicit stepper.
# "direct": sparse LU factorization (cached when the coefficients
#           do not depend on time)
# "gmres":  restarted GMRES from scipy.sparse.linalg
IMPLICIT_SOLVER = "direct"
IMPLICIT_TOL = 1e-10
IMPLICIT_MAXITER = 1000

# Explicit stepping is refused when the sufficient CFL margin
# dt * (sum of scaled stencil coefficients) exceeds this value.
CFL_LIMIT = 1.0
# A warning is logged above this margin.
CFL_WARN = 0.9

# Random sample used for pointwise checks of stencil coefficients
# (nonnegativity, lower bounds, reconstruction round trips).
SAMPLE_SIZE = 100
SAMPLE_SEED = 0
# Half-width of the box sampled when no period is given.
SAMPLE_BOX = 10.0

# Moment exponent q in (E |error|^q)^(1/q).
DEFAULT_Q = 2
MAX_Q = 8
# Below this replicate count a warning is issued for q > 2.
HIGH_Q_MIN_REPLICATES = 32

# Normal quantile of the confidence band around fitted orders.
CONFIDENCE_Z = 1.96

# Geometric search for the weight scaling epsilon:
# epsilon = EPSILON_SEARCH_START * 2**(-k), k = 0..EPSILON_SEARCH_STEPS
EPSILON_SEARCH_START = 1.0
EPSILON_SEARCH_STEPS = 60
# Meshes sampled in [0, h_max] during the search.
EPSILON_SEARCH_MESHES = 9

# Float format of every CSV written by the package.
# Round-trip precision keeps reruns byte-identical.
CSV_FLOAT_FORMAT = "%.17g"
