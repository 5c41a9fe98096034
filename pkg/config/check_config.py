"""Sampling and fitting constants for the regularity checks and verifications."""

# Growth fits: c(k) = max over samples of max(lhs - k, 0) / max(rhs, EPSILON).
K_GRID = (0.0, 1.0, 10.0, 100.0)
EPSILON = 1e-12

# The u-box (and the sample count) is scaled by each factor in turn.
ESCALATION_FACTORS = (1, 2, 4)
# Relative growth of c + k across the escalation that marks a condition "suspect".
GROWTH_TOLERANCE = 0.25
# Re-checks of a certificate allow this much slack.
CERTIFY_TOLERANCE = 1e-9
MAX_SKIP_FRACTION = 0.01

SAMPLE_COUNT = 2048
DEFAULT_SHELLS = 10
MIN_SHELLS = 4

AFFINE_POINTS = 20
AFFINE_THRESHOLD = 1e-6
AFFINE_STEP = 1e-2
RANK_TOLERANCE = 1e-8
BETA_GRID = (-1.0, 0.0, 0.5, 1.0, 1.5, 1.9)
MU_GRID = (-2.0, -1.0, 0.0, 1.0)

ALPHA_X_SAMPLES = 256

MAXIMALITY_GRID = 81
MAXIMALITY_REFINE_PASSES = 2
MAXIMALITY_REFINE_POINTS = 5

# Extremal verification of solved pairs; tolerances scale with max(1, sup |psi|).
DEFAULT_VERIFY_BOX = (-4.0, 4.0)
VERIFY_ADJOINT_TOLERANCE = 1e-3
VERIFY_GAP_TOLERANCE = 1e-2
ZERO_LEVEL_TOLERANCE = 1e-8

DEFAULT_BOX_U = (-10.0, 10.0)
DEFAULT_BOX_X = (-2.0, 2.0)

# Round-off allowance of the transform module and the reparameterization checks.
TRANSFORM_TOLERANCE = 1e-6
V_MIN = 0.5
V_MAX = 1.5


def get_check_defaults() -> dict:
    return {
        "k_grid": list(K_GRID),
        "epsilon": EPSILON,
        "escalation_factors": list(ESCALATION_FACTORS),
        "growth_tolerance": GROWTH_TOLERANCE,
        "sample_count": SAMPLE_COUNT,
        "shells": DEFAULT_SHELLS,
        "affine_threshold": AFFINE_THRESHOLD,
        "beta_grid": list(BETA_GRID),
        "mu_grid": list(MU_GRID),
        "maximality_grid": MAXIMALITY_GRID,
        "verify_box": list(DEFAULT_VERIFY_BOX),
        "verify_adjoint_tolerance": VERIFY_ADJOINT_TOLERANCE,
        "verify_gap_tolerance": VERIFY_GAP_TOLERANCE,
        "box_u": list(DEFAULT_BOX_U),
        "box_x": list(DEFAULT_BOX_X),
        "transform_tolerance": TRANSFORM_TOLERANCE,
    }


if __name__ == "__main__":
    print("Check defaults:")
    for key, value in get_check_defaults().items():
        print(f"  {key:20s} {value}")
