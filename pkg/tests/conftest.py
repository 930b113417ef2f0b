import sys
from pathlib import Path

# make tests/oracles.py importable when pytest is run from the repo root
sys.path.insert(0, str(Path(__file__).parent))

# Canonical synthetic scenarios shared across the suite.

# Two players closing head-on at 4 yd/s from 10 yd apart.
HEAD_ON_SCENARIO = """
sample_dt = 0.1
duration = 3.9
seed = 42
noise_sigma = 0
dropout = 0
route.A = 0,0 @ 0 ; 20,0 @ 10
route.B = 10,0 @ 0 ; -10,0 @ 10
"""

# One stationary player, one approaching twice with a clean separation
# beyond the release radius in between: exactly two episodes.
DOUBLE_APPROACH_SCENARIO = """
sample_dt = 0.1
duration = 6.0
seed = 7
noise_sigma = 0
dropout = 0
route.A = 0,0 @ 0 ; 0,0 @ 8
route.B = 5,0 @ 0 ; 0.45,0 @ 2 ; 1.6,0 @ 3 ; 0.45,0 @ 4 ; 5,0 @ 6
"""

# A crossing pair plus a parallel control pair 3 yd apart that must never fire.
CROSSING_WITH_CONTROL_SCENARIO = """
sample_dt = 0.1
duration = 7.0
seed = 3
noise_sigma = 0
dropout = 0
route.E = 0,0 @ 0 ; 14,14 @ 7
route.F = 14,0 @ 0 ; 0,14 @ 7
route.C = 0,20 @ 0 ; 20,20 @ 10
route.D = 0,23 @ 0 ; 20,23 @ 10
"""

ALL_SCENARIOS = {
    "head_on": HEAD_ON_SCENARIO,
    "double_approach": DOUBLE_APPROACH_SCENARIO,
    "crossing_with_control": CROSSING_WITH_CONTROL_SCENARIO,
}
