import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Gram map / constraint construction
GRAM_CONFIG = {
    "power_iter_tol": 1e-6,  # Relative change stopping the power iteration
    "power_iter_max": 500,
    "power_iter_safety": 1.01,  # Multiplier applied to the ||A||_2^2 estimate
    "power_iter_seed": 20240611,
}

# Eigen solvers
SPECTRAL_CONFIG = {
    "dense_max_n": 200,  # Dense fallback whenever n <= this ...
    "dense_fraction": 0.25,  # ... or s_k > n * this
    "lanczos_tol": 1e-10,
    "lanczos_seed": 7,
    "sign_tol": 1e-14,  # Components below this are ignored by the sign convention
}

# Solver defaults; None means "derive from the problem"
SOLVER_CONFIG = {
    "variant": "afpc-bb",
    "epsilon": 1e-3,
    "mu_1": None,  # 1/4 ||A*b||
    "mu_bar": None,  # 1e-4 ||A*b||
    "mu_1_factor": 0.25,
    "mu_bar_factor": 1e-4,
    "eta": 0.25,
    "tau_fixed": None,  # 1.99 / L
    "tau_min": None,  # 1e-3 / L
    "tau_max": None,  # 10 / L
    "tau_fixed_factor": 1.99,
    "tau_min_factor": 1e-3,
    "tau_max_factor": 10.0,
    "eps_rank": 1e-2,
    "max_iter": 1000,
    "xtol": 1e-8,
    "stage_xtol": 1e-3,  # Stagnation test for stages with mu > mu_bar
    "violation_limit": 10,
    "rank_rel_tol": 1e-6,  # rank = #{lambda_i > tol * lambda_1}
    "bb_rule": "bb1",
    "mu_norm": "spectral",
    "continuation": True,
    "full_decomposition": False,
}

# Gauss-Newton refinement
REFINE_CONFIG = {
    "tol": 1e-10,
    "max_gn": 30,
    "max_halvings": 20,
    "rank_retries": 3,
    "positive_tol": 1e-9,  # Eigenvalues below tol * max(1, lambda_1) count as zero
}

# Exact certification
EXACT_CONFIG = {
    "denom_bound": 2 ** 32,
    "escalation": 2 ** 16,
    "max_denom_bound": 2 ** 128,
    "integer_rounding": True,  # Try nearest-integer rounding before the ladder
}

# Benchmark harness
BENCH_CONFIG = {
    "entry_bound": 5,
    "max_workers": int(os.getenv("GRAMSOS_THREADS", "4")),
    "desk_max_n": 500,
    "hard_max_n": 1500,
    "max_vars": 60,
    "sparse_basis_factor": 2,  # Sparse mode samples n monomials from >= factor * n
    "csv_columns": [
        "variant", "n", "r", "p", "FR", "seed", "iterations",
        "time_s", "rel_err", "rank", "converged",
    ],
}

BENCH_PRESETS = {
    "compare-desk": {
        "name": "compare-desk",
        "mode": "compare",
        "cases": [{"n": 100, "r": 10}],
        "variants": ["mfpc", "mfpc-bb", "afpc-bb"],
        "seeds": [0, 1, 2, 3, 4],
        "epsilon": 5e-3,
        "max_iter": 2000,
    },
    "recovery-desk": {
        "name": "recovery-desk",
        "mode": "recovery",
        "cases": [{"n": 100, "r": 10}, {"n": 200, "r": 10}],
        "variants": ["afpc-bb"],
        "seeds": [0],
        "epsilon": 1e-3,
        "max_iter": 500,
    },
    "exact-desk": {
        "name": "exact-desk",
        "mode": "exact",
        "cases": [{"n": 50, "r": 5}],
        "variants": ["afpc-bb"],
        "seeds": [0, 1, 2, 3, 4],
        "epsilon": 1e-3,
        "max_iter": 1000,
        "sparse_basis": True,
        "exact": True,
    },
}

# Logging Configuration
LOGGING_CONFIG = {
    "level": os.getenv("GRAMSOS_LOG_LEVEL", "INFO"),
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "log_file": "gramsos.log",
}

# Paths
PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent
DATA_DIR = Path(os.getenv("GRAMSOS_DATA_DIR", str(PROJECT_ROOT / "data")))
LOGS_DIR = PROJECT_ROOT / "logs"
RESULTS_DATABASE = "bench_runs.duckdb"
