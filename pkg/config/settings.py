"""
Configuration settings loaded from environment variables.
Command-line flags override these; these override the built-in defaults.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load .env file from project root
BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")

# Preprocessing
THETA = float(os.getenv("THETA", "0.005"))
MIN_LEAF_ROWS = int(os.getenv("MIN_LEAF_ROWS", "2"))  # theta is raised to this many rows
BINS = int(os.getenv("BINS", "5"))
COST_MODE = os.getenv("COST_MODE", "unit")
SEED = int(os.getenv("SEED", "0"))

# Fixed train/validation/test fractions
SPLIT_FRACTIONS = (0.7, 0.1, 0.2)

# Lambda tuning: geometric grid 2**MAX .. 2**MIN, factor 1/2
LAMBDA_MAX_EXP = int(os.getenv("LAMBDA_MAX_EXP", "6"))
LAMBDA_MIN_EXP = int(os.getenv("LAMBDA_MIN_EXP", "-6"))
TUNE_MAX_DROP = float(os.getenv("TUNE_MAX_DROP", "0.01"))  # relative AUC drop

# Cost-complexity pruning grid (log-spaced)
PRUNE_ALPHA_MIN = float(os.getenv("PRUNE_ALPHA_MIN", "1e-5"))
PRUNE_ALPHA_MAX = float(os.getenv("PRUNE_ALPHA_MAX", "1.0"))
PRUNE_ALPHA_COUNT = int(os.getenv("PRUNE_ALPHA_COUNT", "20"))

# Benchmark worker pool
BENCH_WORKERS = int(os.getenv("BENCH_WORKERS", "2"))

# Oracle caps
AUDIT_MAX_OBJECTS = int(os.getenv("AUDIT_MAX_OBJECTS", "8"))
AUDIT_MAX_TESTS = int(os.getenv("AUDIT_MAX_TESTS", "8"))

# Interchange format version for instance / model JSON
FORMAT_VERSION = 1

# Paths
RESULTS_PATH = Path(os.getenv("RESULTS_PATH", str(BASE_DIR / "results")))
LOGS_PATH = Path(os.getenv("LOGS_PATH", str(BASE_DIR / "logs")))
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

# Ensure paths exist
LOGS_PATH.mkdir(parents=True, exist_ok=True)
