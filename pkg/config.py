# config.py
import os
from dotenv import load_dotenv

load_dotenv()


def _env_int(name, default):
    raw = os.getenv(name, str(default))
    try:
        return int(raw)
    except ValueError:
        raise RuntimeError(f"{name} must be an integer, got {raw!r}")


def _env_float(name, default):
    raw = os.getenv(name, str(default))
    try:
        return float(raw)
    except ValueError:
        raise RuntimeError(f"{name} must be a number, got {raw!r}")


# ── Runtime ─────────────────────────────────────────────
WORKERS   = _env_int("COSPARSE_WORKERS", 1)
LOG_LEVEL = os.getenv("COSPARSE_LOG_LEVEL", "INFO").upper()
OUT_DIR   = os.getenv("COSPARSE_OUT_DIR", "out")

# ── Numerics ────────────────────────────────────────────
ENUM_BUDGET = _env_int("COSPARSE_ENUM_BUDGET", 2_000_000)
RANK_TOL    = _env_float("COSPARSE_RANK_TOL", 1e-10)
MAX_ITERS   = _env_int("COSPARSE_MAX_ITERS", 500)
LAMBDA      = _env_float("COSPARSE_LAMBDA", 1e3)

# ── Theory ──────────────────────────────────────────────
SIGMA_SQ = _env_float("COSPARSE_SIGMA_SQ", 5.0)


if WORKERS < 1:
    raise RuntimeError("COSPARSE_WORKERS must be at least 1")
if LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
    raise RuntimeError(f"COSPARSE_LOG_LEVEL {LOG_LEVEL!r} is not a logging level")
