import os

from QNMExceptions import ConfigError

SCHEMA          = "qnmlab/1"
LIBRARY_VERSION = "1"

LOG_LEVEL = os.environ.get("QNMLAB_LOG_LEVEL", "WARNING")
PARALLEL  = int(os.environ.get("QNMLAB_PARALLEL", "1") or 1)

# Numerical tolerances
HERMITIAN_TOL = 1e-10
TRACE_TOL     = 1e-10
PSD_TOL       = 1e-10
EIG_CLAMP     = 1e-12
KRAUS_CUTOFF  = 1e-12
ISOMETRY_TOL  = 1e-10
ENTROPY_TOL   = 1e-9


def seed_override() -> int | None:
    """QNMLAB_SEED as an int, or None when unset."""
    raw = os.environ.get("QNMLAB_SEED", "").strip()
    if not raw:
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"QNMLAB_SEED must be an integer, got {raw!r}", field="QNMLAB_SEED")
