from pathlib import Path
from typing import List

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Project
    PROJECT_NAME: str = "noether-bench"
    VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"

    # Output
    OUTPUT_DIR: Path = Path("runs")
    DEFAULT_JOBS: int = 1
    DEFAULT_SEED: int = 20140101

    # Pointwise identities and trajectory drifts
    TOL_IDENTITY: float = 1e-8
    TOL_DRIFT: float = 1e-8
    TOL_GAUGE_DRIFT: float = 1e-6
    TOL_INVARIANCE: float = 1e-10
    TOL_EQUIVALENCE: float = 1e-9
    TOL_BRACKET: float = 1e-9
    TOL_GENERALIZED: float = 1e-9
    CHECK_SAMPLES: int = 501

    # Constrained manifold
    TOL_MEMBERSHIP: float = 1e-8
    TOL_MANIFOLD: float = 1e-10
    TOL_INITIAL: float = 1e-6
    TOL_PROJECTION: float = 1e-12
    NEWTON_MAX_ITER: int = 5
    CONDITION_LIMIT: float = 1e12
    RANK_RATIO: float = 1e-8

    # Sampling over admissible momenta
    MEMBERSHIP_SAMPLES: int = 64
    MEMBERSHIP_RADIUS: float = 10.0
    INVARIANCE_STATES: int = 100
    SUBSET_DIRECTIONS: int = 20
    CLOSEDNESS_POINTS: int = 200
    TOL_CLOSED: float = 1e-10

    # Finite-difference multiplier oracle
    ORACLE_STEP: float = 1e-6
    TOL_ORACLE: float = 1e-5
    ORACLE_STATES: int = 100

    # Annihilator sampling along trajectories
    ANNIHILATOR_STATES: int = 20

    # Convergence order of the integrator
    EXPECTED_ORDER: float = 4.0
    TOL_ORDER: float = 0.2
    ORDER_STEPS: List[float] = [0.02, 0.01, 0.005]
    ORDER_HORIZON: float = 0.5
    ORDER_REFERENCE_FACTOR: int = 8

    class Config:
        env_file = ".env"
        env_prefix = "NOETHER_"


settings = Settings()


def get_settings() -> Settings:
    """Get settings instance"""
    return settings
