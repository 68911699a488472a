# Configuration settings
import copy
import os
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

from dotenv import load_dotenv
from loguru import logger

load_dotenv()


class Config:
    """Laboratory configuration"""

    # Numerical tolerances
    ALGEBRA_TOL = float(os.getenv("NSIT_ALGEBRA_TOL", 1e-12))
    DECOMPOSITION_TOL = float(os.getenv("NSIT_DECOMPOSITION_TOL", 1e-9))
    OPTIMIZER_TOL = float(os.getenv("NSIT_OPTIMIZER_TOL", 1e-6))
    CHANNEL_TOL = float(os.getenv("NSIT_CHANNEL_TOL", 1e-10))
    TIE_TOLERANCE = float(os.getenv("NSIT_TIE_TOLERANCE", 1e-10))
    KRAUS_DROP_TOL = float(os.getenv("NSIT_KRAUS_DROP_TOL", 1e-12))
    IQ_TOL = float(os.getenv("NSIT_IQ_TOL", 1e-10))
    PARTIAL_SUM_TOL = float(os.getenv("NSIT_PARTIAL_SUM_TOL", 1e-9))

    # Dimension caps (dense algebra only)
    MAX_DIM_S = int(os.getenv("NSIT_MAX_DIM_S", 8))
    MAX_DIM_E = int(os.getenv("NSIT_MAX_DIM_E", 8))
    MAX_JOINT_DIM = int(os.getenv("NSIT_MAX_JOINT_DIM", 64))

    # Pure-state search
    SEARCH_RESTARTS = int(os.getenv("NSIT_SEARCH_RESTARTS", 64))
    SEARCH_MAX_ITERS = int(os.getenv("NSIT_SEARCH_MAX_ITERS", 4000))
    SEARCH_STEP_INIT = float(os.getenv("NSIT_SEARCH_STEP_INIT", 0.5))
    SEARCH_STEP_TOL = float(os.getenv("NSIT_SEARCH_STEP_TOL", 1e-6))
    SEARCH_DECAY = float(os.getenv("NSIT_SEARCH_DECAY", 0.7))
    SEARCH_PATIENCE = int(os.getenv("NSIT_SEARCH_PATIENCE", 10))

    DEFAULT_SEED = int(os.getenv("NSIT_SEED", 0))
    N_JOBS = int(os.getenv("NSIT_N_JOBS", 1))

    # Acceptance-suite sample counts
    VERIFY_RANDOM_SCENARIOS = int(os.getenv("NSIT_VERIFY_RANDOM_SCENARIOS", 500))
    VERIFY_PROP1_SCENARIOS = int(os.getenv("NSIT_VERIFY_PROP1_SCENARIOS", 100))
    VERIFY_PROP1_RESTARTS = int(os.getenv("NSIT_VERIFY_PROP1_RESTARTS", 4))
    VERIFY_PROP1_MAX_ITERS = int(os.getenv("NSIT_VERIFY_PROP1_MAX_ITERS", 1000))
    VERIFY_PROP1_STEP_TOL = float(os.getenv("NSIT_VERIFY_PROP1_STEP_TOL", 1e-5))
    VERIFY_IQ_SAMPLES = int(os.getenv("NSIT_VERIFY_IQ_SAMPLES", 200))
    VERIFY_BORN_SAMPLES = int(os.getenv("NSIT_VERIFY_BORN_SAMPLES", 50))
    VERIFY_MIXTURES = int(os.getenv("NSIT_VERIFY_MIXTURES", 500))
    VERIFY_COMPLEMENT_SAMPLES = int(os.getenv("NSIT_VERIFY_COMPLEMENT_SAMPLES", 200))

    SCHEMA_VERSION = 1
    LOG_LEVEL = os.getenv("NSIT_LOG_LEVEL", "WARNING")

    # names accepted by --tolerance name=value
    TOLERANCE_NAMES = (
        "ALGEBRA_TOL", "DECOMPOSITION_TOL", "OPTIMIZER_TOL", "CHANNEL_TOL",
        "TIE_TOLERANCE", "KRAUS_DROP_TOL", "IQ_TOL", "PARTIAL_SUM_TOL",
    )

    def with_overrides(self, **values: Any) -> "Config":
        """Copy of this configuration with some attributes replaced"""
        clone = copy.copy(self)
        for name, value in values.items():
            key = name.upper()
            if not hasattr(self, key) or key.startswith("_"):
                raise KeyError(f"Unknown configuration entry: {name}")
            current = getattr(self, key)
            setattr(clone, key, type(current)(value) if current is not None else value)
        return clone

    def get_search_config(self, restarts: int = None, seed: int = None):
        """Get optimizer configuration as a SearchConfig"""
        from optimize import SearchConfig

        return SearchConfig(
            restarts=restarts or self.SEARCH_RESTARTS,
            max_iters=self.SEARCH_MAX_ITERS,
            step_init=self.SEARCH_STEP_INIT,
            tol=self.SEARCH_STEP_TOL,
            seed=self.DEFAULT_SEED if seed is None else seed,
            decay=self.SEARCH_DECAY,
            patience=self.SEARCH_PATIENCE,
            n_jobs=self.N_JOBS,
        )

    def get_tolerances(self) -> Dict[str, float]:
        """Get tolerance settings as dictionary"""
        return {name.lower(): getattr(self, name) for name in self.TOLERANCE_NAMES}

    def validate_config(self) -> bool:
        """Validate configuration settings"""
        try:
            for name in self.TOLERANCE_NAMES:
                assert getattr(self, name) > 0, f"{name} must be positive"
            assert self.MAX_DIM_S > 0 and self.MAX_DIM_E > 0, "Dimension caps must be positive"
            assert self.MAX_JOINT_DIM >= max(self.MAX_DIM_S, self.MAX_DIM_E), "Joint cap below factor caps"
            assert self.SEARCH_RESTARTS >= 1, "At least one restart required"
            assert 0 < self.SEARCH_DECAY < 1, "Step decay must lie in (0, 1)"
            assert self.SEARCH_STEP_INIT > self.SEARCH_STEP_TOL, "Initial step below stopping tolerance"
            assert self.VERIFY_PROP1_MAX_ITERS >= 1 and self.VERIFY_PROP1_STEP_TOL > 0, "Invalid measurement-map sweep schedule"
            return True
        except AssertionError as e:
            logger.error(f"Configuration validation error: {e}")
            return False


# Environment-specific configurations
class DevelopmentConfig(Config):
    """Development environment configuration"""
    LOG_LEVEL = os.getenv("NSIT_LOG_LEVEL", "INFO")


class ProductionConfig(Config):
    """Full acceptance-suite configuration"""
    LOG_LEVEL = os.getenv("NSIT_LOG_LEVEL", "WARNING")


class TestingConfig(Config):
    """Testing environment configuration"""
    SEARCH_RESTARTS = 16
    VERIFY_RANDOM_SCENARIOS = 40
    VERIFY_PROP1_SCENARIOS = 5
    VERIFY_PROP1_RESTARTS = 4
    VERIFY_IQ_SAMPLES = 40
    VERIFY_BORN_SAMPLES = 10
    VERIFY_MIXTURES = 50
    VERIFY_COMPLEMENT_SAMPLES = 40


# Configuration factory
_active: Optional[Config] = None


def get_config() -> Config:
    """Get the process-wide configuration, chosen once from NSIT_ENVIRONMENT"""
    global _active
    if _active is None:
        env = os.getenv("NSIT_ENVIRONMENT", "production").lower()
        if env == "development":
            _active = DevelopmentConfig()
        elif env == "testing":
            _active = TestingConfig()
        else:
            _active = ProductionConfig()
    return _active


@contextmanager
def overridden(**values: Any) -> Iterator[Config]:
    """Temporarily replace entries of the shared configuration (e.g. --tolerance flags)"""
    active = get_config()
    patched = active.with_overrides(**values)
    saved = dict(vars(active))
    for name in values:
        setattr(active, name.upper(), getattr(patched, name.upper()))
    try:
        yield active
    finally:
        for name in values:
            key = name.upper()
            if key in saved:
                setattr(active, key, saved[key])
            else:
                delattr(active, key)
