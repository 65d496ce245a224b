# models.py
import json
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import LAMBDA, MAX_ITERS, OUT_DIR, WORKERS


# ── Enums ───────────────────────────────────────────────
class Variant(str, Enum):
    AIHT     = "AIHT"
    AHTP     = "AHTP"
    ACOSAMP  = "ACoSaMP"
    ASP      = "ASP"
    RAHTP    = "RAHTP"
    RACOSAMP = "RACoSaMP"
    RASP     = "RASP"

    @classmethod
    def parse(cls, name):
        for v in cls:
            if v.value.lower() == str(name).lower():
                return v
        raise ValueError(f"Unsupported solver variant: {name}")

    @property
    def relaxed(self):
        return self in (Variant.RAHTP, Variant.RACOSAMP, Variant.RASP)


class StepRule(str, Enum):
    CONSTANT = "constant"
    OPTIMAL  = "optimal"
    ADAPTIVE = "adaptive"


class StopRule(str, Enum):
    DEFAULT  = "default"
    RESIDUAL = "residual"
    CHANGE   = "change"
    MAX_ONLY = "max_only"


class SchemeKind(str, Enum):
    AUTO         = "auto"
    THRESHOLDING = "thresholding"
    EXHAUSTIVE   = "exhaustive"
    DIF1D_DP     = "dif1d-dp"
    FUSED_DP     = "fused-lasso-dp"


# ── Solver I/O ──────────────────────────────────────────
class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    variant:         Variant    = Field(Variant.AIHT, description="pursuit variant")
    step_rule:       StepRule   = Field(StepRule.CONSTANT, description="step-size rule for AIHT/AHTP")
    mu:              Optional[float] = Field(None, description="constant step size; None means 1/||M||_2^2")
    mu_max:          float      = Field(4.0, description="upper end of the optimal-step search")
    a_fraction:      Optional[float] = Field(1.0, description="cosupport expansion factor a; None means (2l-p)/l")
    lam:             float      = Field(LAMBDA, description="penalty of the relaxed variants")
    max_iters:       int        = Field(MAX_ITERS, description="iteration cap")
    stop:            StopRule   = Field(StopRule.DEFAULT, description="stopping rule")
    residual_tol:    float      = Field(1e-6, description="stop when ||y - Mx|| <= tol * ||y||")
    change_tol:      float      = Field(1e-6, description="stop when ||x_t - x_{t-1}|| <= tol * ||x_t||")
    scheme:          SchemeKind = Field(SchemeKind.AUTO, description="cosupport selection scheme")
    cg_tol:          float      = Field(1e-10, description="relative tolerance of inner CG solves")
    cg_max_iter:     Optional[int] = Field(None, description="inner CG iteration cap")
    record_iterates: bool       = Field(False, description="keep every estimate in the result")

    @field_validator("mu", "mu_max", "lam", "cg_tol")
    @classmethod
    def _positive(cls, v):
        if v is not None and not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("a_fraction")
    @classmethod
    def _fraction(cls, v):
        if v is not None and not 0 < v <= 1:
            raise ValueError("a_fraction must lie in (0, 1]")
        return v

    @field_validator("max_iters")
    @classmethod
    def _iters(cls, v):
        if v < 1:
            raise ValueError("max_iters must be at least 1")
        return v


class MeasurementProblem(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    M: Any                    = Field(..., description="measurement matrix or LinearOperator, m x d")
    y: np.ndarray             = Field(..., description="measurements")
    x: Optional[np.ndarray]   = Field(None, description="ground-truth signal when known")
    e: Optional[np.ndarray]   = Field(None, description="noise realisation when known")

    @model_validator(mode="after")
    def _shapes(self):
        m, d = self.M.shape
        if self.y.shape != (m,):
            raise ValueError(f"y has shape {self.y.shape}, expected ({m},)")
        if self.x is not None and self.x.shape != (d,):
            raise ValueError(f"x has shape {self.x.shape}, expected ({d},)")
        return self

    @property
    def m(self):
        return self.M.shape[0]

    @property
    def d(self):
        return self.M.shape[1]


class SolverResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    variant:           str
    x_hat:             np.ndarray
    cosupport:         Any
    target_cosparsity: int
    iterations:        int
    residual_history:  List[float]
    converged:         bool
    warnings:          List[str] = Field(default_factory=list)
    iterates:          Optional[List[np.ndarray]] = None

    @model_validator(mode="after")
    def _history(self):
        if len(self.residual_history) != self.iterations + 1:
            raise ValueError("residual_history must hold iterations + 1 entries")
        return self

    def relative_error(self, x_true):
        nx = np.linalg.norm(x_true)
        err = np.linalg.norm(x_true - self.x_hat)
        return float(err / nx) if nx > 0 else float(err)

    def to_record(self, x_true=None):
        record = {
            "variant":           self.variant,
            "target_cosparsity": self.target_cosparsity,
            "iterations":        self.iterations,
            "final_residual":    self.residual_history[-1],
            "converged":         self.converged,
            "cosupport_size":    len(self.cosupport),
            "warnings":          list(self.warnings),
        }
        if x_true is not None:
            record["recovery_error"] = self.relative_error(x_true)
        return record


# ── Theory ──────────────────────────────────────────────
class RipEstimate(BaseModel):
    l:              int   = Field(..., description="cosparsity, or corank when corank=True")
    delta:          float = Field(..., description="restricted isometry constant estimate")
    mode:           str   = Field(..., description="exhaustive or sampled")
    trials:         Optional[int] = None
    seed:           Optional[int] = None
    is_lower_bound: bool  = False
    corank:         bool  = False

    @model_validator(mode="after")
    def _check(self):
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.mode == "sampled" and not self.is_lower_bound:
            raise ValueError("sampled estimates are lower bounds")
        return self

    def to_record(self):
        return self.model_dump()


class GuaranteeReport(BaseModel):
    algorithm:         str
    inputs:            Dict[str, float]
    constants:         Dict[str, Optional[float]]
    conditions:        Dict[str, bool]
    error_coefficient: Optional[float] = Field(None, description="c in ||x - x_hat|| <= c ||e||")
    notes:             List[str] = Field(default_factory=list)

    @property
    def feasible(self):
        return all(self.conditions.values())

    def to_record(self):
        """Flat key=value mapping for text output."""
        record = {"algorithm": self.algorithm, "feasible": self.feasible}
        for group in ("inputs", "constants", "conditions"):
            for key, value in getattr(self, group).items():
                record[f"{group}.{key}"] = value
        record["error_coefficient"] = self.error_coefficient
        for i, note in enumerate(self.notes):
            record[f"note.{i}"] = note
        return record


# ── Experiments ─────────────────────────────────────────
class PhaseGrid(BaseModel):
    delta_values:  List[float] = Field(..., description="sampling rates m/d, one per column")
    rho_values:    List[float] = Field(..., description="ratios (d-l)/m, one per row")
    trials:        int
    seed:          int
    recovery_rate: List[List[float]] = Field(..., description="rows follow rho_values")
    completed:     Optional[List[List[bool]]] = None

    @model_validator(mode="after")
    def _check(self):
        rate = np.asarray(self.recovery_rate, dtype=float)
        if rate.shape != (len(self.rho_values), len(self.delta_values)):
            raise ValueError("recovery_rate shape does not match the grid")
        if np.any(rate < 0) or np.any(rate > 1):
            raise ValueError("recovery rates must lie in [0, 1]")
        return self

    def as_array(self):
        return np.asarray(self.recovery_rate, dtype=float)

    def to_record(self):
        return self.model_dump()


class RunConfig(BaseModel):
    """Every CLI knob in one flat record; echoed with each run."""
    model_config = ConfigDict(extra="forbid")

    command:      str
    seed:         int   = 0
    workers:      int   = WORKERS
    out:          str   = OUT_DIR
    # operator / problem
    operator:     Optional[str] = Field(None, description="kind:dims, e.g. dif1d:201, tight:144x120, dif2d:64x64, dense:PATH")
    signal:       Optional[str] = None
    matrix:       Optional[str] = None
    measurements: Optional[str] = None
    m:            Optional[int] = None
    l:            Optional[int] = None
    noise_sigma:  float = 0.0
    # solver
    variant:      str   = "AIHT"
    step_rule:    str   = "constant"
    mu:           Optional[float] = None
    a_fraction:   Optional[float] = 1.0
    lam:          float = LAMBDA
    max_iters:    int   = MAX_ITERS
    scheme:       str   = "auto"
    # phase diagram
    grid_size:    int   = 10
    trials:       int   = 10
    frame_rows:   int   = 144
    d:            int   = 120
    # theory
    theory:       str   = "aiht"
    C_l:          float = 1.0
    C_2lp:        Optional[float] = None
    sigma_sq:     Optional[float] = None
    delta_2lp:    float = 0.1
    delta_3l2p:   Optional[float] = None
    delta_4l3p:   Optional[float] = None
    eta:          float = 100.0
    gamma:        float = 1e-3
    mu_theory:    Optional[float] = None
    sweep:        bool  = False
    # rip
    rip_mode:     str   = "exhaustive"
    # phantom
    size:         int   = 64
    lines:        int   = 15
    snr_db:       Optional[float] = None

    def to_kv(self):
        def text(value):
            if value is None:
                return "none"
            if isinstance(value, bool):
                return "true" if value else "false"
            return str(value)
        return "\n".join(f"{key}={text(value)}" for key, value in self.model_dump().items())

    def to_json(self):
        return json.dumps(self.model_dump(), sort_keys=True)


class PhantomReport(BaseModel):
    size:                  int
    lines:                 int
    measurements:          int   = Field(..., description="sampled Fourier coefficients")
    measurement_fraction:  float
    snr_db:                Optional[float] = None
    variant:               str
    target_cosparsity:     int
    true_cosparsity:       int
    iterations:            int
    converged:             bool
    relative_error:        float
    psnr:                  float
    zero_fill_relative_error: float
    zero_fill_psnr:        float

    def to_record(self):
        return self.model_dump()
