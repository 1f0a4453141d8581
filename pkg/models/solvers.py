import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Tuple

import numpy as np

from utils.run_logging import log_run

from .exceptions import ConfigError, ReconstructionError, ShapeMismatchError
from .temporal import SignalLike, TimeSignal, as_matrix, second_temporal_difference, sobolev_smoothness

logger = logging.getLogger(__name__)

CG_VARIANTS = ("residual", "classic")
MAX_RESTARTS = 5


@dataclass(frozen=True, eq=False)
class SamplingMask:
    """Binary N x M sampling matrix J"""

    mask: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.mask)
        if raw.ndim != 2:
            raise ShapeMismatchError(f"Sampling mask must be 2-D, got shape {raw.shape}")
        if not np.all((raw == 0) | (raw == 1)):
            raise ReconstructionError("Sampling mask entries must be 0 or 1")
        mask = raw.astype(bool)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_indices(cls, shape: Tuple[int, int], indices: Iterable[Tuple[int, int]]) -> "SamplingMask":
        mask = np.zeros(shape, dtype=bool)
        for i, j in indices:
            mask[i, j] = True
        return cls(mask)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mask.shape

    @property
    def sampled_indices(self) -> List[Tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self.mask)]

    @property
    def density(self) -> float:
        return float(self.mask.sum()) / self.mask.size

    @property
    def matrix(self) -> np.ndarray:
        return self.mask.astype(float)

    @property
    def mask_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.asarray(self.mask.shape, dtype=np.int64).tobytes())
        digest.update(np.packbits(self.mask).tobytes())
        return digest.hexdigest()[:16]

    def complement(self) -> np.ndarray:
        return ~self.mask

    def apply(self, x: SignalLike) -> np.ndarray:
        """J o X"""
        values = as_matrix(x)
        if values.shape != self.mask.shape:
            raise ShapeMismatchError(f"Signal shape {values.shape} does not match mask {self.mask.shape}")
        return np.where(self.mask, values, 0.0)


@dataclass(frozen=True)
class SolverConfig:
    """Regularization weight upsilon, Sobolev shift epsilon (0 = TGSR) and CG controls"""

    upsilon: float = 0.5
    epsilon: float = 0.05
    cg_tol: float = 1e-8
    cg_max_iter: int = 2000
    variant: str = "residual"

    def __post_init__(self):
        if not self.upsilon > 0:
            raise ConfigError("upsilon", f"must be positive, got {self.upsilon}")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon", f"must be nonnegative, got {self.epsilon}")
        if not self.cg_tol > 0:
            raise ConfigError("cg_tol", f"must be positive, got {self.cg_tol}")
        if int(self.cg_max_iter) < 1:
            raise ConfigError("cg_max_iter", f"must be at least 1, got {self.cg_max_iter}")
        if self.variant not in CG_VARIANTS:
            raise ConfigError("variant", f"must be one of {', '.join(CG_VARIANTS)}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown solver parameter")
        return cls(**data)


@dataclass
class SolveResult:
    signal: TimeSignal
    iterations: int
    final_residual: float
    converged: bool
    residual_history: List[float] = field(default_factory=list)

    def __iter__(self):
        return iter((self.signal, self.iterations, self.final_residual))


def _check_shapes(x: np.ndarray, mask: SamplingMask, L: np.ndarray):
    if x.shape != mask.shape:
        raise ShapeMismatchError(f"Signal shape {x.shape} does not match mask {mask.shape}")
    if L.shape != (x.shape[0], x.shape[0]):
        raise ShapeMismatchError(f"Laplacian shape {L.shape} does not match {x.shape[0]} nodes")


def recon_operator(x_tilde: SignalLike, mask: SamplingMask, L, cfg: SolverConfig) -> np.ndarray:
    """A(X) = J o X + upsilon (L + eps I) X D_h D_h^T"""
    values = as_matrix(x_tilde)
    laplacian = np.asarray(L, dtype=float)
    _check_shapes(values, mask, laplacian)
    stencil = second_temporal_difference(values)
    smooth = laplacian @ stencil + cfg.epsilon * stencil
    return np.where(mask.mask, values, 0.0) + cfg.upsilon * smooth


def objective_value(x_tilde: SignalLike, observed: SignalLike, mask: SamplingMask, L, cfg: SolverConfig) -> float:
    """(1/2)||J o X - Y||_F^2 + (upsilon/2) * Sobolev smoothness of X"""
    values = as_matrix(x_tilde)
    target = as_matrix(observed)
    laplacian = np.asarray(L, dtype=float)
    _check_shapes(values, mask, laplacian)
    if target.shape != values.shape:
        raise ShapeMismatchError(f"Observed shape {target.shape} does not match {values.shape}")
    fit = mask.apply(values) - target
    return 0.5 * float(np.sum(fit * fit)) + 0.5 * cfg.upsilon * sobolev_smoothness(values, laplacian, cfg.epsilon)


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b))


def _solve_summary(result: SolveResult) -> Dict[str, Any]:
    return {"iterations": result.iterations, "residual": f"{result.final_residual:.3e}",
            "converged": result.converged}


@log_run(level=logging.DEBUG, summary=_solve_summary)
def solve(observed: SignalLike, mask: SamplingMask, L, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Minimize the TGSR objective (GraphTRSS when epsilon > 0) by Krylov iteration from X0 = Y

    The "residual" variant is conjugate residuals (monotone residual norm for symmetric
    operators); "classic" is Hestenes-Stiefel conjugate gradients.
    """
    target = as_matrix(observed)
    laplacian = np.asarray(L, dtype=float)
    _check_shapes(target, mask, laplacian)
    if np.any(target[~mask.mask] != 0):
        raise ReconstructionError("Observations must be zero outside the sampling mask")

    def apply(x):
        return recon_operator(x, mask, laplacian, cfg)

    b_norm = float(np.linalg.norm(target))
    if b_norm == 0.0:
        return SolveResult(TimeSignal(np.zeros_like(target)), 0, 0.0, True, [0.0])

    x = target.copy()
    r = target - apply(x)
    final_residual = float(np.linalg.norm(r)) / b_norm
    history = [final_residual]
    iterations = 0
    # restarts from the true residual absorb drift of the recursively updated one
    for _ in range(MAX_RESTARTS + 1):
        if final_residual < cfg.cg_tol or iterations >= cfg.cg_max_iter:
            break
        budget = cfg.cg_max_iter - iterations
        if cfg.variant == "residual":
            steps = _conjugate_residual(apply, x, r, b_norm, cfg.cg_tol, budget, history)
        else:
            steps = _conjugate_gradient(apply, x, r, b_norm, cfg.cg_tol, budget, history)
        iterations += steps
        r = target - apply(x)
        final_residual = float(np.linalg.norm(r)) / b_norm
        if steps == 0:
            break

    converged = final_residual < cfg.cg_tol
    if not converged:
        logger.warning("Solver stopped after %d iterations with relative residual %.3e (tol %.1e)",
                       iterations, final_residual, cfg.cg_tol)
    return SolveResult(TimeSignal(x), iterations, final_residual, converged, history)


def _conjugate_residual(apply, x, r, b_norm, tol, budget, history) -> int:
    """Conjugate residual sweeps, updating x and r in place; returns the step count"""
    p = r.copy()
    ar = apply(r)
    ap = ar.copy()
    rho = _inner(r, ar)
    steps = 0
    while steps < budget:
        denom = _inner(ap, ap)
        if denom <= 0.0 or rho == 0.0:
            break
        alpha = rho / denom
        x += alpha * p
        r -= alpha * ap
        steps += 1
        history.append(float(np.linalg.norm(r)) / b_norm)
        if history[-1] < tol:
            break
        ar = apply(r)
        rho_next = _inner(r, ar)
        p *= rho_next / rho
        p += r
        ap *= rho_next / rho
        ap += ar
        rho = rho_next
    return steps


def _conjugate_gradient(apply, x, r, b_norm, tol, budget, history) -> int:
    """Hestenes-Stiefel conjugate gradients, updating x and r in place"""
    p = r.copy()
    rr = _inner(r, r)
    steps = 0
    while steps < budget:
        ap = apply(p)
        curvature = _inner(p, ap)
        if curvature <= 0.0:
            break
        alpha = rr / curvature
        x += alpha * p
        r -= alpha * ap
        steps += 1
        history.append(float(np.linalg.norm(r)) / b_norm)
        if history[-1] < tol:
            break
        rr_next = _inner(r, r)
        p *= rr_next / rr
        p += r
        rr = rr_next
    return steps
