"""Two-stage fitting: coarse parameter recovery by Adam on the weighted
shape objective, then bump-map detail recovery by Adam on the geometry loss.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .bump import BumpMap, bump_from_depths, geo_loss, geo_loss_grad
from .errors import EmptySurfaceError, NumericRangeError, UnconstrainedFitError
from .lighting import UNIFORM_GAMMA0
from .losses import LossWeights
from .morphable import FaceParams
from .objective import CoarseObjective


@dataclass
class AdamState:
    """First/second moment accumulators of the Adam update."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    alpha: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def init(n, alpha=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        return AdamState(np.zeros(n), np.zeros(n), 0, alpha, beta1, beta2, eps)


def adam_step(state, params, grad):
    """One bias-corrected Adam update; returns the new (state, params)."""
    grad = np.asarray(grad, dtype=float)
    params = np.asarray(params, dtype=float)
    if grad.shape != params.shape or grad.shape != state.m.shape:
        raise ValueError("gradient/parameter shape mismatch")
    if not np.isfinite(grad).all():
        bad = int(np.argwhere(~np.isfinite(grad))[0, 0])
        raise NumericRangeError(f"non-finite gradient at index {bad}")
    t = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad ** 2
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    new_params = params - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.alpha, state.beta1, state.beta2,
                          state.eps)
    return new_state, new_params


@dataclass
class FitConfig:
    """Optimization settings for both stages."""

    max_iters: int = 2000
    tol: float = 1e-6
    tol_window: int = 20
    lr_coarse: float = 0.01
    lr_detail: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    delta_max: float = None  # default: 2% of the face depth extent
    grad_norm_tol: float = 1e-8

    _FLOAT_KEYS = ("tol", "lr_coarse", "lr_detail", "beta1", "beta2", "eps",
                   "delta_max", "grad_norm_tol")
    _INT_KEYS = ("max_iters", "tol_window")

    @staticmethod
    def from_mapping(mapping):
        cfg = FitConfig()
        for key, val in mapping.items():
            if key in FitConfig._INT_KEYS:
                setattr(cfg, key, int(val))
            elif key in FitConfig._FLOAT_KEYS:
                setattr(cfg, key, float(val))
        return cfg


@dataclass
class FitReport:
    """Per-iteration loss history plus the fit outputs."""

    stage: str
    history: list = field(default_factory=list)
    final_params: FaceParams = None
    final_bump: BumpMap = None
    wall_time: float = 0.0
    termination: str = ""
    saturated_pixels: int = 0

    @property
    def iterations(self):
        return len(self.history)

    def record(self, **row):
        self.history.append(row)


def _converged(history, window, tol):
    if len(history) < window + 1:
        return False
    new = history[-1]["total"]
    old = history[-1 - window]["total"]
    return abs(new - old) <= tol * max(abs(old), 1e-12)


def fit_coarse(image, landmarks, visibility, model, weights=None, config=None,
               init_params=None, embedder=None):
    """Minimize the weighted shape objective over the parameter vector.

    Starts from zero coefficients at the given (or frontal) initial pose and
    returns a FitReport with the loss history and the recovered parameters.
    """
    weights = weights if weights is not None else LossWeights()
    config = config if config is not None else FitConfig()
    image = np.asarray(image, dtype=float)
    if visibility is None:
        visibility = np.ones(image.shape[:2], dtype=bool)
    visibility = np.asarray(visibility, dtype=bool)
    if visibility.shape != image.shape[:2]:
        raise ValueError("visibility mask must match the image")

    if init_params is None:
        init_params = default_init_params(model, image.shape[1], image.shape[0])
    tz = float(init_params.pose.t2d[2])
    obj = CoarseObjective(model, image, visibility=visibility,
                          landmarks=landmarks, weights=weights,
                          embedder=embedder, tz=tz)

    if (not visibility.any() and weights.lambda_phot > 0
            and weights.lambda_land == 0):
        raise UnconstrainedFitError(
            "no visible pixel and no landmark term: fit is unconstrained")

    vec = init_params.to_vector()
    state = AdamState.init(vec.size, alpha=config.lr_coarse,
                           beta1=config.beta1, beta2=config.beta2,
                           eps=config.eps)
    report = FitReport(stage="coarse")
    start = time.perf_counter()
    for it in range(config.max_iters):
        total, comps, grad = obj.evaluate(vec)
        gnorm = float(np.linalg.norm(grad))
        report.record(iteration=it, total=total, feat=comps["feat"],
                      regu=comps["regu"], phot=comps["phot"],
                      land=comps["land"], grad_norm=gnorm)
        if gnorm < config.grad_norm_tol:
            report.termination = "stationary"
            break
        if _converged(report.history, config.tol_window, config.tol):
            report.termination = "converged"
            break
        state, vec = adam_step(state, vec, grad)
    else:
        report.termination = "max_iterations"
    report.wall_time = time.perf_counter() - start
    report.final_params = FaceParams.from_vector(vec, model, tz=tz)
    return report


def default_init_params(model, width, height):
    """Frontal zero-coefficient start: face centered and scaled to the frame."""
    from .camera import Pose

    verts = model.mean_shape.reshape(-1, 3)
    extent = float((verts.max(axis=0) - verts.min(axis=0)).max())
    f = 0.35 * min(width, height) / max(extent / 2.0, 1e-9)
    depth_offset = float(verts[:, 2].max() - verts[:, 2].min()) * 2 + 1.0
    pose = Pose(0.0, 0.0, 0.0, f=f,
                t2d=np.array([width / 2.0, height / 2.0, depth_offset]))
    gamma = np.zeros(9)
    gamma[0] = UNIFORM_GAMMA0
    return FaceParams.zeros(model, gamma=gamma, pose=pose)


def fit_detail(base_depth, target_depth_signal, coverage=None, config=None):
    """Recover bump codes matching an externally supplied detail depth signal.

    Minimizes the geometry loss between the evolving bump map and the bump
    map implied by (target - base) on covered pixels.  Returns
    (BumpMap, FitReport).
    """
    config = config if config is not None else FitConfig()
    base = base_depth.depth if hasattr(base_depth, "depth") else np.asarray(base_depth, float)
    target = (target_depth_signal.depth if hasattr(target_depth_signal, "depth")
              else np.asarray(target_depth_signal, float))
    if base.shape != target.shape:
        raise ValueError("base and target depth maps must share dimensions")
    if coverage is None:
        coverage = np.isfinite(base) & np.isfinite(target)
    coverage = np.asarray(coverage, dtype=bool)
    if not coverage.any():
        raise EmptySurfaceError("empty coverage: nothing to refine")

    delta_max = config.delta_max
    if delta_max is None:
        span = float(base[coverage].max() - base[coverage].min())
        delta_max = max(0.02 * span, 1e-6)

    truth = bump_from_depths(target, base, coverage, delta_max)
    codes = np.full(base.shape, 128.0)
    flat = codes[coverage]
    truth_flat = truth.codes[coverage]

    state = AdamState.init(flat.size, alpha=config.lr_detail,
                           beta1=config.beta1, beta2=config.beta2,
                           eps=config.eps)
    report = FitReport(stage="detail")
    start = time.perf_counter()
    for it in range(config.max_iters):
        codes[coverage] = flat
        est = BumpMap(np.clip(codes, 0.0, 255.0), delta_max)
        loss = geo_loss(est, truth)
        grad_full = geo_loss_grad(est, truth)
        grad = grad_full[coverage]
        gnorm = float(np.linalg.norm(grad))
        report.record(iteration=it, total=loss, grad_norm=gnorm)
        if loss == 0.0 or gnorm < config.grad_norm_tol:
            report.termination = "stationary"
            break
        if _converged(report.history, config.tol_window, config.tol):
            report.termination = "converged"
            break
        state, flat = adam_step(state, flat, grad)
        flat = np.clip(flat, 0.0, 255.0)
    else:
        report.termination = "max_iterations"
    report.wall_time = time.perf_counter() - start

    codes[coverage] = flat
    bump = BumpMap(np.clip(codes, 0.0, 255.0), delta_max)
    sat = int(np.sum((bump.codes[coverage] <= 0.0)
                     | (bump.codes[coverage] >= 255.0)))
    report.saturated_pixels = sat
    report.final_bump = bump
    return bump, report
