"""ADMM for the Poisson/AITV smoothing model.

The model is::

    min_u  lam <Au - f log Au, 1> + mu/2 ||grad u||^2 + R(grad u)

with ``R(p) = ||p||_1 - alpha ||p||_{2,1}`` (``mode='aitv'``) or
``R(p) = ||p||_{2,1}`` (``mode='iso'``, plain TV). It is split as ``v = Au``,
``w = grad u`` and solved with a penalty ``beta_k = beta0 * sigma**k`` shared
by both constraints.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .errors import DataError, DomainError, NumericalError, ParameterError
from .grid import as_image, check_alpha, divergence_adjoint, gradient, inner, norm_l1, norm_l21
from .prox import prox_field
from .spectral import ConvKernel, kernel_spectrum, laplacian_spectrum

__all__ = [
    "AdmmConfig",
    "AdmmState",
    "OperatorSpectra",
    "StationarityReport",
    "SmoothResult",
    "TRACE_FIELDS",
    "solve_u",
    "solve_v",
    "solve_w",
    "update_multipliers",
    "initial_state",
    "admm_smooth",
    "augmented_lagrangian",
    "stationarity_residuals",
    "linear_residual",
    "trace_to_csv",
]

log = logging.getLogger(__name__)

TRACE_FIELDS = ("k", "rel_err", "res_Au_v", "res_grad_w", "lagrangian", "energy")
DENOM_FLOOR = 1e-14


@dataclass(frozen=True)
class AdmmConfig:
    """Model weights and ADMM controls.

    ``check_every > 0`` evaluates the residual of the u-subproblem linear
    system every that many iterations and stores it in the trace.
    """

    lam: float
    mu: float
    alpha: float = 0.0
    beta0: float = 1.0
    sigma: float = 1.25
    eps: float = 1e-4
    max_iter: int = 300
    mode: str = "aitv"
    record_trace: bool = False
    check_every: int = 0
    f_floor: float = 1e-8

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"lam must be positive, got {self.lam}")
        if not self.mu >= 0:
            raise ParameterError(f"mu must be nonnegative, got {self.mu}")
        check_alpha(self.alpha)
        if not self.beta0 > 0:
            raise ParameterError(f"beta0 must be positive, got {self.beta0}")
        if not self.sigma > 1:
            raise ParameterError(f"sigma must exceed 1, got {self.sigma}")
        if not self.eps > 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if int(self.max_iter) < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.mode not in ("aitv", "iso"):
            raise ParameterError(f"mode must be 'aitv' or 'iso', got {self.mode!r}")
        if not self.f_floor > 0:
            raise ParameterError("f_floor must be positive")

    def beta_at(self, k: int) -> float:
        return self.beta0 * self.sigma ** int(k)

    def regularizer(self, p) -> float:
        if self.mode == "iso":
            return norm_l21(p)
        return norm_l1(p) - self.alpha * norm_l21(p)


@dataclass(frozen=True)
class AdmmState:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    y: np.ndarray
    z: np.ndarray
    beta: float
    k: int = 0
    rel_err: float = math.inf


@dataclass(frozen=True)
class OperatorSpectra:
    """Half-plane DFT multipliers of the blur and Laplacian on one grid."""

    shape: tuple
    blur_half: np.ndarray
    blur_abs2: np.ndarray
    lap_half: np.ndarray
    identity: bool

    @classmethod
    def build(cls, blur: ConvKernel, shape) -> "OperatorSpectra":
        M, N = shape
        spec = kernel_spectrum(blur, M, N)
        dc = spec.dc
        if abs(dc) <= 1e-12:
            raise DataError(
                f"blur has zero DC gain ({dc:.3g}); ker(A) and ker(grad) intersect nontrivially"
            )
        half = np.ascontiguousarray(spec.half())
        identity = blur.taps.shape == (1, 1) and blur.taps[0, 0] == 1.0
        return cls(
            shape=(M, N),
            blur_half=half,
            blur_abs2=np.abs(half) ** 2,
            lap_half=np.ascontiguousarray(laplacian_spectrum(M, N).half().real),
            identity=identity,
        )

    def rfft(self, a):
        return sfft.rfft2(a)

    def irfft(self, a_hat):
        return sfft.irfft2(a_hat, s=self.shape)

    def apply(self, u):
        if self.identity:
            return np.array(u, dtype=np.float64, copy=True)
        return self.irfft(self.blur_half * self.rfft(u))

    def apply_t(self, u):
        if self.identity:
            return np.array(u, dtype=np.float64, copy=True)
        return self.irfft(np.conj(self.blur_half) * self.rfft(u))


@dataclass(frozen=True)
class StationarityReport:
    """Residual norms of the limit-point conditions and the scales used to normalise them.

    ``scaled()`` divides each residual by one plus the norms of the terms it
    balances, so every entry is dimensionless.
    """

    r_u: float
    r_v: float
    r_w: float
    r_Au_v: float
    r_grad_w: float
    scale_u: float = 1.0
    scale_v: float = 1.0
    scale_w: float = 1.0
    scale_Au_v: float = 1.0
    scale_grad_w: float = 1.0

    def scaled(self) -> dict:
        return {
            "r_u": self.r_u / self.scale_u,
            "r_v": self.r_v / self.scale_v,
            "r_w": self.r_w / self.scale_w,
            "r_Au_v": self.r_Au_v / self.scale_Au_v,
            "r_grad_w": self.r_grad_w / self.scale_grad_w,
        }

    def raw(self) -> dict:
        return {
            "r_u": self.r_u,
            "r_v": self.r_v,
            "r_w": self.r_w,
            "r_Au_v": self.r_Au_v,
            "r_grad_w": self.r_grad_w,
        }


@dataclass
class SmoothResult:
    u: np.ndarray
    state: AdmmState
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)

    def trace_csv(self) -> str:
        return trace_to_csv(self.trace)


def _denominator(spectra: OperatorSpectra, beta: float, mu: float) -> np.ndarray:
    den = beta * spectra.blur_abs2 - (mu + beta) * spectra.lap_half
    small = np.abs(den) < DENOM_FLOOR
    if small.any():
        p, q = np.argwhere(small)[0]
        raise NumericalError(
            f"u-subproblem is ill-posed: denominator {den[p, q]:.3g} at frequency ({p}, {q})"
        )
    return den


def _solve_u_hat(v, w, y, z, beta, spectra: OperatorSpectra, mu):
    div = divergence_adjoint(z - beta * w)
    if spectra.identity:
        rhs_hat = spectra.rfft(beta * v - y - div)
    else:
        rhs_hat = np.conj(spectra.blur_half) * spectra.rfft(beta * v - y) - spectra.rfft(div)
    u_hat = rhs_hat / _denominator(spectra, beta, mu)
    return spectra.irfft(u_hat), u_hat


def solve_u(v, w, y, z, beta: float, spectra: OperatorSpectra, mu: float) -> np.ndarray:
    """Exact u-update: solve ``[beta A'A - (mu + beta) Lap] u = A'(beta v - y) - grad'(z - beta w)``."""
    return _solve_u_hat(v, w, y, z, beta, spectra, mu)[0]


def linear_residual(u, v, w, y, z, beta, spectra: OperatorSpectra, mu) -> float:
    """Relative residual ``||lhs(u) - rhs|| / ||rhs||`` of the u-subproblem system, in image space."""
    lhs = beta * spectra.apply_t(spectra.apply(u)) + (mu + beta) * divergence_adjoint(gradient(u))
    rhs = spectra.apply_t(beta * v - y) - divergence_adjoint(z - beta * w)
    nr = float(np.linalg.norm(rhs))
    return float(np.linalg.norm(lhs - rhs)) / (nr if nr > 0 else 1.0)


def solve_v(Au, y, f, beta: float, lam: float) -> np.ndarray:
    """Closed-form v-update, the positive root of ``beta v^2 - t v - lam f = 0``.

    ``t = beta Au + y - lam``. Where ``t < 0`` the algebraically equal form
    ``2 lam f / (sqrt(t^2 + 4 lam beta f) - t)`` avoids cancellation.
    """
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise DataError("f must be nonnegative for the v-update")
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    t = beta * np.asarray(Au) + np.asarray(y) - lam
    s = np.sqrt(t * t + 4.0 * lam * beta * f)
    pos = t >= 0
    den = np.where(pos, 1.0, s - t)
    den = np.where(den > 0, den, 1.0)
    return np.where(pos, (t + s) / (2.0 * beta), 2.0 * lam * f / den)


def solve_w(grad_u, z, beta: float, alpha: float, mode: str = "aitv") -> np.ndarray:
    """Per-pixel prox of ``grad u + z / beta`` with step ``1 / beta``."""
    return prox_field(grad_u + z / beta, alpha, 1.0 / beta, mode)


def update_multipliers(state: AdmmState, config: AdmmConfig, Au, grad_u) -> AdmmState:
    """Dual ascent on both constraints, then grow the penalty geometrically."""
    beta = state.beta
    k = state.k + 1
    return replace(
        state,
        y=state.y + beta * (Au - state.v),
        z=state.z + beta * (grad_u - state.w),
        beta=config.beta_at(k),
        k=k,
    )


def initial_state(f, spectra: OperatorSpectra, config: AdmmConfig) -> AdmmState:
    u = np.array(f, dtype=np.float64, copy=True)
    return AdmmState(
        u=u,
        v=spectra.apply(u),
        w=gradient(u),
        y=np.zeros_like(u),
        z=np.zeros((2,) + u.shape),
        beta=config.beta0,
        k=0,
        rel_err=math.inf,
    )


def _prepare_f(f, config: AdmmConfig):
    f = as_image(f, "f")
    if np.any(f < 0):
        raise DataError("observed image f must be nonnegative")
    return np.maximum(f, config.f_floor)


def augmented_lagrangian(state: AdmmState, config: AdmmConfig, f, spectra: OperatorSpectra) -> float:
    """Augmented Lagrangian at ``state`` with both penalties equal to ``state.beta``."""
    v = state.v
    if np.any(v <= 0):
        raise DomainError("augmented Lagrangian needs v > 0 everywhere")
    f = np.asarray(f, dtype=np.float64)
    Au = spectra.apply(state.u)
    gu = gradient(state.u)
    r1 = Au - v
    r2 = gu - state.w
    b = state.beta
    return (
        config.lam * float(np.sum(v - f * np.log(v)))
        + 0.5 * config.mu * float(np.square(gu).sum())
        + config.regularizer(state.w)
        + inner(state.y, r1)
        + 0.5 * b * float(np.square(r1).sum())
        + inner(state.z, r2)
        + 0.5 * b * float(np.square(r2).sum())
    )


def _model_energy(u, Au, f, config: AdmmConfig) -> float:
    if np.any(Au <= 0):
        return math.nan
    gu = gradient(u)
    return (
        config.lam * float(np.sum(Au - f * np.log(Au)))
        + 0.5 * config.mu * float(np.square(gu).sum())
        + config.regularizer(gu)
    )


def _subgradient_distance(z, w, alpha, mode):
    """Per-pixel distance from ``z`` to the subdifferential of the regulariser at ``w``."""
    wx, wy = w[0], w[1]
    zx, zy = z[0], z[1]
    nw = np.hypot(wx, wy)
    nz = nw > 0
    safe = np.where(nz, nw, 1.0)
    if mode == "iso":
        d_nz = np.hypot(zx - wx / safe, zy - wy / safe)
        d_z = np.maximum(np.hypot(zx, zy) - 1.0, 0.0)
        return np.where(nz, d_nz, d_z)

    # w != 0: z + alpha w/|w| must lie in the l1 subdifferential
    tx = zx + alpha * wx / safe
    ty = zy + alpha * wy / safe

    def comp(t, wc):
        return np.where(wc != 0, np.abs(t - np.sign(wc)), np.maximum(np.abs(t) - 1.0, 0.0))

    d_nz = np.hypot(comp(tx, wx), comp(ty, wy))
    # w == 0: the set is the unit box dilated by an alpha-ball
    box = np.hypot(np.maximum(np.abs(zx) - 1.0, 0.0), np.maximum(np.abs(zy) - 1.0, 0.0))
    d_z = np.maximum(box - alpha, 0.0)
    return np.where(nz, d_nz, d_z)


def stationarity_residuals(
    state: AdmmState, config: AdmmConfig, f, spectra: OperatorSpectra
) -> StationarityReport:
    """Norms of how far ``state`` is from a stationary point of the split problem.

    ``r_u``: ``-mu Lap u + A'y + grad'z``; ``r_v``: ``lam (1 - f/v) - y``;
    ``r_w``: distance of ``z`` to the regulariser's subdifferential at ``w``;
    ``r_Au_v`` and ``r_grad_w``: the two constraint violations.
    """
    u, v, w, y, z = state.u, state.v, state.w, state.y, state.z
    if np.any(v <= 0):
        raise DomainError("stationarity residuals need v > 0 everywhere")
    f = np.asarray(f, dtype=np.float64)
    Au = spectra.apply(u)
    gu = gradient(u)

    t_lap = config.mu * divergence_adjoint(gu)
    t_y = spectra.apply_t(y)
    t_z = divergence_adjoint(z)
    t_fid = config.lam * (1.0 - f / v)
    dist = _subgradient_distance(z, w, config.alpha, config.mode)

    nrm = np.linalg.norm
    return StationarityReport(
        r_u=float(nrm(t_lap + t_y + t_z)),
        r_v=float(nrm(t_fid - y)),
        r_w=float(np.sqrt(np.square(dist).sum())),
        r_Au_v=float(nrm(Au - v)),
        r_grad_w=float(nrm(gu - w)),
        scale_u=1.0 + float(nrm(t_lap) + nrm(t_y) + nrm(t_z)),
        scale_v=1.0 + float(nrm(t_fid) + nrm(y)),
        scale_w=1.0 + float(nrm(z)),
        scale_Au_v=1.0 + float(nrm(Au) + nrm(v)),
        scale_grad_w=1.0 + float(nrm(gu) + nrm(w)),
    )


def admm_smooth(f, blur: ConvKernel, config: AdmmConfig) -> SmoothResult:
    """Run the ADMM iteration until the relative change of u drops below ``eps``.

    ``f`` is clamped below at ``config.f_floor`` so the Poisson term stays
    finite. The loop stops when ``||u_k - u_{k-1}|| / ||u_k|| <= eps`` or after
    ``max_iter`` iterations.

    Raises
    ------
    NumericalError
        On a non-finite iterate (the message carries the iteration index) or
        an ill-posed u-subproblem.
    """
    f = _prepare_f(f, config)
    spectra = OperatorSpectra.build(blur, f.shape)
    state = initial_state(f, spectra, config)
    trace = []
    lam, mu, alpha, mode = config.lam, config.mu, config.alpha, config.mode

    while state.rel_err > config.eps and state.k < config.max_iter:
        beta = state.beta
        u, u_hat = _solve_u_hat(state.v, state.w, state.y, state.z, beta, spectra, mu)
        if not np.all(np.isfinite(u)):
            raise NumericalError(f"non-finite u at iteration {state.k + 1}")
        lin = None
        if config.check_every and (state.k % config.check_every == 0):
            lin = linear_residual(u, state.v, state.w, state.y, state.z, beta, spectra, mu)
        Au = u if spectra.identity else spectra.irfft(spectra.blur_half * u_hat)
        v = solve_v(Au, state.y, f, beta, lam)
        gu = gradient(u)
        w = solve_w(gu, state.z, beta, alpha, mode)

        nu = float(np.linalg.norm(u))
        diff = float(np.linalg.norm(u - state.u))
        rel = diff / nu if nu > 0 else (0.0 if diff == 0 else math.inf)
        state = update_multipliers(replace(state, u=u, v=v, w=w, rel_err=rel), config, Au, gu)
        if not (np.all(np.isfinite(state.y)) and np.all(np.isfinite(state.z))):
            raise NumericalError(f"non-finite multiplier at iteration {state.k}")

        if config.record_trace:
            row = {
                "k": state.k,
                "rel_err": rel,
                "res_Au_v": float(np.linalg.norm(Au - v)),
                "res_grad_w": float(np.linalg.norm(gu - w)),
                "lagrangian": augmented_lagrangian(state, config, f, spectra),
                "energy": _model_energy(u, Au, f, config),
            }
            if lin is not None:
                row["linear_residual"] = lin
            trace.append(row)
        elif lin is not None:
            trace.append({"k": state.k, "linear_residual": lin})

    converged = state.rel_err <= config.eps
    log.debug("admm stopped after %d iterations (rel_err=%.3g)", state.k, state.rel_err)
    return SmoothResult(u=state.u, state=state, converged=converged, iterations=state.k, trace=trace)


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_FIELDS)
    for row in trace:
        writer.writerow([row.get(name, "") if name == "k" else repr(float(row.get(name, math.nan)))
                         for name in TRACE_FIELDS])
    return buf.getvalue()

