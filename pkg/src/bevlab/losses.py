"""Loss families, closed-form gradient variances, and critical noise thresholds.

The losses operate on a scalar depth residual ``eta`` (meters).  Four families
are supported:

* ``l1``        : absolute error, gradient ``sign(eta)``, variance 1.
* ``l2``        : half squared error, gradient ``eta``, variance ``sigma**2``.
* ``smooth_l1`` : Huber-style transition at ``beta``; no closed-form variance
                  (empirical only).
* ``dice``      : 1D overlap loss for an object of length ``ell``; gradient
                  ``sign(eta)/ell`` inside ``|eta| <= ell`` and 0 outside,
                  variance ``Erf(ell / (sqrt(2) sigma)) / ell**2``.

The critical-noise solver finds ``sigma_m``, the unique positive root of
``sigma**2 = Erf(ell / (sqrt(2) sigma)) / ell**2``, and combines it with the
L1-branch threshold ``sqrt(2)/ell * erf_inv(ell**2)`` (defined only for
``ell < 1``) into the overall threshold ``sigma_c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossKind",
    "NoiseModel",
    "ThresholdResult",
    "erf",
    "erf_inv",
    "loss_value",
    "loss_gradient",
    "gradient_array",
    "closed_form_variance",
    "sigma_m",
    "sigma_c",
]

_SQRT2 = math.sqrt(2.0)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)

_KINDS = ("l1", "l2", "smooth_l1", "dice")


@dataclass(frozen=True)
class LossKind:
    """One member of the loss family: a variant tag plus its parameters.

    ``beta`` is required for ``smooth_l1`` (transition point, meters) and
    ``length`` for ``dice`` (object length, meters); both must be positive.
    """

    kind: str
    beta: float | None = None
    length: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "smooth_l1":
            if self.beta is None or not self.beta > 0:
                raise ValueError("smooth_l1 requires beta > 0")
        if self.kind == "dice":
            if self.length is None or not self.length > 0:
                raise ValueError("dice requires length > 0")

    @classmethod
    def l1(cls) -> "LossKind":
        return cls("l1")

    @classmethod
    def l2(cls) -> "LossKind":
        return cls("l2")

    @classmethod
    def smooth_l1(cls, beta: float) -> "LossKind":
        return cls("smooth_l1", beta=beta)

    @classmethod
    def dice(cls, length: float) -> "LossKind":
        return cls("dice", length=length)

    def label(self) -> str:
        if self.kind == "dice":
            return f"dice(l={self.length:g})"
        if self.kind == "smooth_l1":
            return f"smooth_l1(beta={self.beta:g})"
        return self.kind


@dataclass(frozen=True)
class NoiseModel:
    """Additive zero-mean Gaussian depth noise with standard deviation sigma."""

    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class ThresholdResult:
    """Output of the critical-noise-threshold solver for one object length."""

    sigma_m: float
    sigma_l1: float
    sigma_c: float
    length: float
    solver_residual: float
    iterations: int


def erf(x: float) -> float:
    """Gauss error function (odd, saturating to +/-1)."""
    return math.erf(x)


def erf_inv(p: float) -> float:
    """Inverse error function on (-1, 1).

    Raises ValueError outside the open interval; callers hitting ``p >= 1``
    must fall back to the trivially-satisfied L1 branch (sigma_l1 = 0).
    """
    if not -1.0 < p < 1.0:
        raise ValueError(f"erf_inv domain is (-1, 1), got {p}")
    if p == 0.0:
        return 0.0
    q = abs(p)
    lo, hi = 0.0, 1.0
    while math.erf(hi) < q:
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if math.erf(mid) < q:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    # Newton polish; derivative of erf is 2/sqrt(pi) * exp(-x^2)
    for _ in range(4):
        x -= (math.erf(x) - q) / (_TWO_OVER_SQRT_PI * math.exp(-x * x))
    return math.copysign(x, p)


def loss_value(kind: LossKind, eta: float) -> float:
    """Loss evaluated at residual eta."""
    a = abs(eta)
    if kind.kind == "l1":
        return a
    if kind.kind == "l2":
        return 0.5 * eta * eta
    if kind.kind == "smooth_l1":
        b = kind.beta
        if a <= b:
            return 0.5 * eta * eta
        return b * (a - 0.5 * b)
    # dice
    ell = kind.length
    return a / ell if a <= ell else 1.0


def loss_gradient(kind: LossKind, eta: float) -> float:
    """Gradient of the loss with respect to the residual.

    At the measure-zero kinks: sign-based losses return 0 at eta = 0, and the
    dice gradient keeps its interior value at |eta| = ell.
    """
    if kind.kind == "l1":
        return float(np.sign(eta))
    if kind.kind == "l2":
        return eta
    if kind.kind == "smooth_l1":
        b = kind.beta
        return min(max(eta, -b), b)
    ell = kind.length
    if abs(eta) <= ell:
        return float(np.sign(eta)) / ell
    return 0.0


def gradient_array(kind: LossKind, eta: np.ndarray) -> np.ndarray:
    """Vectorized :func:`loss_gradient` over an array of residuals."""
    eta = np.asarray(eta, dtype=np.float64)
    if kind.kind == "l1":
        return np.sign(eta)
    if kind.kind == "l2":
        return eta.copy()
    if kind.kind == "smooth_l1":
        return np.clip(eta, -kind.beta, kind.beta)
    ell = kind.length
    return np.where(np.abs(eta) <= ell, np.sign(eta) / ell, 0.0)


def closed_form_variance(kind: LossKind, noise: NoiseModel) -> float | None:
    """Closed-form gradient variance, or None where only empirical estimates
    exist (smooth_l1).

    The dice formula ``Erf(ell/(sqrt(2) sigma)) / ell**2`` is continued to
    ``sigma = 0`` by its limit ``1/ell**2``.
    """
    sigma = noise.sigma
    if kind.kind == "l1":
        return 1.0
    if kind.kind == "l2":
        return sigma * sigma
    if kind.kind == "smooth_l1":
        return None
    ell = kind.length
    if sigma == 0.0:
        return 1.0 / (ell * ell)
    return erf(ell / (_SQRT2 * sigma)) / (ell * ell)


def _fixed_point_residual(sigma: float, length: float) -> float:
    return sigma * sigma - erf(length / (_SQRT2 * sigma)) / (length * length)


def sigma_m(length: float) -> float:
    """Noise level where the dice and L2 gradient variances cross.

    Unique positive root of ``sigma**2 = Erf(ell/(sqrt(2) sigma)) / ell**2``
    (left side strictly increasing, right side strictly decreasing), found by
    bisection on the bracket ``[1e-6, max(1, 2/ell)]``.
    """
    root, _, _ = _solve_sigma_m(length)
    return root


def _solve_sigma_m(length: float) -> tuple[float, float, int]:
    if not length > 0:
        raise ValueError("length must be > 0")
    lo = 1e-6
    hi = max(1.0, 2.0 / length)
    while _fixed_point_residual(hi, length) < 0:  # defensive; bound proof says no
        hi *= 2.0
    iterations = 0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if _fixed_point_residual(mid, length) < 0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    root = 0.5 * (lo + hi)
    return root, _fixed_point_residual(root, length), iterations


def sigma_c(length: float) -> ThresholdResult:
    """Critical noise threshold beyond which dice converges better than both
    L1 and L2.

    For ``ell**2 >= 1`` the L1 comparison holds for every sigma, so the L1
    branch contributes 0; otherwise it is ``sqrt(2)/ell * erf_inv(ell**2)``.
    """
    if not length > 0:
        raise ValueError("length must be > 0")
    root, residual, iterations = _solve_sigma_m(length)
    if length * length >= 1.0:
        s_l1 = 0.0
    else:
        s_l1 = _SQRT2 / length * erf_inv(length * length)
    return ThresholdResult(
        sigma_m=root,
        sigma_l1=s_l1,
        sigma_c=max(root, s_l1),
        length=length,
        solver_residual=residual,
        iterations=iterations,
    )
