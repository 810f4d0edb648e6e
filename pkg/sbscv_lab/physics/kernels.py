"""
Decoherence kernels Gamma(t, x, y) and the map rho -> K * Gamma they induce.

Both built-in kernel families depend on x - y only, so they are assembled from
a profile over the 2n - 1 grid offsets.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from sbscv_lab.numerics.numkit import as_cmatrix, hermiticity_defect
from sbscv_lab.physics.cvgrid import CvDensity, Grid
from sbscv_lab.physics.envmodel import (EnvModel, GaussianDecoherence, characteristic_derivative,
                                        characteristic_function)
from sbscv_lab.utils.errors import InvalidInputError
from sbscv_lab.utils.lab_types import CMatrix

KERNEL_TOL = 1e-12

# (x, y) arrays -> (Gamma, d Gamma / dy) arrays
ClosedForm = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class GammaKernel:
    grid: Grid
    t: float
    values: CMatrix
    dy: Optional[CMatrix] = None
    closed_form: Optional[ClosedForm] = field(default=None, repr=False)
    gaussian_tag: Optional[GaussianDecoherence] = None
    label: str = "kernel"

    def __post_init__(self):
        values = as_cmatrix(self.values, "Gamma")
        if values.shape[0] != self.grid.n:
            raise InvalidInputError(f"Gamma size {values.shape[0]} does not match grid size {self.grid.n}")
        if np.max(np.abs(np.diag(values) - 1.0)) > KERNEL_TOL:
            raise InvalidInputError("Gamma must equal 1 on the diagonal")
        if np.max(np.abs(values)) > 1.0 + KERNEL_TOL:
            raise InvalidInputError("Gamma must satisfy |Gamma| <= 1")
        if hermiticity_defect(values) > KERNEL_TOL:
            raise InvalidInputError("Gamma must satisfy Gamma(x, y) = conj(Gamma(y, x))")
        object.__setattr__(self, 'values', values)
        if self.dy is not None:
            dy = as_cmatrix(self.dy, "dGamma/dy")
            if dy.shape != values.shape:
                raise InvalidInputError("Derivative shape does not match Gamma")
            object.__setattr__(self, 'dy', dy)

    def derivative(self) -> Tuple[CMatrix, float]:
        """(dGamma/dy, absolute error estimate); the estimate is 0 for analytic derivatives."""
        if self.dy is not None:
            return self.dy, 0.0
        return finite_difference_dy(self.values, self.grid.dx)

    def evaluate(self, x, y) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        if self.closed_form is None:
            return None
        return self.closed_form(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def offset_defect(self) -> float:
        """Largest deviation from a function of x - y along equal-offset diagonals."""
        worst = 0.0
        n = self.grid.n
        for k in range(-(n - 1), n):
            diag = np.diagonal(self.values, offset=k)
            worst = max(worst, float(np.max(np.abs(diag - diag.mean()))))
        return worst

    def multiply(self, other: 'GammaKernel') -> 'GammaKernel':
        """Product kernel (several traced environments), derivative by the product rule."""
        if other.grid != self.grid or other.t != self.t:
            raise InvalidInputError("Kernels must share grid and time to be multiplied")
        dy = None
        if self.dy is not None and other.dy is not None:
            dy = self.dy * other.values + self.values * other.dy
        closed = None
        if self.closed_form is not None and other.closed_form is not None:
            closed = _product_closed_form(self.closed_form, other.closed_form)
        tag = None
        if self.gaussian_tag is not None and other.label == "trivial":
            tag = self.gaussian_tag
        elif other.gaussian_tag is not None and self.label == "trivial":
            tag = other.gaussian_tag
        return GammaKernel(self.grid, self.t, self.values * other.values, dy=dy, closed_form=closed,
                           gaussian_tag=tag, label=f"{self.label}*{other.label}")


def _product_closed_form(f: ClosedForm, g: ClosedForm) -> ClosedForm:
    def evaluate(x, y):
        fv, fd = f(x, y)
        gv, gd = g(x, y)
        return fv * gv, fd * gv + fv * gd
    return evaluate


def finite_difference_dy(values: CMatrix, dx: float) -> Tuple[CMatrix, float]:
    """Central differences along y with one Richardson step; returns (derivative, error estimate)."""
    n = values.shape[1]
    coarse = np.gradient(values, dx, axis=1, edge_order=2)
    if n < 5:
        first_order = np.gradient(values, dx, axis=1, edge_order=1)
        return coarse, float(np.max(np.abs(coarse - first_order)))

    d_h = (values[:, 2:] - values[:, :-2]) / (2.0 * dx)
    d_2h = (values[:, 4:] - values[:, :-4]) / (4.0 * dx)
    richardson = (4.0 * d_h[:, 1:-1] - d_2h) / 3.0

    refined = coarse.copy()
    refined[:, 2:-2] = richardson
    interior_err = float(np.max(np.abs(richardson - d_h[:, 1:-1])))
    first_order = np.gradient(values, dx, axis=1, edge_order=1)
    edge_cols = np.r_[0:2, n - 2:n]
    edge_err = float(np.max(np.abs(coarse[:, edge_cols] - first_order[:, edge_cols])))
    return refined, max(interior_err, edge_err)


def _toeplitz_from_offsets(grid: Grid, profile: np.ndarray) -> CMatrix:
    """Matrix M[i, j] = profile[(i - j) + n - 1]."""
    idx = np.subtract.outer(np.arange(grid.n), np.arange(grid.n)) + grid.n - 1
    return profile[idx]


def _env_profile(traced: Sequence[EnvModel], t: float, d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Product of characteristic functions at s = t g (x - y) and its y-derivative, d = x - y."""
    value = np.ones(d.shape, dtype=np.complex128)
    deriv = np.zeros(d.shape, dtype=np.complex128)
    for env in traced:
        s = t * env.g * d
        c = characteristic_function(env, s)
        dc = characteristic_derivative(env, s) * (-t * env.g)
        deriv = deriv * c + value * dc
        value = value * c
    return value, deriv


def _check_time(t: float):
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError(f"Time must be finite and non-negative, got {t}")


def gamma_from_envs(traced: Sequence[EnvModel], t: float, grid: Grid) -> GammaKernel:
    _check_time(t)
    traced = tuple(traced)
    offsets = np.arange(-(grid.n - 1), grid.n) * grid.dx
    value, deriv = _env_profile(traced, t, offsets)
    centre = grid.n - 1
    if abs(value[centre] - 1.0) > KERNEL_TOL:
        raise InvalidInputError(f"Characteristic functions do not equal 1 at s = 0 ({value[centre]})")
    value[centre] = 1.0

    def closed_form(x, y):
        return _env_profile(traced, t, x - y)

    return GammaKernel(
        grid=grid,
        t=float(t),
        values=_toeplitz_from_offsets(grid, value),
        dy=_toeplitz_from_offsets(grid, deriv),
        closed_form=closed_form,
        label="+".join(env.label for env in traced) if traced else "trivial",
    )


def gaussian_gamma(t: float, alpha: float, n_exp: float, grid: Grid) -> GammaKernel:
    tag = GaussianDecoherence(alpha, n_exp)
    _check_time(t)
    tau = tag.tau(t)
    offsets = np.arange(-(grid.n - 1), grid.n) * grid.dx

    def closed_form(x, y):
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        value = np.exp(-tau * d ** 2)
        return value.astype(np.complex128), (2.0 * tau * d * value).astype(np.complex128)

    value, deriv = closed_form(offsets, np.zeros_like(offsets))
    return GammaKernel(
        grid=grid,
        t=float(t),
        values=_toeplitz_from_offsets(grid, value),
        dy=_toeplitz_from_offsets(grid, deriv),
        closed_form=closed_form,
        gaussian_tag=tag,
        label=f"gaussian(alpha={alpha:g}, n={n_exp:g})",
    )


def apply_decoherence(rho: CvDensity, gamma: GammaKernel) -> CvDensity:
    """Hadamard product K(x, y) * Gamma(t, x, y)."""
    if rho.grid != gamma.grid:
        raise InvalidInputError("State and kernel live on different grids")
    return CvDensity(rho.grid, rho.kernel * gamma.values)


def gaussian_convolution_factor(tau: float, x, z) -> np.ndarray:
    """phi(x, z) with Gamma(x, y) = integral of phi(x, z) phi(y, z) dz."""
    scale = np.sqrt(2.0 * np.sqrt(tau / np.pi))
    return scale * np.exp(-2.0 * tau * (np.asarray(x) - np.asarray(z)) ** 2)


def _z_window(tau: float, x: float, y: float) -> Tuple[float, float, float]:
    mid = 0.5 * (x + y)
    half = 12.0 / np.sqrt(tau) + 0.5 * abs(x - y)
    return mid, mid - half, mid + half


def convolution_quadrature(t: float, alpha: float, n_exp: float, x: float, y: float) -> Tuple[float, float]:
    """(quadrature of phi(x, .) phi(y, .), closed-form Gamma(x, y))."""
    tau = GaussianDecoherence(alpha, n_exp).tau(t)
    if tau <= 0:
        raise InvalidInputError("Convolution form needs t > 0")
    mid, lo, hi = _z_window(tau, x, y)
    value, _ = integrate.quad(
        lambda z: gaussian_convolution_factor(tau, x, z) * gaussian_convolution_factor(tau, y, z),
        lo, hi, points=[mid], epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(value), float(np.exp(-tau * (x - y) ** 2))


def overlap_quadrature(t: float, alpha: float, n_exp: float, x: float, y: float) -> Tuple[float, float]:
    """(quadrature of |phi(x, .) phi(y, .)|^2, closed form sqrt(2 tau / pi) exp(-2 tau (x - y)^2))."""
    tau = GaussianDecoherence(alpha, n_exp).tau(t)
    if tau <= 0:
        raise InvalidInputError("Convolution form needs t > 0")
    mid, lo, hi = _z_window(tau, x, y)
    value, _ = integrate.quad(
        lambda z: (gaussian_convolution_factor(tau, x, z) * gaussian_convolution_factor(tau, y, z)) ** 2,
        lo, hi, points=[mid], epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(value), float(np.sqrt(2.0 * tau / np.pi) * np.exp(-2.0 * tau * (x - y) ** 2))
