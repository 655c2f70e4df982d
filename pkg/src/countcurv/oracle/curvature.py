"""Analytic curvature of conformally flat metrics ``g = e^{2u} g0``."""

from __future__ import annotations

import numpy as np

from ..errors import NonPositiveDensity, WrongDimension
from .fields import DensityField, SmoothFunction


def gauss_curvature_2d(field: DensityField, x) -> np.ndarray:
    """``K = -e^{-2u} lap u`` (plane only)."""
    if field.dim != 2:
        raise WrongDimension("Gaussian curvature needs a 2D field")
    return -np.exp(-2 * field.u(x)) * field.laplacian_u(x)


def scalar_curvature(field: DensityField, x) -> np.ndarray:
    """``R = e^{-2u}(-2(m-1) lap u - (m-1)(m-2)|grad u|^2)``."""
    m = field.dim
    if m < 2:
        raise WrongDimension("scalar curvature needs m >= 2")
    gu = field.grad_u(x)
    return np.exp(-2 * field.u(x)) * (-2 * (m - 1) * field.laplacian_u(x)
                                      - (m - 1) * (m - 2) * (gu * gu).sum(-1))


def density_scalar_curvature(rho_field: SmoothFunction, m: int, x) -> np.ndarray:
    """Scalar curvature written through the volume density ``rho = e^{m u}``."""
    if m < 2:
        raise WrongDimension("scalar curvature needs m >= 2")
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho_field.value(x), dtype=float)
    if np.any(rho <= 0):
        raise NonPositiveDensity("rho must be strictly positive")
    g = rho_field.grad(x)
    lap = rho_field.laplacian(x)
    return rho ** (-2.0 / m) * (-(2.0 * (m - 1) / m) * lap / rho
                                + ((m - 1) * (m + 2) / m**2) * (g * g).sum(-1) / rho**2)


def sectional_curvature(field: DensityField, x, X, Y) -> np.ndarray:
    """Sectional curvature of the plane spanned by Euclidean-orthonormal ``X, Y``.

    ``K = e^{-2u}[-H(X,X) - H(Y,Y) + (X.du)^2 + (Y.du)^2 - |du|^2]`` with
    ``H`` the Euclidean Hessian of ``u``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    H = field.hessian_u(x)
    gu = field.grad_u(x)
    hxx = np.einsum("...ij,i,j->...", H, X, X)
    hyy = np.einsum("...ij,i,j->...", H, Y, Y)
    return np.exp(-2 * field.u(x)) * (-hxx - hyy + (gu @ X) ** 2 + (gu @ Y) ** 2
                                      - (gu * gu).sum(-1))


def _h_tensor(field: DensityField, x) -> np.ndarray:
    gu = field.grad_u(x)
    m = field.dim
    return (field.hessian_u(x) - gu[..., :, None] * gu[..., None, :]
            + 0.5 * (gu * gu).sum(-1)[..., None, None] * np.eye(m))


def curvature_operator_3d(field: DensityField, x) -> np.ndarray:
    """Curvature operator in the basis ``e2^e3, e3^e1, e1^e2``.

    With ``h = Hess u - du du + |du|^2/2 I`` the diagonal is
    ``M_aa = -e^{-2u}(h_bb + h_cc)`` and ``M_ab = e^{-2u} h_ab`` off it.
    """
    if field.dim != 3:
        raise WrongDimension("curvature operator is implemented for m = 3")
    h = _h_tensor(field, x)
    w = np.exp(-2 * field.u(x))[..., None, None]
    M = w * h
    tr = np.trace(h, axis1=-2, axis2=-1)
    for a in range(3):
        M[..., a, a] = -w[..., 0, 0] * (tr - h[..., a, a])
    return M


def ricci_diagonal_3d(field: DensityField, x) -> np.ndarray:
    """``Ric(e_i, e_i)`` for the coordinate frame, normalized to g-unit vectors."""
    M = curvature_operator_3d(field, x)
    d = np.diagonal(M, axis1=-2, axis2=-1)
    # Ric_11 = K12 + K13 = M33 + M22
    return d.sum(-1)[..., None] - d
