"""Smoothing kernel for the regularized free energy, and the polynomial
kernel used by the squared-MMD sample metric.

Convention: the Gaussian kernel bandwidth ``h`` is a *variance*,

    K_h(u) = (2*pi*h)^(-d/2) * exp(-|u|^2 / (2h)),

normalized so that the smoothed particle density integrates to one and the
free energy is an actual KL estimate.
"""

import numpy as np


class GaussianKernel:
    """Isotropic Gaussian smoothing kernel with variance parameter h."""

    def __init__(self, bandwidth_h: float, dim: int):
        if not bandwidth_h > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth_h}")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.bandwidth_h = float(bandwidth_h)
        self.dim = int(dim)
        self.norm_const = (2.0 * np.pi * self.bandwidth_h) ** (-self.dim / 2.0)

    def __call__(self, diff) -> float | np.ndarray:
        """Kernel value at displacement(s) diff, shape (..., d)."""
        diff = np.asarray(diff, dtype=np.float64)
        sq = np.sum(diff * diff, axis=-1)
        return self.norm_const * np.exp(-sq / (2.0 * self.bandwidth_h))

    def grad(self, diff) -> np.ndarray:
        """Gradient w.r.t. the displacement: -(u/h) K_h(u); odd in u."""
        diff = np.asarray(diff, dtype=np.float64)
        return -(diff / self.bandwidth_h) * self(diff)[..., None]

    def pairwise(self, x: np.ndarray, y: np.ndarray | None = None):
        """Pairwise displacement tensor and kernel matrix.

        Returns (D, K) with D[i, j] = x_i - y_j of shape (N, M, d) and
        K[i, j] = K_h(x_i - y_j) of shape (N, M).
        """
        if y is None:
            y = x
        D = x[:, None, :] - y[None, :, :]
        K = self.norm_const * np.exp(-np.sum(D * D, axis=-1) / (2.0 * self.bandwidth_h))
        return D, K


class PolynomialKernel:
    """k(x, y) = (scale * <x, y> + offset)^degree; default (x.y/3 + 1)^3."""

    def __init__(self, scale: float = 1.0 / 3.0, offset: float = 1.0, degree: int = 3):
        self.scale = float(scale)
        self.offset = float(offset)
        self.degree = int(degree)

    def __call__(self, x, y) -> float:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != y.shape:
            raise ValueError("dimension mismatch in polynomial kernel")
        return (self.scale * float(np.dot(x, y)) + self.offset) ** self.degree

    def gram(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Full kernel matrix for row-stacked sample sets x (N,d), y (M,d)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        if x.shape[1] != y.shape[1]:
            raise ValueError(
                f"dimension mismatch: {x.shape[1]} vs {y.shape[1]} columns"
            )
        return (self.scale * (x @ y.T) + self.offset) ** self.degree
