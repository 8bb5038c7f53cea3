"""Reconstruction quality metrics: PSNR and SSIM."""

import numpy as np
from scipy.signal import convolve2d

from .errors import InvalidDimensionError, InvalidParameterError

__all__ = ["psnr", "ssim", "PSNR_CEILING", "gaussian_window"]

# finite stand-in for infinite PSNR on exact recovery; keeps CSVs numeric
PSNR_CEILING = 99.0


def psnr(truth, estimate, peak=1.0, ceiling=PSNR_CEILING):
    """Peak signal-to-noise ratio 10 log10(peak^2 / MSE) in dB.

    Zero MSE (and anything above it) reports the declared ceiling.
    """
    truth = np.asarray(truth, dtype=np.float64).ravel()
    estimate = np.asarray(estimate, dtype=np.float64).ravel()
    if truth.shape != estimate.shape:
        raise InvalidDimensionError(
            f"length mismatch: {truth.size} vs {estimate.size}")
    if peak <= 0:
        raise InvalidParameterError("peak must be > 0")
    mse = float(np.mean((truth - estimate) ** 2))
    if mse == 0.0:
        return float(ceiling)
    return float(min(10.0 * np.log10(peak * peak / mse), ceiling))


def gaussian_window(size=11, sigma=1.5):
    """Normalized 2-D Gaussian kernel used by :func:`ssim`."""
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-coords ** 2 / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(truth, estimate, k1=0.01, k2=0.03, peak=1.0,
         window_size=11, window_sigma=1.5):
    """Mean structural similarity between two 2-D images in [0, peak].

    Local statistics use an 11x11 Gaussian window (sigma 1.5) over valid
    positions.  Images smaller than the window fall back to a single SSIM
    over global statistics.
    """
    x = np.asarray(truth, dtype=np.float64)
    y = np.asarray(estimate, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise InvalidDimensionError("ssim expects 2-D images")
    if x.shape != y.shape:
        raise InvalidDimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2

    if min(x.shape) < window_size:
        mu_x, mu_y = x.mean(), y.mean()
        var_x, var_y = x.var(), y.var()
        cov = float(np.mean((x - mu_x) * (y - mu_y)))
        return float((2 * mu_x * mu_y + c1) * (2 * cov + c2)
                     / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)))

    w = gaussian_window(window_size, window_sigma)
    mu_x = convolve2d(x, w, mode="valid")
    mu_y = convolve2d(y, w, mode="valid")
    var_x = convolve2d(x * x, w, mode="valid") - mu_x ** 2
    var_y = convolve2d(y * y, w, mode="valid") - mu_y ** 2
    cov = convolve2d(x * y, w, mode="valid") - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)
                / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)))
    return float(ssim_map.mean())
