"""MSE, PSNR, SSIM and multi-scale SSIM."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import fftconvolve

from ._validation import check_positive, check_same_shape
from .errors import ParameterError

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
GAUSSIAN_SIZE = 11
GAUSSIAN_SIGMA = 1.5


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    check_same_shape(x, y)
    return x, y


def mse(x, y) -> float:
    x, y = _pair(x, y)
    return float(np.mean((x - y) ** 2))


def psnr(x, y, peak: float = 255.0) -> float:
    """PSNR in dB; identical inputs give ``math.inf``."""
    check_positive(peak, "peak")
    err = mse(x, y)
    return math.inf if err == 0 else float(10 * np.log10(peak**2 / err))


def ssim_constants(peak: float = 255.0, k1: float = 0.01, k2: float = 0.03) -> tuple[float, float]:
    return (k1 * peak) ** 2, (k2 * peak) ** 2


@dataclass(frozen=True)
class PatchStats:
    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    sigma_xy: float

    @classmethod
    def of(cls, x, y) -> "PatchStats":
        x, y = _pair(x, y)
        mx, my = x.mean(), y.mean()
        return cls(mx, my, x.std(), y.std(), float(((x - mx) * (y - my)).mean()))


def ssim_components(x, y, c1: float = 0.0, c2: float = 0.0) -> tuple[float, float, float]:
    """Luminance, contrast and structure factors of one patch (``c3 = c2 / 2``)."""
    st = PatchStats.of(x, y)
    c3 = c2 / 2
    # zero constants with a flat or zero-mean patch give 0/0; report nan quietly
    with np.errstate(divide="ignore", invalid="ignore"):
        lum = (2 * st.mu_x * st.mu_y + c1) / (st.mu_x**2 + st.mu_y**2 + c1)
        con = (2 * st.sigma_x * st.sigma_y + c2) / (st.sigma_x**2 + st.sigma_y**2 + c2)
        struct_ = (st.sigma_xy + c3) / (st.sigma_x * st.sigma_y + c3)
    return float(lum), float(con), float(struct_)


def ssim_patch(x, y, c1=None, c2=None, alpha=1.0, beta=1.0, gamma=1.0, peak=255.0) -> float:
    if c1 is None or c2 is None:
        d1, d2 = ssim_constants(peak)
        c1 = d1 if c1 is None else c1
        c2 = d2 if c2 is None else c2
    if alpha == beta == gamma == 1:
        st = PatchStats.of(x, y)
        return float(_combined(st.mu_x, st.mu_y, st.sigma_x**2, st.sigma_y**2, st.sigma_xy, c1, c2))
    lum, con, struct_ = ssim_components(x, y, c1, c2)
    return float(lum**alpha * con**beta * struct_**gamma)


def _combined(mx, my, vx, vy, cxy, c1, c2):
    # l * c * s with c3 = c2 / 2 collapses to this form; x == y gives exactly 1
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def gaussian_window(size: int = GAUSSIAN_SIZE, sigma: float = GAUSSIAN_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _local_stats(x, y, window):
    """Windowed means, variances and covariance over the valid region."""
    if isinstance(window, str):
        if window != "gaussian":
            raise ParameterError(f"unknown window {window!r}")
        w = gaussian_window()
        size = w.shape[0]
        if min(x.shape) < size:
            raise ParameterError("window larger than image")

        def avg(a):
            return fftconvolve(a, w[::-1, ::-1], mode="valid")

    else:
        size = int(window)
        if size < 1 or min(x.shape) < size:
            raise ParameterError("window larger than image")

        def avg(a):
            return sliding_window_view(a, (size, size)).mean(axis=(-2, -1))

    mx, my = avg(x), avg(y)
    vx = avg(x * x) - mx * mx
    vy = avg(y * y) - my * my
    cxy = avg(x * y) - mx * my
    return mx, my, vx, vy, cxy


def _check_gray(x, y):
    x, y = _pair(x, y)
    if x.ndim != 2:
        raise ParameterError("expected a 2-D grayscale image")
    return x, y


def ssim_map(x, y, window=8, peak: float = 255.0, c1=None, c2=None) -> np.ndarray:
    x, y = _check_gray(x, y)
    d1, d2 = ssim_constants(peak)
    c1 = d1 if c1 is None else c1
    c2 = d2 if c2 is None else c2
    return _combined(*_local_stats(x, y, window), c1, c2)


def ssim_image(x, y, window=8, peak: float = 255.0, c1=None, c2=None) -> float:
    """Mean SSIM over all window positions (stride 1, valid region).

    ``window`` is a box size or ``"gaussian"`` (11x11, sigma 1.5).
    """
    return float(ssim_map(x, y, window, peak, c1, c2).mean())


def _pool2(a):
    h, w = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
    a = a[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def ms_ssim(x, y, scales: int = 5, weights=None, peak: float = 255.0, c1=None, c2=None) -> float:
    """Multi-scale SSIM with Gaussian windows and 2x average pooling between scales.

    Contrast-structure terms come from every scale and the luminance term from
    the coarsest; negative per-scale means are clipped to zero before the
    fractional powers.
    """
    x, y = _check_gray(x, y)
    if weights is None:
        if scales > len(MS_SSIM_WEIGHTS):
            raise ParameterError("give weights for more than 5 scales")
        # fewer scales: the leading standard weights, renormalized to sum to one
        weights = np.asarray(MS_SSIM_WEIGHTS[:scales]) / sum(MS_SSIM_WEIGHTS[:scales])
    weights = np.asarray(weights, dtype=np.float64)
    if scales < 1 or len(weights) != scales:
        raise ParameterError("need one weight per scale")
    if min(x.shape) < GAUSSIAN_SIZE * 2 ** (scales - 1):
        raise ParameterError(f"image too small for {scales} scales")
    d1, d2 = ssim_constants(peak)
    c1 = d1 if c1 is None else c1
    c2 = d2 if c2 is None else c2
    out = 1.0
    for j in range(scales):
        mx, my, vx, vy, cxy = _local_stats(x, y, "gaussian")
        cs = float(((2 * cxy + c2) / (vx + vy + c2)).mean())
        if j == scales - 1:
            cs = float(_combined(mx, my, vx, vy, cxy, c1, c2).mean())
        out *= max(cs, 0.0) ** weights[j]
        x, y = _pool2(x), _pool2(y)
    return float(out)


def color_metric(x, y, metric=ssim_image, **kwargs) -> float:
    """Apply ``metric`` to each RGB channel (last axis) and average."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim != 3 or x.shape[-1] != 3:
        raise ParameterError("expected (H, W, 3) images")
    check_same_shape(x, y)
    return float(np.mean([metric(x[..., i], y[..., i], **kwargs) for i in range(3)]))
