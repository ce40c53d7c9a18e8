"""Multi-stage residual coder in additive-reconstruction mode.

Stage t quantizes the running residual ``r_{t-1} = x - x_hat_{t-1}`` with a
uniform step, and ``x_hat_t = x_hat_{t-1} + g_t(z_t)``. Each stage has its own
fitted entropy model and its own rANS payload, so any prefix of payloads
decodes to a valid (coarser) reconstruction.
"""
from __future__ import annotations

import struct

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_positive, check_samples
from ..entropy_coding.rans import RansState, rans_encode
from ..errors import FormatError, ParameterError
from ..prob_models.densities import DiscretizedDensity
from ..prob_models.fitting import fit_discretized
from ..quantization import ScalarQuantizer, uniform_quantize

_STAGE = struct.Struct("<Iii")  # n_values, rows, cols


def _stage_model(z: np.ndarray) -> DiscretizedDensity:
    lo, hi = int(z.min()), int(z.max())
    if lo == hi:
        return DiscretizedDensity("logistic", float(lo), 1.0, lo, hi)
    return fit_discretized("logistic", z, support=(lo, hi), tol=1e-7, max_iter=400).density


class ProgressiveCoder(BaseEstimator):
    """T stages with steps ``step * ratio**t``.

    ``fit`` learns one scalar quantizer and one entropy model per stage from
    training data; ``encode`` returns one payload per stage.
    """

    def __init__(self, n_stages: int = 3, step: float = 1.0, ratio: float = 0.5, margin: int = 2):
        self.n_stages = n_stages
        self.step = step
        self.ratio = ratio
        self.margin = margin

    def steps(self) -> np.ndarray:
        return self.step * self.ratio ** np.arange(self.n_stages)

    def fit(self, X, y=None):
        X = check_samples(X)
        if self.n_stages < 1:
            raise ParameterError("n_stages must be >= 1")
        check_positive(self.step, "step")
        check_positive(self.ratio, "ratio")
        recon = np.zeros_like(X)
        self.models_ = []
        self.quantizers_ = []
        for t, delta in enumerate(self.steps()):
            z = uniform_quantize((X - recon) / delta)
            model = _stage_model(z)
            lo, hi = model.z_min - self.margin, model.z_max + self.margin
            model = DiscretizedDensity("logistic", model.loc, model.scale, lo, hi)
            self.models_.append(model)
            pts = np.arange(lo, hi + 1) * delta
            self.quantizers_.append(ScalarQuantizer.from_points(pts))
            recon = recon + np.clip(z, lo, hi) * delta
        self.n_features_in_ = X.shape[1]
        return self

    def _stage_indices(self, residual, t):
        delta = self.steps()[t]
        m = self.models_[t]
        return np.clip(uniform_quantize(residual / delta), m.z_min, m.z_max)

    def encode(self, X) -> list[bytes]:
        check_is_fitted(self, "models_")
        X = check_samples(X)
        recon = np.zeros_like(X)
        payloads = []
        for t, delta in enumerate(self.steps()):
            z = self._stage_indices(X - recon, t)
            m = self.models_[t]
            state = rans_encode(m.quantized(16), (z.ravel() - m.z_min).tolist())
            payloads.append(_STAGE.pack(z.size, *X.shape) + state.to_bytes())
            recon = recon + z * delta
        return payloads

    def decode(self, payloads, t: int | None = None) -> np.ndarray:
        """Reconstruction after ``t`` stages; missing payloads stop the prefix early."""
        check_is_fitted(self, "models_")
        t = self.n_stages if t is None else int(t)
        if not 0 <= t <= self.n_stages:
            raise ParameterError("t must be in [0, n_stages]")
        payloads = list(payloads)
        if not payloads or payloads[0] is None:
            raise FormatError("the first stage payload carries the shape and is required")
        shape = self._shape(payloads[0])
        recon = np.zeros(shape)
        for s, blob in enumerate(payloads[:t]):
            if blob is None:
                break
            if self._shape(blob) != shape:
                raise FormatError("stage payload shape mismatch")
            m = self.models_[s]
            state = RansState.from_bytes(blob[_STAGE.size :])
            pmf = m.quantized(16)
            z = np.array([state.pop(pmf) for _ in range(shape[0] * shape[1])], dtype=np.int64) + m.z_min
            recon = recon + z.reshape(shape) * self.steps()[s]
        return recon

    def _shape(self, blob) -> tuple[int, int]:
        if len(blob) < _STAGE.size:
            raise FormatError("stage payload too short")
        n, rows, cols = _STAGE.unpack_from(blob)
        if rows * cols != n or cols != self.n_features_in_:
            raise FormatError("stage payload shape mismatch")
        return rows, cols

    def reconstructions(self, X) -> list[np.ndarray]:
        """x_hat_0 .. x_hat_T without entropy coding (x_hat_0 = 0)."""
        check_is_fitted(self, "models_")
        X = check_samples(X)
        out = [np.zeros_like(X)]
        for t, delta in enumerate(self.steps()):
            z = self._stage_indices(X - out[-1], t)
            out.append(out[-1] + z * delta)
        return out


def progressive_encode(coder: ProgressiveCoder, X) -> list[bytes]:
    return coder.encode(X)


def progressive_decode(coder: ProgressiveCoder, payloads, t: int | None = None) -> np.ndarray:
    return coder.decode(payloads, t)
