"""Information rate-distortion via Blahut-Arimoto, plus an operational R-D sweep harness."""
from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ._validation import check_positive
from .errors import ConvergenceError, InvalidDistributionError, ParameterError
from .parallel import ordered_map

CSV_COLUMNS = ("lambda", "rate_bits", "distortion", "label")


def _source_probs(source) -> np.ndarray:
    p = np.asarray(getattr(source, "probs", source), dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidDistributionError("source must be a probability vector")
    return p


def _check_channel(channel) -> np.ndarray:
    c = np.asarray(channel, dtype=np.float64)
    if c.ndim != 2 or np.any(c < 0) or np.any(np.abs(c.sum(1) - 1.0) > 1e-9):
        raise InvalidDistributionError("channel must be row-stochastic")
    return c


def _check_distortion(rho, n_src) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim != 2 or rho.shape[0] != n_src:
        raise ParameterError("distortion matrix needs one row per source symbol")
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise ParameterError("distortions must be finite and nonnegative")
    return rho


def mutual_information(source, channel) -> float:
    """I[x; x_hat] in bits for source p(x) and channel p(x_hat | x)."""
    p = _source_probs(source)
    c = _check_channel(channel)
    out = p @ c
    joint = p[:, None] * c
    m = joint > 0
    ratio = c[m] / np.broadcast_to(out, c.shape)[m]
    return float(max(0.0, (joint[m] * np.log2(ratio)).sum()))


def hamming_distortion(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


def squared_distortion(source_values, recon_values) -> np.ndarray:
    s = np.asarray(source_values, dtype=np.float64)
    r = np.asarray(recon_values, dtype=np.float64)
    return (s[:, None] - r[None, :]) ** 2


@dataclass
class BAResult:
    rate: float
    distortion: float
    channel: np.ndarray
    output: np.ndarray
    lam: float
    n_iter: int
    rate_history: list = field(default_factory=list, repr=False)
    lagrangian_history: list = field(default_factory=list, repr=False)

    @property
    def lagrangian(self) -> float:
        return self.rate + self.lam * self.distortion


def _dedupe_columns(rho):
    """Identical reconstruction columns collapse onto the lowest index."""
    _, first = np.unique(rho.T, axis=0, return_index=True)
    return np.sort(first)


def blahut_arimoto(source, distortion, lam: float, tol: float = 1e-9, max_iter: int = 100_000) -> BAResult:
    """Point on R_I(D) with slope ``-lam`` (rate in bits).

    Alternates ``Q(x_hat|x) ∝ m(x_hat) 2^(-lam rho)`` and ``m = p Q`` until the
    rate changes by less than ``tol`` per iteration. ``lam = 0`` returns the
    zero-rate limit: everything maps to the single best reconstruction.
    """
    p = _source_probs(source)
    rho = _check_distortion(distortion, p.size)
    lam = check_positive(lam, "lam", allow_zero=True)
    n_rec = rho.shape[1]
    if lam == 0:
        j = int(np.argmin(p @ rho))
        channel = np.zeros_like(rho)
        channel[:, j] = 1.0
        d = float(p @ rho[:, j])
        return BAResult(0.0, d, channel, channel[0].copy(), lam, 0, [0.0], [0.0])

    keep = _dedupe_columns(rho)
    r = rho[:, keep]
    # log-domain kernel keeps large lam stable
    log_k = -lam * r * np.log(2.0)
    log_k -= log_k.max(1, keepdims=True)
    kernel = np.exp(log_k)
    m = np.full(keep.size, 1.0 / keep.size)
    rates, lagr = [], []
    prev, delta = np.inf, np.inf
    for it in range(1, max_iter + 1):
        w = kernel * m
        q = w / w.sum(1, keepdims=True)
        m = p @ q
        rate = _mi(p, q, m)
        d = float((p[:, None] * q * r).sum())
        rates.append(rate)
        lagr.append(rate + lam * d)
        delta = abs(prev - rate)
        if delta < tol:
            break
        prev = rate
    else:
        raise ConvergenceError(
            f"Blahut-Arimoto did not converge in {max_iter} iterations", residual=delta
        )
    channel = np.zeros((p.size, n_rec))
    channel[:, keep] = q
    output = np.zeros(n_rec)
    output[keep] = m
    return BAResult(rate, d, channel, output, lam, it, rates, lagr)


def _mi(p, q, m) -> float:
    joint = p[:, None] * q
    mask = joint > 0
    mm = np.broadcast_to(m, q.shape)
    return float(max(0.0, (joint[mask] * np.log2(q[mask] / mm[mask])).sum()))


def rd_curve(source, distortion, lams: Iterable[float], tol: float = 1e-9, n_jobs: int | None = None) -> list[BAResult]:
    fn = functools.partial(_ba_point, source=_source_probs(source), distortion=np.asarray(distortion), tol=tol)
    return ordered_map(fn, list(lams), n_jobs)


def _ba_point(lam, source, distortion, tol):
    return blahut_arimoto(source, distortion, lam, tol)


def rate_at_distortion(source, distortion, target: float, tol: float = 1e-9, lam_max: float = 1e4) -> BAResult:
    """R_I at a target distortion by bisection on the slope (in log space)."""
    p = _source_probs(source)
    rho = _check_distortion(distortion, p.size)
    zero = blahut_arimoto(p, rho, 0.0)
    if target >= zero.distortion:
        return zero
    lo, hi = 1e-6, lam_max
    best = blahut_arimoto(p, rho, hi, tol)
    if best.distortion > target:
        return best
    for _ in range(100):
        mid = np.sqrt(lo * hi)
        res = blahut_arimoto(p, rho, mid, tol)
        if res.distortion > target:
            lo = mid
        else:
            hi, best = mid, res
        if hi / lo < 1 + 1e-12 or abs(best.distortion - target) < 1e-12:
            break
    return best


def interpolate_rate(results: Sequence[BAResult], distortion: float) -> float:
    """R_I(D) by linear interpolation on the computed (convex) points."""
    pts = sorted((r.distortion, r.rate) for r in results)
    ds = np.array([p[0] for p in pts])
    rs = np.array([p[1] for p in pts])
    return float(np.interp(distortion, ds, rs))


# operational sweeps


@dataclass(frozen=True)
class RDPoint:
    param: float
    rate_bits: float
    distortion: float
    label: str = ""


def rd_sweep(
    evaluate: Callable[[float, object], tuple[float, float]],
    params: Iterable[float],
    dataset,
    label: str = "",
    n_jobs: int | None = None,
) -> list[RDPoint]:
    """Operational (R, D) for each parameter.

    ``evaluate(param, dataset)`` must actually code the data and return
    ``(rate in bits per sample, distortion)``.
    """
    params = list(params)
    fn = functools.partial(_sweep_point, evaluate=evaluate, dataset=dataset)
    out = ordered_map(fn, params, n_jobs)
    return [RDPoint(float(p), float(r), float(d), label) for p, (r, d) in zip(params, out)]


def _sweep_point(param, evaluate, dataset):
    return evaluate(param, dataset)


def write_rd_csv(rows, out=None) -> str:
    """Write (lambda, rate_bits, distortion, label) rows; returns the CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        if isinstance(row, RDPoint):
            row = (row.param, row.rate_bits, row.distortion, row.label)
        elif isinstance(row, BAResult):
            row = (row.lam, row.rate, row.distortion, "information")
        lam, rate, dist, label = row
        w.writerow((repr(float(lam)), repr(float(rate)), repr(float(dist)), label))
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", newline="") as fh:
                fh.write(text)
    return text


__all__ = [
    "BAResult",
    "CSV_COLUMNS",
    "RDPoint",
    "blahut_arimoto",
    "hamming_distortion",
    "interpolate_rate",
    "mutual_information",
    "rate_at_distortion",
    "rd_curve",
    "rd_sweep",
    "squared_distortion",
    "write_rd_csv",
]
