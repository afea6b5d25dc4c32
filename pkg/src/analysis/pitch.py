"""
基频估计
Fundamental-frequency estimate: autocorrelation period, then a windowed spectral peak near it.
"""

import logging
import math

import numpy as np
from scipy.fft import next_fast_len, rfft
from scipy.signal import correlate, find_peaks, get_window

from .modes import ModeTable
from ..core.engine import RenderResult
from ..core.errors import UnvoicedError

logger = logging.getLogger(__name__)

VOICING_THRESHOLD = 0.3
SEARCH_BAND = 0.08
ZERO_PAD = 8


def parabolic_offset(left: float, center: float, right: float) -> float:
    """Vertex offset (in samples, within +-0.5) of the parabola through three points."""
    denom = left - 2.0 * center + right
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def acf_period(x: np.ndarray, sample_rate: float, fmin: float, fmax: float, voicing: float) -> float:
    """Period in (fractional) samples from the normalized autocorrelation."""
    r = correlate(x, x, mode="full", method="fft")[len(x) - 1:]
    if not r[0] > 0:
        raise UnvoicedError("signal has no energy")
    r = r / r[0]
    lag_min = max(1, int(math.floor(sample_rate / fmax)))
    lag_max = min(int(math.ceil(sample_rate / fmin)), len(r) - 2)
    if lag_max <= lag_min + 1:
        raise UnvoicedError("signal too short for the requested pitch range")
    window = r[lag_min: lag_max + 1]
    peaks, _ = find_peaks(window)
    if peaks.size == 0:
        raise UnvoicedError("no periodicity in the autocorrelation")
    heights = window[peaks]
    best = heights.max()
    if best < voicing:
        raise UnvoicedError(f"autocorrelation peak {best:.2f} below voicing threshold {voicing}")
    # earliest peak close to the best one avoids picking a multiple of the period
    lag = lag_min + int(peaks[np.argmax(heights >= 0.9 * best)])
    return lag + parabolic_offset(r[lag - 1], r[lag], r[lag + 1])


def spectral_refine(x: np.ndarray, sample_rate: float, estimate: float, band: float = SEARCH_BAND) -> float:
    n_fft = next_fast_len(len(x) * ZERO_PAD)
    magnitude = np.abs(rfft(x * get_window("hann", len(x)), n_fft))
    freqs = np.arange(len(magnitude)) * sample_rate / n_fft
    lo, hi = np.searchsorted(freqs, [estimate * (1 - band), estimate * (1 + band)])
    lo, hi = max(lo, 1), min(hi, len(magnitude) - 1)
    if hi <= lo:
        return estimate
    peak = lo + int(np.argmax(magnitude[lo:hi]))
    log_mag = np.log(np.maximum(magnitude[peak - 1: peak + 2], 1e-300))
    return float((peak + parabolic_offset(*log_mag)) * sample_rate / n_fft)


def estimate_f0(
    samples: np.ndarray,
    sample_rate: float,
    fmin: float = 50.0,
    fmax: float = 4000.0,
    tail: float = 0.5,
    voicing: float = VOICING_THRESHOLD,
) -> float:
    """
    Fundamental of the final ``tail`` fraction of a signal, in Hz.

    Raises UnvoicedError on silence or aperiodic input.
    """
    x = np.asarray(samples, dtype=float)
    x = x[int(len(x) * (1.0 - tail)):]
    if x.size < 4:
        raise UnvoicedError("signal too short")
    x = x - x.mean()
    if not np.any(x) or not np.all(np.isfinite(x)):
        raise UnvoicedError("silent or non-finite signal")
    period = acf_period(x, sample_rate, fmin, fmax, voicing)
    coarse = sample_rate / period
    refined = spectral_refine(x, sample_rate, coarse)
    logger.debug(f"f0 estimate: autocorrelation {coarse:.3f} Hz, refined {refined:.3f} Hz")
    return refined


def detune(render: RenderResult, expected: ModeTable) -> float:
    """
    失谐量
    Signed difference between the estimated fundamental of a render and the lowest reference mode.

    Args:
        render: finished render, its own sample rate is used
        expected: reference modes, only the first is used

    Returns:
        f_est - f_1 in Hz

    Raises:
        TypeError: for anything but a RenderResult (use estimate_f0 on bare arrays)
    """
    if not isinstance(render, RenderResult):
        raise TypeError(f"detune needs a RenderResult, got {type(render).__name__}")
    return estimate_f0(render.samples, render.sample_rate) - float(expected.modes[0])
