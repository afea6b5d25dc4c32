"""
频谱分析
Log-magnitude spectra with peak picking, STFT export and the inter-modal (phantom partial) energy ratio.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.fft import rfft
from scipy.signal import find_peaks, get_window, stft

from .modes import ModeTable
from .pitch import parabolic_offset

FLOOR_DB = -80.0
PROMINENCE_DB = 6.0
_TINY = 1e-300


@dataclass
class SpectrumReport:
    frequencies: np.ndarray
    magnitudes_db: np.ndarray
    peak_frequencies: np.ndarray
    peak_magnitudes_db: np.ndarray
    sample_rate: float
    fft_size: int
    window: str
    floor_db: float = FLOOR_DB

    @property
    def resolution(self) -> float:
        return self.sample_rate / self.fft_size

    def power(self) -> np.ndarray:
        return 10.0 ** (self.magnitudes_db / 10.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sample_rate": self.sample_rate,
            "fft_size": self.fft_size,
            "window": self.window,
            "floor_db": self.floor_db,
            "peaks": [
                {"frequency": float(f), "magnitude_db": float(m)}
                for f, m in zip(self.peak_frequencies, self.peak_magnitudes_db)
            ],
        }

    def save(self, path: Union[str, Path]) -> None:
        """Write ``<path>`` as two-column text (Hz, dB) and ``<path>.json`` with the peaks."""
        path = Path(path)
        np.savetxt(
            path,
            np.column_stack([self.frequencies, self.magnitudes_db]),
            delimiter="\t",
            header="frequency_hz\tmagnitude_db",
        )
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def spectrum(
    samples: np.ndarray,
    sample_rate: float,
    window: str = "hann",
    fft_size: Optional[int] = None,
    floor_db: float = FLOOR_DB,
    prominence_db: float = PROMINENCE_DB,
) -> SpectrumReport:
    """
    Windowed log-magnitude spectrum, 0 dB at the strongest bin.

    ``fft_size`` defaults to the signal length. Peaks are local maxima above
    ``floor_db`` with at least ``prominence_db`` prominence; both spectrum
    edges count as candidates.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("spectrum of an empty signal")
    n_fft = int(fft_size or x.size)
    if n_fft < x.size:
        raise ValueError(f"fft_size {n_fft} shorter than the signal ({x.size})")
    magnitude = np.abs(rfft(x * get_window(window, x.size), n_fft))
    reference = magnitude.max()
    if reference > 0:
        magnitude = magnitude / reference
    db = 20.0 * np.log10(np.maximum(magnitude, _TINY))
    freqs = np.arange(db.size) * sample_rate / n_fft

    pad = db.min() - prominence_db - 1.0
    padded = np.concatenate([[pad], db, [pad]])
    found, _ = find_peaks(padded, height=floor_db, prominence=prominence_db)
    bins = found - 1

    refined = np.empty(bins.size)
    for i, b in enumerate(bins):
        if 0 < b < db.size - 1:
            refined[i] = (b + parabolic_offset(db[b - 1], db[b], db[b + 1])) * sample_rate / n_fft
        else:
            refined[i] = freqs[b]
    return SpectrumReport(
        frequencies=freqs,
        magnitudes_db=db,
        peak_frequencies=refined,
        peak_magnitudes_db=db[bins],
        sample_rate=sample_rate,
        fft_size=n_fft,
        window=window,
        floor_db=floor_db,
    )


@dataclass
class Spectrogram:
    times: np.ndarray
    frequencies: np.ndarray
    magnitudes_db: np.ndarray

    def save(self, path: Union[str, Path]) -> None:
        """Rows are time frames; first column is time, header lists the bin frequencies."""
        header = "time_s\t" + "\t".join(f"{f:.3f}" for f in self.frequencies)
        np.savetxt(path, np.column_stack([self.times, self.magnitudes_db.T]), delimiter="\t", header=header)


def spectrogram(
    samples: np.ndarray,
    sample_rate: float,
    window: str = "hann",
    nperseg: int = 2048,
    noverlap: Optional[int] = None,
) -> Spectrogram:
    x = np.asarray(samples, dtype=float)
    nperseg = min(nperseg, max(x.size, 1))
    freqs, times, Z = stft(x, fs=sample_rate, window=window, nperseg=nperseg, noverlap=noverlap)
    magnitude = np.abs(Z)
    reference = magnitude.max() if magnitude.size else 0.0
    if reference > 0:
        magnitude = magnitude / reference
    return Spectrogram(times, freqs, 20.0 * np.log10(np.maximum(magnitude, _TINY)))


def phantom_partial_energy(report: SpectrumReport, modes: ModeTable, band: float) -> float:
    """
    Inter-modal energy relative to total energy, in dB.

    Only bins up to the last mode plus ``band`` count. Bins within ``band`` Hz
    of any mode are modal; the rest are inter-modal.
    """
    if band < 0:
        raise ValueError(f"band must be ≥ 0 (got {band})")
    freqs = report.frequencies
    upper = float(modes.modes[-1]) + band
    in_range = freqs <= upper
    distance = np.min(np.abs(freqs[:, None] - np.asarray(modes.modes)[None, :]), axis=1)
    inter = in_range & (distance > band)
    if not np.any(inter):
        raise ValueError(f"band {band} Hz leaves no inter-modal bins below {upper:.1f} Hz")
    power = report.power()
    total = power[in_range].sum()
    return float(10.0 * np.log10(max(power[inter].sum(), _TINY) / total))
