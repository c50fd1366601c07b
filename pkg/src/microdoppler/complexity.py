"""Intensity-weighted velocity diagrams and fractal complexity exponents.

A range-Doppler cube is collapsed into a velocity-vs-time histogram where
every pixel contributes its intensity to the bin of its radial velocity.
The temporal power spectrum of that diagram follows an approximate power
law M(j, f) = a / |f|^beta; the exponent is estimated by ordinary least
squares on the log-log spectrum.  Lower beta means a flatter spectrum and
hence richer motion dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError, ShapeError
from .dsp import RangeDopplerCube
from .sim import SPEED_OF_LIGHT

ALL_BINS = None  # sentinel for fit_fractal: integrate over velocity first

DEFAULT_VELOCITY_BINS = 64
DEFAULT_WELCH_SEGMENT = 64


@dataclass(frozen=True)
class IwvDiagram:
    """Velocity-binned intensity over time; rows = velocity bins, cols = frames."""

    values: np.ndarray
    velocity_axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "velocity_axis",
                           np.asarray(self.velocity_axis, dtype=float))
        if self.values.ndim != 2:
            raise ShapeError("IWV values must be 2-D")
        if self.velocity_axis.size != self.values.shape[0]:
            raise ShapeError("velocity axis length must match the row count")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise DomainError("IWV values must be finite and non-negative")

    @property
    def n_frames(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class PsdMatrix:
    """Per-velocity-bin temporal power spectral density M(j, f)."""

    values: np.ndarray
    freq_axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "freq_axis", np.asarray(self.freq_axis, dtype=float))
        if self.values.ndim != 2 or self.freq_axis.size != self.values.shape[1]:
            raise ShapeError("PSD matrix must be rows x frequency bins")
        if np.any(self.values < 0):
            raise DomainError("PSD values must be non-negative")


@dataclass(frozen=True)
class FractalFit:
    """Log-log power-law fit ln M = ln_a - beta * ln f."""

    beta: float
    ln_a: float
    r2: float
    n_excluded: int = 0   # zero-magnitude bins dropped before fitting


@dataclass(frozen=True)
class GroupComplexity:
    mean_beta: float
    std_beta: float
    n: int
    ci95: float


def iwv_diagram(cube: RangeDopplerCube, fc: float,
                n_velocity_bins: int = DEFAULT_VELOCITY_BINS) -> IwvDiagram:
    """Bin range-Doppler intensity by radial velocity, per frame.

    Pixel Doppler f maps to v = f*c/(2*fc); intensities are accumulated into
    ``n_velocity_bins`` uniform bins spanning the cube's velocity extent, so
    per-frame mass is conserved exactly.
    """
    n_range, n_doppler, n_frames = cube.values.shape
    if n_frames < 1 or n_range < 1:
        raise ShapeError("empty cube")
    if n_velocity_bins < 2:
        raise DomainError("need at least two velocity bins")
    if n_doppler < 2:
        raise DomainError("cube has zero-extent velocity range")
    doppler_hz = (np.arange(n_doppler) - n_doppler // 2) * cube.doppler_bin_hz
    velocities = doppler_hz * SPEED_OF_LIGHT / (2.0 * fc)
    lo, hi = velocities[0], velocities[-1]
    edges = np.linspace(lo, hi, n_velocity_bins + 1)
    idx = np.clip(np.searchsorted(edges, velocities, side="right") - 1,
                  0, n_velocity_bins - 1)
    out = np.zeros((n_velocity_bins, n_frames))
    doppler_mass = cube.values.sum(axis=0)  # integrate over range: (doppler, frame)
    np.add.at(out, idx, doppler_mass)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return IwvDiagram(out, centers)


def welch_psd(iwv, segment_len: int = DEFAULT_WELCH_SEGMENT,
              overlap_frac: float = 0.5, frame_rate: float = 1.0) -> PsdMatrix:
    """Welch-averaged temporal PSD of every velocity row.

    Hann-windowed periodograms over 50%-overlapped segments, averaged; no
    detrending, so a constant row keeps its energy in the DC main lobe
    (bins 0 and 1 under the Hann window) and is zero beyond it.  Accepts an
    ``IwvDiagram`` or any rows-by-frames array (test signals may be signed).
    The IWV diagram carries no time base of its own, so frequencies are
    expressed against ``frame_rate`` (frames per second; the default leaves
    them in cycles per frame, which only shifts the fitted intercept, never
    beta).
    """
    rows = iwv.values if isinstance(iwv, IwvDiagram) else np.atleast_2d(
        np.asarray(iwv, dtype=float))
    n_frames = rows.shape[1]
    seg = int(segment_len)
    if seg < 2:
        raise DomainError("segment_len must be >= 2")
    if seg > n_frames:
        raise ShapeError("segment longer than the frame series")
    if not 0.0 <= overlap_frac < 1.0:
        raise DomainError("overlap_frac must lie in [0, 1)")
    hop = max(1, int(round(seg * (1.0 - overlap_frac))))
    n_segs = (n_frames - seg) // hop + 1
    # periodic Hann: a constant row leaks into bins 0 and 1 only
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(seg) / seg))
    wnorm = float(np.sum(window**2))
    psd = np.zeros((rows.shape[0], seg // 2 + 1))
    for s in range(n_segs):
        chunk = rows[:, s * hop:s * hop + seg] * window
        psd += np.abs(np.fft.rfft(chunk, axis=1)) ** 2 / wnorm
    psd /= n_segs
    freq_axis = np.fft.rfftfreq(seg, d=1.0 / frame_rate)
    return PsdMatrix(psd, freq_axis)


def fit_fractal(psd: PsdMatrix, j=ALL_BINS) -> FractalFit:
    """Least-squares power-law exponent of one velocity row, or of the sum.

    With ``j=ALL_BINS`` the matrix is first integrated over velocity bins and
    the fit returns the overall exponent beta-bar.  The DC bin and
    zero-magnitude bins are excluded (the count is reported); at least three
    usable bins are required.
    """
    if j is ALL_BINS:
        m = psd.values.sum(axis=0)
    else:
        m = psd.values[int(j)]
    positive_f = psd.freq_axis > 0
    usable = positive_f & (m > 0)
    n_excluded = int(positive_f.sum() - usable.sum())
    if usable.sum() < 3:
        raise InsufficientDataError("fewer than 3 usable frequency bins")
    x = np.log(psd.freq_axis[usable])
    y = np.log(m[usable])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res < 1e-12 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return FractalFit(beta=float(-slope), ln_a=float(intercept), r2=r2,
                      n_excluded=n_excluded)


def compare_complexity(groups: dict[str, list[IwvDiagram]],
                       segment_len: int = DEFAULT_WELCH_SEGMENT,
                       overlap_frac: float = 0.5) -> dict[str, GroupComplexity]:
    """Mean overall exponent beta-bar per labelled group of IWV diagrams."""
    out = {}
    for label, diagrams in groups.items():
        if not diagrams:
            raise DomainError(f"group {label!r} is empty")
        betas = []
        for d in diagrams:
            psd = welch_psd(d, segment_len=segment_len, overlap_frac=overlap_frac)
            betas.append(fit_fractal(psd, ALL_BINS).beta)
        arr = np.asarray(betas)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        out[label] = GroupComplexity(mean_beta=float(arr.mean()), std_beta=std,
                                     n=arr.size,
                                     ci95=1.96 * std / math.sqrt(arr.size))
    return out


def power_law_noise(beta: float, n_samples: int, seed: int,
                    f_min: float = 0.0) -> np.ndarray:
    """Zero-mean real series whose PSD falls off as 1/f^beta.

    Spectral shaping: unit-variance complex Gaussian harmonics scaled by
    f^(-beta/2) (DC forced to zero), inverse real FFT.  Frequencies below
    ``f_min`` (cycles per sample) carry no power; setting f_min to the
    reciprocal of the analysis segment length makes the process a pure power
    law over the band a short-segment Welch estimate can resolve, which is
    what the exponent-recovery round trip needs.
    """
    if n_samples < 4:
        raise DomainError("n_samples must be >= 4")
    rng = np.random.default_rng(seed)
    freqs = np.fft.rfftfreq(n_samples, d=1.0)
    spectrum = np.zeros(freqs.size, dtype=complex)
    g = rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)
    shaped = freqs >= max(f_min, freqs[1])
    spectrum[shaped] = freqs[shaped] ** (-beta / 2.0) * g[shaped] / math.sqrt(2.0)
    return np.fft.irfft(spectrum, n=n_samples)


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def iwv_to_csv(path, iwv: IwvDiagram) -> None:
    with open(path, "w") as fh:
        fh.write("# microdoppler-iwv v1\n")
        fh.write("# velocity_mps: " + ",".join(repr(float(v)) for v in iwv.velocity_axis) + "\n")
        for row in iwv.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def psd_to_csv(path, psd: PsdMatrix) -> None:
    with open(path, "w") as fh:
        fh.write("# microdoppler-psd v1\n")
        fh.write("# freq_hz: " + ",".join(repr(float(v)) for v in psd.freq_axis) + "\n")
        for row in psd.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def complexity_report(results: dict[str, GroupComplexity]) -> str:
    """Small structured text report: label, mean beta-bar, std, n."""
    lines = ["label,mean_beta,std_beta,n,ci95"]
    for label in sorted(results):
        g = results[label]
        lines.append(f"{label},{g.mean_beta:.6f},{g.std_beta:.6f},{g.n},{g.ci95:.6f}")
    return "\n".join(lines) + "\n"
