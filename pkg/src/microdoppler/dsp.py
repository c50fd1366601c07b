"""Spectrogram and range-Doppler processing of I/Q series.

Turns raw complex returns into denoised, fixed-size micro-Doppler
spectrograms and range-Doppler cubes, and provides the input-dimensionality
diagnostic used to justify the 65x65 working size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal
from scipy.spatial import ConvexHull, QhullError

from .errors import DataError, DomainError, ShapeError
from .sim import IqSeries, RadarConfig

_SPEC_CSV_MAGIC = "# microdoppler-spectrogram v1"
_CUBE_MAGIC = b"MICRODOPPLER-RD1"

DEFAULT_HPF_CUTOFF_HZ = 15.0
DEFAULT_STFT_WINDOW = 128
TARGET_SIZE = 65


@dataclass(frozen=True)
class Spectrogram:
    """Time-Doppler magnitude-squared image.

    Rows are Doppler bins (Hz, zero-centred, ``freq_axis`` strictly
    increasing); columns are time frames at the instants in ``time_axis``.
    """

    values: np.ndarray
    freq_axis: np.ndarray
    time_axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "freq_axis", np.asarray(self.freq_axis, dtype=float))
        object.__setattr__(self, "time_axis", np.asarray(self.time_axis, dtype=float))
        if self.values.ndim != 2:
            raise ShapeError("spectrogram values must be 2-D")
        if self.values.shape != (self.freq_axis.size, self.time_axis.size):
            raise ShapeError("axis lengths do not match the value grid")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DomainError("spectrogram values must be finite and non-negative")
        if self.freq_axis.size > 1 and not np.all(np.diff(self.freq_axis) > 0):
            raise DomainError("freq_axis must be strictly increasing")

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class RangeDopplerCube:
    """Per-frame range-Doppler magnitude maps, dims = range x Doppler x frame."""

    values: np.ndarray
    range_bin_m: float
    doppler_bin_hz: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 3:
            raise ShapeError("cube values must be 3-D")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DomainError("cube values must be finite and non-negative")
        if self.range_bin_m <= 0 or self.doppler_bin_hz <= 0:
            raise DomainError("bin sizes must be positive")

    @property
    def shape(self):
        return self.values.shape


def highpass_filter(iq: IqSeries, cutoff_hz: float) -> IqSeries:
    """Remove stationary-clutter content below ``cutoff_hz``.

    4th-order Butterworth high-pass applied forward-backward (zero phase),
    so burst timing is preserved.  The forward-backward pass squares the
    magnitude response; passband ripple is zero by the maximally-flat design.
    """
    fs = iq.sample_rate
    if not 0.0 < cutoff_hz < fs / 2.0:
        raise DomainError("cutoff must lie in (0, sample_rate/2)")
    sos = _signal.butter(4, cutoff_hz, btype="highpass", fs=fs, output="sos")
    x = iq.samples
    y = _signal.sosfiltfilt(sos, x.real) + 1j * _signal.sosfiltfilt(sos, x.imag)
    return IqSeries(y, fs)


def stft_spectrogram(iq: IqSeries, window_len: int,
                     overlap_frac: float = 0.5) -> Spectrogram:
    """Squared-magnitude STFT with a Hann window, 50% overlap by default.

    Frame t is |DFT(hann . segment_t)|^2 / W, fft-shifted so 0 Hz sits at the
    centre row.  The 1/W normalisation makes the column sum equal the
    windowed-segment energy (Parseval).  Frame count is
    floor((N - W)/hop) + 1 with hop = W*(1 - overlap_frac).
    """
    n = len(iq)
    w = int(window_len)
    if w < 2:
        raise DomainError("window_len must be >= 2")
    if w > n:
        raise ShapeError("window longer than the series")
    if not 0.0 <= overlap_frac < 1.0:
        raise DomainError("overlap_frac must lie in [0, 1)")
    hop = max(1, int(round(w * (1.0 - overlap_frac))))
    n_frames = (n - w) // hop + 1
    window = np.hanning(w)
    frames = np.lib.stride_tricks.sliding_window_view(iq.samples, w)[::hop][:n_frames]
    spectra = np.fft.fftshift(np.fft.fft(frames * window, axis=1), axes=1)
    values = (np.abs(spectra) ** 2 / w).T
    freq_axis = np.fft.fftshift(np.fft.fftfreq(w, d=1.0 / iq.sample_rate))
    time_axis = (np.arange(n_frames) * hop + w / 2.0) / iq.sample_rate
    return Spectrogram(values, freq_axis, time_axis)


def isodata_threshold(spec: Spectrogram, rel_tol: float = 1e-6,
                      max_iter: int = 500):
    """Find the isodata fixed-point threshold and zero everything below it.

    Iterates T <- (mean(values < T) + mean(values >= T)) / 2 from the global
    mean until |dT| < rel_tol * dynamic range.  A constant image is its own
    degenerate fixed point: the threshold is that constant and the image is
    returned unchanged.  Returns ``(threshold, denoised)``.
    """
    v = spec.values.ravel()
    if v.size == 0:
        raise ShapeError("empty spectrogram")
    vmin, vmax = float(v.min()), float(v.max())
    if vmax == vmin:
        return vmin, Spectrogram(spec.values.copy(), spec.freq_axis, spec.time_axis)
    t = float(v.mean())
    tol = rel_tol * (vmax - vmin)
    for _ in range(max_iter):
        below = v[v < t]
        above = v[v >= t]
        if below.size == 0 or above.size == 0:
            break
        t_new = 0.5 * (float(below.mean()) + float(above.mean()))
        if abs(t_new - t) < tol:
            t = t_new
            break
        t = t_new
    denoised = np.where(spec.values >= t, spec.values, 0.0)
    return t, Spectrogram(denoised, spec.freq_axis, spec.time_axis)


def resize_spectrogram(spec: Spectrogram, out_rows: int = TARGET_SIZE,
                       out_cols: int = TARGET_SIZE) -> Spectrogram:
    """Bilinear resample onto an ``out_rows x out_cols`` grid.

    Corner-aligned mapping: source coordinate of output row i is
    i*(R-1)/(out_rows-1), so a same-size resample is the identity and
    constants are preserved exactly.
    """
    rows, cols = spec.values.shape
    if rows < 2 or cols < 2:
        raise ShapeError("input spectrogram must be at least 2x2")
    if out_rows < 2 or out_cols < 2:
        raise DomainError("target dimensions must be at least 2x2")
    src_r = np.linspace(0.0, rows - 1.0, out_rows)
    src_c = np.linspace(0.0, cols - 1.0, out_cols)
    r0 = np.floor(src_r).astype(int)
    c0 = np.floor(src_c).astype(int)
    r1 = np.minimum(r0 + 1, rows - 1)
    c1 = np.minimum(c0 + 1, cols - 1)
    wr = (src_r - r0)[:, None]
    wc = (src_c - c0)[None, :]
    v = spec.values
    top = v[np.ix_(r0, c0)] * (1.0 - wc) + v[np.ix_(r0, c1)] * wc
    bot = v[np.ix_(r1, c0)] * (1.0 - wc) + v[np.ix_(r1, c1)] * wc
    out = np.maximum(top * (1.0 - wr) + bot * wr, 0.0)
    freq_axis = np.interp(src_r, np.arange(rows), spec.freq_axis)
    time_axis = np.interp(src_c, np.arange(cols), spec.time_axis)
    return Spectrogram(out, freq_axis, time_axis)


def range_doppler_cube(iq: IqSeries, config: RadarConfig, samples_per_sweep: int,
                       frames: int, doppler_window: int) -> RangeDopplerCube:
    """Stack per-frame 2-D FFT magnitude maps from consecutive FMCW sweeps.

    Each frame consumes ``doppler_window`` sweeps of ``samples_per_sweep``
    fast-time samples; the fast-time FFT gives range bins of c/(2*bandwidth)
    metres, the slow-time FFT (fft-shifted) gives Doppler bins of
    sweep_rate/doppler_window Hz.  Frames do not overlap.
    """
    if samples_per_sweep < 1 or doppler_window < 1 or frames < 1:
        raise DomainError("cube geometry counts must be >= 1")
    needed = samples_per_sweep * doppler_window * frames
    if len(iq) < needed:
        raise ShapeError(f"need {needed} samples, series has {len(iq)}")
    cube = np.empty((samples_per_sweep, doppler_window, frames))
    block_len = samples_per_sweep * doppler_window
    for f in range(frames):
        block = iq.samples[f * block_len:(f + 1) * block_len]
        sweeps = block.reshape(doppler_window, samples_per_sweep)
        rd = np.fft.fft(sweeps, axis=1)              # fast time -> range
        rd = np.fft.fftshift(np.fft.fft(rd, axis=0), axes=0)  # slow time -> Doppler
        cube[:, :, f] = np.abs(rd).T
    return RangeDopplerCube(cube, config.range_resolution(),
                            config.sweep_rate / doppler_window)


def pca_hull_area(specs: list[Spectrogram], candidate_dims: list[tuple[int, int]],
                  n_components: int = 2) -> list[tuple[tuple[int, int], float]]:
    """Convex-hull area of the PCA feature space at each candidate image size.

    For every ``(rows, cols)`` candidate the spectrograms are resampled,
    flattened and projected onto the leading principal components; the area
    of the 2-D convex hull of the projected points is recorded.  The
    resulting size-vs-area curve levels off once the input dimension stops
    adding information.
    """
    if n_components != 2:
        raise DomainError("hull area is defined for n_components=2")
    if len(specs) < n_components + 1:
        raise DomainError("need at least n_components+1 spectrograms")
    curve = []
    for rows, cols in candidate_dims:
        x = np.stack([resize_spectrogram(s, rows, cols).values.ravel()
                      for s in specs])
        xc = x - x.mean(axis=0)
        _, _, vt = np.linalg.svd(xc, full_matrices=False)
        pts = xc @ vt[:n_components].T
        curve.append(((rows, cols), hull_area_2d(pts)))
    return curve


def hull_area_2d(points: np.ndarray) -> float:
    """Area of the 2-D convex hull; degenerate point sets have zero area."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError("points must be n x 2")
    if pts.shape[0] < 3:
        raise DomainError("need at least 3 points for a 2-D hull")
    try:
        return float(ConvexHull(pts).volume)  # qhull 'volume' is area in 2-D
    except QhullError:
        return 0.0


def saturation_diagnostic(curve) -> float:
    """Relative area change between the two largest candidate sizes."""
    if len(curve) < 2:
        raise DomainError("need at least two candidate sizes")
    ordered = sorted(curve, key=lambda item: item[0][0] * item[0][1])
    a_prev, a_last = ordered[-2][1], ordered[-1][1]
    return abs(a_last - a_prev) / max(abs(a_prev), 1e-300)


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def spectrogram_to_csv(path, spec: Spectrogram) -> None:
    """Exact-interchange CSV: axis comments, then one f64 row per Doppler bin."""
    with open(path, "w") as fh:
        fh.write(_SPEC_CSV_MAGIC + "\n")
        fh.write("# freq_hz: " + ",".join(repr(float(v)) for v in spec.freq_axis) + "\n")
        fh.write("# time_s: " + ",".join(repr(float(v)) for v in spec.time_axis) + "\n")
        for row in spec.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def spectrogram_from_csv(path) -> Spectrogram:
    freq = time = None
    rows = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != _SPEC_CSV_MAGIC:
            raise DataError(f"{path}: not a spectrogram CSV")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# freq_hz:"):
                freq = np.array([float(v) for v in line.split(":", 1)[1].split(",")])
            elif line.startswith("# time_s:"):
                time = np.array([float(v) for v in line.split(":", 1)[1].split(",")])
            elif line.startswith("#"):
                continue
            else:
                rows.append([float(v) for v in line.split(",")])
    if freq is None or time is None:
        raise DataError(f"{path}: missing axis headers")
    return Spectrogram(np.array(rows), freq, time)


def spectrogram_to_pgm(path, spec: Spectrogram, floor_db: float = -60.0) -> None:
    """8-bit binary PGM, log-scaled.

    Pixels are 10*log10(v/vmax) clipped to [floor_db, 0] and mapped linearly
    onto 0..255; an all-zero image renders black.  Row-major, top row is the
    highest Doppler bin.
    """
    v = spec.values
    vmax = float(v.max())
    if vmax <= 0.0:
        img = np.zeros(v.shape, dtype=np.uint8)
    else:
        floor = vmax * 10.0 ** (floor_db / 10.0)
        db = 10.0 * np.log10(np.maximum(v, floor) / vmax)
        img = np.round(255.0 * (db - floor_db) / (-floor_db)).astype(np.uint8)
    img = img[::-1]  # render high Doppler at the top
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def cube_to_binary(path, cube: RangeDopplerCube) -> None:
    """Flat binary cube: magic, u32 dims triple, f64 bin sizes, f64 values."""
    with open(path, "wb") as fh:
        fh.write(_CUBE_MAGIC)
        n_r, n_d, n_f = cube.values.shape
        fh.write(struct.pack("<IIIdd", n_r, n_d, n_f,
                             cube.range_bin_m, cube.doppler_bin_hz))
        fh.write(cube.values.astype("<f8").tobytes())


def cube_from_binary(path) -> RangeDopplerCube:
    with open(path, "rb") as fh:
        if fh.read(16) != _CUBE_MAGIC:
            raise DataError(f"{path}: not a range-Doppler cube file")
        n_r, n_d, n_f, rbin, dbin = struct.unpack("<IIIdd", fh.read(28))
        raw = np.frombuffer(fh.read(8 * n_r * n_d * n_f), dtype="<f8")
        if raw.size != n_r * n_d * n_f:
            raise DataError(f"{path}: truncated cube payload")
    return RangeDopplerCube(raw.reshape(n_r, n_d, n_f).copy(), rbin, dbin)
