"""Point-scatterer synthesis of complex baseband radar returns.

A human articulator is modelled as a small set of point scatterers, each
described by a time-sampled radial range trajectory and a radar cross
section.  The received series is the coherent superposition of the
per-scatterer phasors at the carrier, evaluated at complex baseband (no
carrier is simulated).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError, ShapeError

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

NO_NOISE = math.inf  # sentinel SNR for add_noise: leave the series untouched

_IQ_MAGIC = b"MICRODOPPLER-IQ1"  # 16 bytes, version digit included


@dataclass(frozen=True)
class RadarConfig:
    """Transmit, antenna and waveform parameters of one sensor.

    Gains, transmit power and losses are linear (not dB).  Defaults make the
    received amplitude depend on geometry and RCS only, which is all the
    downstream stages need.
    """

    fc: float                    # carrier frequency, Hz
    bandwidth: float             # sweep bandwidth, Hz
    sample_rate: float           # complex samples per second, Hz
    sweep_rate: float            # FMCW sweeps per second, Hz
    g_tx: float = 1.0
    g_rx: float = 1.0
    p_t: float = 1.0             # transmit power, W
    l_s: float = 1.0             # system losses, >= 1
    l_a: float = 1.0             # atmospheric losses, >= 1
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("fc", "bandwidth", "sample_rate", "sweep_rate"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.l_s < 1 or self.l_a < 1:
            raise DomainError("losses l_s, l_a must be >= 1")
        if self.g_tx <= 0 or self.g_rx <= 0 or self.p_t <= 0:
            raise DomainError("gains and transmit power must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.fc

    def range_resolution(self) -> float:
        """Range bin extent c/(2*bandwidth), metres."""
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)


@dataclass(frozen=True)
class ScattererTrack:
    """Radial range trajectory (m, one value per sample instant) and RCS (m^2)."""

    ranges: np.ndarray
    rcs: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "ranges", np.asarray(self.ranges, dtype=float))
        if self.ranges.ndim != 1:
            raise ShapeError("ranges must be one-dimensional")
        if not np.all(self.ranges > 0):
            raise DomainError("all ranges must be positive")
        if self.rcs < 0:
            raise DomainError("rcs must be non-negative")

    def __len__(self):
        return self.ranges.size


@dataclass(frozen=True)
class IqSeries:
    """Complex baseband samples (dimensionless voltage units) at a fixed rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if self.samples.ndim != 1:
            raise ShapeError("samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples.real) & np.isfinite(self.samples.imag)):
            raise DomainError("samples must be finite")
        if self.sample_rate <= 0:
            raise DomainError("sample_rate must be positive")

    def __len__(self):
        return self.samples.size


def received_amplitude(config: RadarConfig, range_m, rcs: float):
    """Received-voltage amplitude of one scatterer.

    a = sqrt(g_tx*g_rx) * lambda * sqrt(p_t*rcs) / ((4*pi)^(3/2) * R^2 * sqrt(l_s*l_a))

    ``range_m`` may be a scalar or an array of ranges; the result has the
    same shape.
    """
    r = np.asarray(range_m, dtype=float)
    if np.any(r <= 0):
        raise DomainError("range must be positive")
    if rcs < 0:
        raise DomainError("rcs must be non-negative")
    lam = config.wavelength
    num = math.sqrt(config.g_tx * config.g_rx) * lam * math.sqrt(config.p_t * rcs)
    den = (4.0 * math.pi) ** 1.5 * r**2 * math.sqrt(config.l_s) * math.sqrt(config.l_a)
    out = num / den
    return float(out) if np.isscalar(range_m) else out


def synthesize_return(config: RadarConfig, tracks: list[ScattererTrack],
                      n_samples: int) -> IqSeries:
    """Superpose per-scatterer baseband phasors into one I/Q series.

    Sample n is sum_i a_i(R[n,i]) * exp(-j*4*pi*fc/c * R[n,i]).  The
    amplitude is evaluated at the instantaneous range.  Deterministic; no
    noise is injected here.
    """
    if n_samples < 0:
        raise DomainError("n_samples must be non-negative")
    x = np.zeros(n_samples, dtype=complex)
    k = 4.0 * math.pi * config.fc / SPEED_OF_LIGHT
    for track in tracks:
        if len(track) != n_samples:
            raise ShapeError(
                f"track length {len(track)} does not match n_samples {n_samples}")
        amp = received_amplitude(config, track.ranges, track.rcs)
        x += amp * np.exp(-1j * k * track.ranges)
    return IqSeries(x, config.sample_rate)


def synthesize_fmcw_sweeps(config: RadarConfig, tracks: list[ScattererTrack],
                           samples_per_sweep: int) -> IqSeries:
    """Dechirped FMCW beat series with per-sweep fast-time structure.

    The plain baseband series above carries Doppler only; range shows up in
    FMCW data as a fast-time beat frequency f_b = 2*R*B/(c*T_sweep).  Here
    ``tracks`` hold one range per sweep; sweep m of scatterer i contributes

        a_i * exp(-j*4*pi*fc/c * R[m,i]) * exp(j*2*pi*f_b(R[m,i]) * tau_k)

    with tau_k the fast-time sample instants.  Sweeps are concatenated into
    a flat series ready for range-Doppler processing.
    """
    if samples_per_sweep < 1:
        raise DomainError("samples_per_sweep must be >= 1")
    if not tracks:
        return IqSeries(np.zeros(0, dtype=complex), config.sample_rate)
    n_sweeps = len(tracks[0])
    t_sweep = samples_per_sweep / config.sample_rate
    tau = np.arange(samples_per_sweep) / config.sample_rate
    k_phase = 4.0 * math.pi * config.fc / SPEED_OF_LIGHT
    x = np.zeros((n_sweeps, samples_per_sweep), dtype=complex)
    for track in tracks:
        if len(track) != n_sweeps:
            raise ShapeError("all tracks must hold one range per sweep")
        r = track.ranges
        amp = received_amplitude(config, r, track.rcs)
        beat = 2.0 * r * config.bandwidth / (SPEED_OF_LIGHT * t_sweep)
        x += (amp * np.exp(-1j * k_phase * r))[:, None] \
            * np.exp(2j * math.pi * beat[:, None] * tau[None, :])
    return IqSeries(x.ravel(), config.sample_rate)


def add_noise(iq: IqSeries, snr_db: float, seed: int) -> IqSeries:
    """Add circularly-symmetric complex Gaussian noise at a measured SNR.

    The drawn noise is rescaled so the realised noise power matches the
    target exactly, hence measured SNR equals ``snr_db``.  ``snr_db=NO_NOISE``
    (infinity) returns the input unchanged.  Reproducible under ``seed``.
    """
    if len(iq) == 0:
        raise ShapeError("cannot add noise to an empty series")
    if math.isinf(snr_db) and snr_db > 0:
        return IqSeries(iq.samples.copy(), iq.sample_rate)
    p_sig = float(np.mean(np.abs(iq.samples) ** 2))
    p_noise = p_sig / (10.0 ** (snr_db / 10.0))
    if p_noise == 0.0:
        return IqSeries(iq.samples.copy(), iq.sample_rate)
    rng = np.random.default_rng(seed)
    n = rng.standard_normal(len(iq)) + 1j * rng.standard_normal(len(iq))
    n *= math.sqrt(p_noise / float(np.mean(np.abs(n) ** 2)))
    return IqSeries(iq.samples + n, iq.sample_rate)


def doppler_shift(v: float, fc: float) -> float:
    """Doppler shift 2*v*fc/c, Hz.  Positive for motion toward the sensor."""
    return 2.0 * v * fc / SPEED_OF_LIGHT


# ---------------------------------------------------------------------------
# Motion scripts
#
# An invented catalogue of articulator kinematics: each script produces
# physically plausible range tracks for one synthetic motion class.
# Common parameters:
#   r0            start range, m; 0.2 <= r0 <= 50
#   rcs           scatterer cross section, m^2 (default 1.0)
#   aspect_scale  radial projection of the motion, (0, 1]; models aspect angle
#   occlusion     RCS attenuation factor, (0, 1]; models partial shielding
#   torso_rcs     if > 0, adds a stationary scatterer at r0 (the torso)
# Displacements are bounded so that ranges stay positive and radial speed
# stays below MAX_SPEED.
# ---------------------------------------------------------------------------

MAX_SPEED = 5.0          # m/s, documented bound on |radial velocity|
MIN_RANGE = 0.05         # m, tracks must stay beyond this

SCRIPT_KINDS = ("static", "reach", "bounce", "oscillate", "two_handed", "compound")


def _common_params(params: dict):
    r0 = float(params.get("r0", 2.0))
    if not 0.2 <= r0 <= 50.0:
        raise DomainError("r0 must lie in [0.2, 50] m")
    aspect = float(params.get("aspect_scale", 1.0))
    occl = float(params.get("occlusion", 1.0))
    if not 0.0 < aspect <= 1.0 or not 0.0 < occl <= 1.0:
        raise DomainError("aspect_scale and occlusion must lie in (0, 1]")
    rcs = float(params.get("rcs", 1.0))
    if rcs < 0:
        raise DomainError("rcs must be non-negative")
    torso = float(params.get("torso_rcs", 0.0))
    if torso < 0:
        raise DomainError("torso_rcs must be non-negative")
    return r0, rcs * occl, aspect, torso


def _check_track(ranges, velocity_max):
    if np.min(ranges) < MIN_RANGE:
        raise DomainError("script drives range below the minimum standoff")
    if velocity_max > MAX_SPEED:
        raise DomainError(f"script exceeds the {MAX_SPEED} m/s speed bound")


def script_motion(kind: str, params: dict, n_samples: int,
                  sample_rate: float) -> list[ScattererTrack]:
    """Generate scatterer tracks for one scripted motion class.

    Kinds: ``static`` (no motion), ``reach`` (constant-velocity approach by
    ``delta_r``), ``bounce`` (single raise/lower excursion of ``delta_r``),
    ``oscillate`` (``cycles`` reduplicated sinusoidal cycles of ``amplitude``),
    ``two_handed`` (complementary pair of oscillating scatterers) and
    ``compound`` (seeded random sequence of sub-gestures, broadband motion).
    """
    if n_samples < 2:
        raise DomainError("n_samples must be >= 2")
    if sample_rate <= 0:
        raise DomainError("sample_rate must be positive")
    if kind not in SCRIPT_KINDS:
        raise DomainError(f"unknown script kind {kind!r}")
    r0, rcs, aspect, torso = _common_params(params)
    t = np.arange(n_samples) / sample_rate
    duration = n_samples / sample_rate
    tracks: list[ScattererTrack] = []

    if kind == "static":
        tracks.append(ScattererTrack(np.full(n_samples, r0), rcs))

    elif kind == "reach":
        delta = aspect * float(params.get("delta_r", 0.3))
        if not 0.0 <= delta < r0:
            raise DomainError("delta_r must satisfy 0 <= delta_r < r0")
        ranges = r0 - delta * np.arange(n_samples) / (n_samples - 1)
        _check_track(ranges, delta / duration)
        tracks.append(ScattererTrack(ranges, rcs))

    elif kind == "bounce":
        delta = aspect * float(params.get("delta_r", 0.3))
        if not 0.0 <= delta < r0:
            raise DomainError("delta_r must satisfy 0 <= delta_r < r0")
        ranges = r0 - delta * np.sin(math.pi * t / duration)
        _check_track(ranges, delta * math.pi / duration)
        tracks.append(ScattererTrack(ranges, rcs))

    elif kind in ("oscillate", "two_handed"):
        amp = aspect * float(params.get("amplitude", 0.2))
        cycles = int(params.get("cycles", 3))
        if not 1 <= cycles <= 10:
            raise DomainError("cycles must lie in 1..10")
        if not 0.0 < amp < r0:
            raise DomainError("amplitude must satisfy 0 < amplitude < r0")
        phase = float(params.get("phase", 0.0))
        # raised-cosine excursion: velocity starts and ends at zero, so the
        # script yields exactly `cycles` positive/negative Doppler burst pairs
        theta = 2.0 * math.pi * cycles * t / duration + phase
        swing = 0.5 * amp * (1.0 - np.cos(theta))
        v_max = amp * math.pi * cycles / duration
        _check_track(r0 - swing, v_max)
        tracks.append(ScattererTrack(r0 - swing, rcs))
        if kind == "two_handed":
            _check_track(r0 + swing, v_max)
            tracks.append(ScattererTrack(r0 + swing, rcs))

    elif kind == "compound":
        seed = int(params.get("seed", 0))
        amp = aspect * float(params.get("amplitude", 0.2))
        n_segments = int(params.get("n_segments", 8))
        if not 0.0 < amp < r0:
            raise DomainError("amplitude must satisfy 0 < amplitude < r0")
        if not 2 <= n_segments <= 64:
            raise DomainError("n_segments must lie in 2..64")
        for hand in range(2):
            ranges = _compound_track(r0, amp, n_segments, n_samples, sample_rate,
                                     np.random.default_rng((seed, hand)))
            _check_track(ranges, MAX_SPEED * 0.9)
            tracks.append(ScattererTrack(ranges, rcs))

    if torso > 0:
        tracks.append(ScattererTrack(np.full(n_samples, r0), torso))
    return tracks


def _compound_track(r0, amp, n_segments, n_samples, sample_rate, rng):
    """Piecewise random excursions with smooth cosine ramps.

    Each segment's jump is clipped so the peak ramp slope stays inside the
    speed bound; excursions stay within +-amp of r0.
    """
    lengths = rng.multinomial(n_samples - n_segments, [1.0 / n_segments] * n_segments) + 1
    offset = np.zeros(n_samples)
    level = 0.0
    pos = 0
    for seg_len in lengths:
        seg_dur = seg_len / sample_rate
        # peak cosine-ramp slope is delta*pi/(2*seg_dur)
        max_jump = 0.9 * MAX_SPEED * 2.0 * seg_dur / math.pi
        target = level + np.clip(rng.uniform(-amp, amp) - level, -max_jump, max_jump)
        target = float(np.clip(target, -amp, amp))
        ramp = 0.5 * (1.0 - np.cos(np.linspace(0.0, math.pi, seg_len)))
        offset[pos:pos + seg_len] = level + (target - level) * ramp
        level = target
        pos += seg_len
    return r0 - offset


# ---------------------------------------------------------------------------
# I/Q file formats
# ---------------------------------------------------------------------------

def write_iq(path, iq: IqSeries, fc: float) -> None:
    """Write the bit-exact binary I/Q format.

    Little endian: 16-byte magic+version, u32 sample count, f64 sample rate,
    f64 carrier frequency, then interleaved f64 (re, im) pairs.
    """
    with open(path, "wb") as fh:
        fh.write(_IQ_MAGIC)
        fh.write(struct.pack("<Idd", len(iq), iq.sample_rate, fc))
        inter = np.empty(2 * len(iq), dtype="<f8")
        inter[0::2] = iq.samples.real
        inter[1::2] = iq.samples.imag
        fh.write(inter.tobytes())


def read_iq(path) -> tuple[IqSeries, float]:
    """Read the binary I/Q format; returns (series, carrier frequency)."""
    with open(path, "rb") as fh:
        magic = fh.read(16)
        if magic != _IQ_MAGIC:
            raise DataError(f"{path}: not a recognised I/Q file")
        count, rate, fc = struct.unpack("<Idd", fh.read(20))
        raw = np.frombuffer(fh.read(16 * count), dtype="<f8")
        if raw.size != 2 * count:
            raise DataError(f"{path}: truncated I/Q payload")
    return IqSeries(raw[0::2] + 1j * raw[1::2], rate), fc


def write_iq_csv(path, iq: IqSeries, fc: float) -> None:
    """Plain-text alternative: '# key: value' comments then 're,im' lines."""
    with open(path, "w") as fh:
        fh.write("# microdoppler-iq v1\n")
        fh.write(f"# sample_rate_hz: {iq.sample_rate!r}\n")
        fh.write(f"# fc_hz: {fc!r}\n")
        for z in iq.samples:
            fh.write(f"{float(z.real)!r},{float(z.imag)!r}\n")


def read_iq_csv(path) -> tuple[IqSeries, float]:
    rate = fc = None
    re, im = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "sample_rate_hz:" in line:
                    rate = float(line.split(":", 1)[1])
                elif "fc_hz:" in line:
                    fc = float(line.split(":", 1)[1])
                continue
            a, b = line.split(",")
            re.append(float(a))
            im.append(float(b))
    if rate is None or fc is None:
        raise DataError(f"{path}: missing sample_rate_hz/fc_hz header")
    return IqSeries(np.array(re) + 1j * np.array(im), rate), fc
