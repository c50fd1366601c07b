"""Run configuration, sensor presets, corpus manifests and scenarios.

The run configuration is a single flat key-value text file with an embedded
schema version; its content digest is printed by every command so any output
can be traced back to the exact configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, DataError
from .sim import SCRIPT_KINDS

SCHEMA_VERSION = 1

SIGNER_TYPES = ("native", "imitation", "activity")


@dataclass(frozen=True)
class SensorConfig:
    """Per-sensor RF parameters; rates cover the slow-time (Doppler) path."""

    fc: float
    bandwidth: float
    sample_rate: float = 4096.0
    sweep_rate: float = 4096.0


# Transmit-frequency presets for the three sensor classes this toolkit
# models: a sub-10 GHz UWB unit (band centre of 7.25-10.2 GHz), a 24 GHz
# FMCW radar with 1.5 GHz sweeps and a 77 GHz FMCW radar with 750 MHz
# sweeps (20 cm and 10 cm range bins respectively).
DEFAULT_SENSORS = {
    "xband": SensorConfig(fc=8.725e9, bandwidth=2.95e9),
    "k24": SensorConfig(fc=24e9, bandwidth=1.5e9),
    "w77": SensorConfig(fc=77e9, bandwidth=750e6),
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    hpf_cutoff_hz: float = 15.0
    stft_window: int = 128
    target_rows: int = 65
    target_cols: int = 65
    velocity_bins: int = 64
    welch_segment: int = 64
    envelope_percentile: float = 0.95
    n_filters: int = 12
    n_cepstra: int = 5
    lpc_order: int = 50
    ga_population: int = 40
    ga_generations: int = 30
    ga_crossover_rate: float = 0.8
    ga_mutation_rate: float = 0.05
    k_features: int = 150
    rfc_trees: int = 100
    knn_k: int = 5
    svm_c: float = 1.0
    samples_per_sweep: int = 32
    doppler_window: int = 32
    sensors: dict = field(default_factory=lambda: dict(DEFAULT_SENSORS))

    def to_text(self) -> str:
        """Canonical key = value serialisation (sorted keys, repr floats)."""
        lines = [f"schema_version = {SCHEMA_VERSION}"]
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name == "sensors":
                continue
            lines.append(f"{f.name} = {getattr(self, f.name)!r}")
        for sensor in sorted(self.sensors):
            sc = self.sensors[sensor]
            for attr in ("fc", "bandwidth", "sample_rate", "sweep_rate"):
                lines.append(f"sensor.{sensor}.{attr} = {getattr(sc, attr)!r}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]


def load_config(path) -> RunConfig:
    """Parse the key = value format back into a RunConfig (lossless)."""
    int_fields = {"seed", "stft_window", "target_rows", "target_cols",
                  "velocity_bins", "welch_segment", "n_filters", "n_cepstra",
                  "lpc_order", "ga_population", "ga_generations", "k_features",
                  "rfc_trees", "knn_k", "samples_per_sweep", "doppler_window"}
    float_fields = {"hpf_cutoff_hz", "envelope_percentile", "ga_crossover_rate",
                    "ga_mutation_rate", "svm_c"}
    values: dict = {}
    sensors: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "schema_version":
                if int(value) != SCHEMA_VERSION:
                    raise ConfigError(
                        f"{path}:{lineno}: unsupported schema_version {value}")
            elif key.startswith("sensor."):
                _, sensor, attr = key.split(".", 2)
                sensors.setdefault(sensor, {})[attr] = float(value)
            elif key in int_fields:
                values[key] = int(value)
            elif key in float_fields:
                values[key] = float(value)
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    if sensors:
        values["sensors"] = {name: SensorConfig(**attrs)
                             for name, attrs in sensors.items()}
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_config(path, config: RunConfig) -> None:
    Path(path).write_text(config.to_text())


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    label: str
    signer_type: str
    sensor_id: str
    path: str          # relative to the manifest file


@dataclass(frozen=True)
class Manifest:
    entries: tuple
    config_hash: str

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for e in self.entries:
            key = (e.sensor_id, e.sample_id)
            if key in seen:
                raise DataError(f"duplicate sample id {e.sample_id!r} "
                                f"for sensor {e.sensor_id!r}")
            seen.add(key)

    def for_sensor(self, sensor_id: str) -> list:
        return [e for e in self.entries if e.sensor_id == sensor_id]

    def sensor_ids(self) -> list:
        out = []
        for e in self.entries:
            if e.sensor_id not in out:
                out.append(e.sensor_id)
        return out


def save_manifest(path, manifest: Manifest) -> None:
    doc = {
        "format": "microdoppler-manifest v1",
        "config_hash": manifest.config_hash,
        "entries": [vars(e) for e in manifest.entries],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if doc.get("format") != "microdoppler-manifest v1":
        raise DataError(f"{path}: not a manifest file")
    entries = []
    for i, raw in enumerate(doc.get("entries", [])):
        try:
            entries.append(ManifestEntry(**raw))
        except TypeError as exc:
            raise DataError(f"{path}: entry {i}: {exc}") from exc
    return Manifest(tuple(entries), doc.get("config_hash", ""))


def resolve_entry_path(manifest_path, entry: ManifestEntry) -> Path:
    p = Path(manifest_path).parent / entry.path
    if not p.exists():
        raise DataError(f"manifest entry {entry.sample_id!r}: missing file {p}")
    return p


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassSpec:
    label: str
    script: str
    params: dict
    jitter: float = 0.0


@dataclass(frozen=True)
class Scenario:
    classes: tuple
    samples_per_class: int
    duration_s: float
    snr_db: float | None
    sensors: tuple
    signer_type: str = "native"
    mode: str = "doppler"      # 'doppler' (slow-time series) or 'fmcw' (beat sweeps)


def _require(doc, key, kind, where):
    if key not in doc:
        raise ConfigError(f"{where}: missing field {key!r}")
    value = doc[key]
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else \
            "/".join(k.__name__ for k in kind)
        raise ConfigError(f"{where}: field {key!r} must be {names}")
    return value


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario JSON file.

    Errors carry the offending line (for syntax) or field path (for values).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    where = str(path)
    classes_doc = _require(doc, "classes", list, where)
    if not classes_doc:
        raise ConfigError(f"{where}: classes must be non-empty")
    classes = []
    for i, cdoc in enumerate(classes_doc):
        cw = f"{where}: classes[{i}]"
        if not isinstance(cdoc, dict):
            raise ConfigError(f"{cw}: must be an object")
        label = _require(cdoc, "label", str, cw)
        script = _require(cdoc, "script", str, cw)
        if script not in SCRIPT_KINDS:
            raise ConfigError(f"{cw}: unknown script {script!r}")
        params = cdoc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{cw}: params must be an object")
        jitter = float(cdoc.get("jitter", 0.0))
        if not 0.0 <= jitter < 1.0:
            raise ConfigError(f"{cw}: jitter must lie in [0, 1)")
        classes.append(ClassSpec(label, script, dict(params), jitter))
    labels = [c.label for c in classes]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"{where}: duplicate class labels")
    spc = _require(doc, "samples_per_class", int, where)
    if spc < 1:
        raise ConfigError(f"{where}: samples_per_class must be >= 1")
    duration = float(_require(doc, "duration_s", (int, float), where))
    if duration <= 0:
        raise ConfigError(f"{where}: duration_s must be positive")
    snr = doc.get("snr_db")
    if snr is not None:
        snr = float(snr)
    sensors = _require(doc, "sensors", list, where)
    if not sensors or not all(isinstance(s, str) for s in sensors):
        raise ConfigError(f"{where}: sensors must be a non-empty string list")
    signer = doc.get("signer_type", "native")
    if signer not in SIGNER_TYPES:
        raise ConfigError(f"{where}: signer_type must be one of {SIGNER_TYPES}")
    mode = doc.get("mode", "doppler")
    if mode not in ("doppler", "fmcw"):
        raise ConfigError(f"{where}: mode must be 'doppler' or 'fmcw'")
    return Scenario(tuple(classes), spc, duration, snr, tuple(sensors),
                    signer, mode)
