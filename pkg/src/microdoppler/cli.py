"""Command-line pipeline: simulate, process, featurize, select, train,
eval, complexity, probe-imitation and render.

Every command prints the configuration hash and master seed it ran under;
identical (config, seed, corpus) inputs produce byte-identical outputs.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 contract
violation inside an operation.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import complexity as cx
from . import config as cfgmod
from . import dsp, features, learn, sim
from .errors import (AlignmentError, ConfigError, DataError, DomainError,
                     InsufficientDataError, ShapeError, StratificationError)

WORKERS_ENV = "MICRODOPPLER_WORKERS"
SWEEP_KS = (20, 50, 100, 150, 200, 250)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _load_config(args) -> cfgmod.RunConfig:
    if getattr(args, "config", None):
        return cfgmod.load_config(args.config)
    return cfgmod.RunConfig()


def _stamp(cfg: cfgmod.RunConfig) -> str:
    return f"config {cfg.config_hash()} seed {cfg.seed}"


def _announce(cfg: cfgmod.RunConfig) -> None:
    print(_stamp(cfg))


def _derived_seed(*parts) -> int:
    text = "/".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "little")


def _atomic_write(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    tmp.replace(path)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _jittered_params(spec: cfgmod.ClassSpec, rng: np.random.Generator) -> dict:
    params = dict(spec.params)
    if spec.script in ("oscillate", "two_handed") and "phase" not in params:
        params["phase"] = float(rng.uniform(0.0, 2.0 * np.pi))
    if spec.jitter > 0.0:
        for key, value in list(params.items()):
            if key in ("cycles", "n_segments", "seed", "phase"):
                continue
            if isinstance(value, (int, float)):
                params[key] = float(value) * (1.0 + spec.jitter * rng.uniform(-1.0, 1.0))
    return params


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    scenario = cfgmod.load_scenario(args.scenario)
    out = Path(args.out)
    entries = []
    for sensor_id in scenario.sensors:
        if sensor_id not in cfg.sensors:
            raise ConfigError(f"scenario names unknown sensor {sensor_id!r}")
        sensor = cfg.sensors[sensor_id]
        (out / "iq" / sensor_id).mkdir(parents=True, exist_ok=True)
        if scenario.mode == "fmcw":
            radar = sim.RadarConfig(
                fc=sensor.fc, bandwidth=sensor.bandwidth,
                sample_rate=sensor.sweep_rate * cfg.samples_per_sweep,
                sweep_rate=sensor.sweep_rate)
            n_track = int(round(scenario.duration_s * sensor.sweep_rate))
            track_rate = sensor.sweep_rate
        else:
            radar = sim.RadarConfig(
                fc=sensor.fc, bandwidth=sensor.bandwidth,
                sample_rate=sensor.sample_rate, sweep_rate=sensor.sample_rate)
            n_track = int(round(scenario.duration_s * sensor.sample_rate))
            track_rate = sensor.sample_rate
        for cls in scenario.classes:
            for i in range(scenario.samples_per_class):
                sample_id = f"{cls.label}-{i:04d}"
                seed = _derived_seed(cfg.seed, sensor_id, cls.label, i)
                rng = np.random.default_rng(seed)
                params = _jittered_params(cls, rng)
                if cls.script == "compound":
                    params["seed"] = seed
                tracks = sim.script_motion(cls.script, params, n_track, track_rate)
                if scenario.mode == "fmcw":
                    iq = sim.synthesize_fmcw_sweeps(radar, tracks,
                                                    cfg.samples_per_sweep)
                else:
                    iq = sim.synthesize_return(radar, tracks, n_track)
                if scenario.snr_db is not None:
                    iq = sim.add_noise(iq, scenario.snr_db, seed)
                rel = f"iq/{sensor_id}/{sample_id}.iq"
                _atomic_write(out / rel, lambda p, iq=iq, fc=radar.fc:
                              sim.write_iq(p, iq, fc))
                entries.append(cfgmod.ManifestEntry(
                    sample_id=sample_id, label=cls.label,
                    signer_type=scenario.signer_type,
                    sensor_id=sensor_id, path=rel))
    manifest = cfgmod.Manifest(tuple(entries), cfg.config_hash())
    cfgmod.save_manifest(out / "manifest.json", manifest)
    print(f"wrote {len(entries)} I/Q files under {out}")
    return 0


# ---------------------------------------------------------------------------
# process
# ---------------------------------------------------------------------------

def _process_entry(entry, manifest_path, cfg, out, use_hpf, want_cubes):
    iq, fc = sim.read_iq(cfgmod.resolve_entry_path(manifest_path, entry))
    sensor = cfg.sensors.get(entry.sensor_id)
    if sensor is None:
        raise ConfigError(f"manifest names unknown sensor {entry.sensor_id!r}")
    if use_hpf:
        iq = dsp.highpass_filter(iq, cfg.hpf_cutoff_hz)
    spec = dsp.stft_spectrogram(iq, cfg.stft_window)
    _, spec = dsp.isodata_threshold(spec)
    spec = dsp.resize_spectrogram(spec, cfg.target_rows, cfg.target_cols)
    spec_dir = out / "spectrograms" / entry.sensor_id
    spec_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(spec_dir / f"{entry.sample_id}.csv",
                  lambda p: dsp.spectrogram_to_csv(p, spec))
    if want_cubes:
        radar = sim.RadarConfig(fc=fc, bandwidth=sensor.bandwidth,
                                sample_rate=iq.sample_rate,
                                sweep_rate=sensor.sweep_rate)
        frames = len(iq) // (cfg.samples_per_sweep * cfg.doppler_window)
        cube = dsp.range_doppler_cube(iq, radar, cfg.samples_per_sweep,
                                      frames, cfg.doppler_window)
        cube_dir = out / "cubes" / entry.sensor_id
        cube_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(cube_dir / f"{entry.sample_id}.rdc",
                      lambda p: dsp.cube_to_binary(p, cube))


def cmd_process(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    manifest = cfgmod.load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    use_hpf = not args.no_hpf
    failures = []

    def run(entry):
        try:
            _process_entry(entry, args.manifest, cfg, out, use_hpf, args.cubes)
            return None
        except Exception as exc:  # isolate per-entry failures
            return (entry.sensor_id, entry.sample_id, str(exc))

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, manifest.entries))
    else:
        results = [run(e) for e in manifest.entries]
    failures = sorted(r for r in results if r is not None)
    if failures:
        with open(out / "failures.txt", "w") as fh:
            for sensor_id, sample_id, msg in failures:
                fh.write(f"{sensor_id},{sample_id},{msg}\n")
    print(f"processed {len(manifest.entries) - len(failures)} entries, "
          f"{len(failures)} failed")
    return 0


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------

def cmd_featurize(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    manifest = cfgmod.load_manifest(args.manifest)
    spec_root = Path(args.spectrograms)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.bank:
        bank = features.load_filterbank(args.bank)
    else:
        bank = features.uniform_filterbank(cfg.n_filters, cfg.target_rows)
    names = features.feature_names()
    for sensor_id in manifest.sensor_ids():
        entries = manifest.for_sensor(sensor_id)

        def one(entry):
            path = spec_root / "spectrograms" / sensor_id / f"{entry.sample_id}.csv"
            if not path.exists():
                raise DataError(f"missing spectrogram {path}")
            spec = dsp.spectrogram_from_csv(path)
            return features.extract_features(spec, bank, cfg.envelope_percentile)

        workers = _workers()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(one, entries))
        else:
            rows = [one(e) for e in entries]
        matrix = np.stack(rows)
        _atomic_write(out / f"{sensor_id}.csv",
                      lambda p, m=matrix, es=entries: features.write_feature_csv(
                          p, m, names, sensor_id,
                          [e.sample_id for e in es], [e.label for e in es],
                          comment=_stamp(cfg)))
        print(f"{sensor_id}: {matrix.shape[0]} samples x {matrix.shape[1]} features")
    return 0


# ---------------------------------------------------------------------------
# select / train / eval
# ---------------------------------------------------------------------------

def _dataset_from_csv(path) -> learn.Dataset:
    matrix, names, sample_ids, labels = features.read_feature_csv(path)
    return learn.Dataset(matrix, labels, sample_ids, Path(path).stem, names)


def cmd_select(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    datasets = {Path(p).stem: _dataset_from_csv(p) for p in args.features}
    if len(datasets) > 1:
        k = args.k or cfg.k_features
        fused = learn.fuse_and_select(datasets, k)
        selected = fused
    else:
        data = next(iter(datasets.values()))
        if args.sweep:
            ks = [k for k in SWEEP_KS if k <= data.n_features]
            lines = [f"# {_stamp(cfg)}", "k,accuracy"]
            for k in ks:
                idx = learn.mrmr_select(data, k)
                template = learn.train("rfc", data.select(idx),
                                       {"n_trees": cfg.rfc_trees}, cfg.seed)
                report = learn.evaluate(template, data.select(idx),
                                        "holdout_75_25", cfg.seed)
                lines.append(f"{k},{report.accuracy!r}")
                print(f"k={k} accuracy={report.accuracy:.4f}")
            Path(args.out).write_text("\n".join(lines) + "\n")
            return 0
        k = args.k or min(cfg.k_features, data.n_features)
        idx = learn.mrmr_select(data, k)
        selected = data.select(idx)
    _atomic_write(Path(args.out),
                  lambda p: features.write_feature_csv(
                      p, selected.X, list(selected.feature_names), "sel",
                      list(selected.sample_ids), list(selected.labels),
                      comment=_stamp(cfg)))
    comp = learn.selection_composition(selected.feature_names)
    for (sensor, family), count in sorted(comp.items()):
        print(f"selected {sensor}/{family}: {count}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    data = _dataset_from_csv(args.features)
    hyper = {"n_trees": cfg.rfc_trees} if args.kind == "rfc" else {}
    if args.kind == "knn":
        hyper = {"k": cfg.knn_k}
    if args.kind == "svm_rbf":
        hyper = {"c": cfg.svm_c}
    model = learn.train(args.kind, data, hyper, cfg.seed)
    learn.save_model(args.out, model)
    print(f"train accuracy {model.train_report['train_accuracy']:.4f}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    model = learn.load_model(args.model)
    data = _dataset_from_csv(args.features)
    if args.protocol == "score":
        report = learn.score(model, data)
    else:
        report = learn.evaluate(model, data, args.protocol, cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(f"# {_stamp(cfg)}\n"
                                    + learn.report_text(report))
    (out / "confusion.csv").write_text(learn.confusion_csv(report))
    print(f"accuracy {report.accuracy:.4f}")
    print(learn.confusion_csv(report), end="")
    return 0


# ---------------------------------------------------------------------------
# complexity / probe / render
# ---------------------------------------------------------------------------

def cmd_complexity(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    manifest = cfgmod.load_manifest(args.manifest)
    groups: dict = {}
    for entry in manifest.entries:
        iq, fc = sim.read_iq(cfgmod.resolve_entry_path(args.manifest, entry))
        sensor = cfg.sensors.get(entry.sensor_id)
        if sensor is None:
            raise ConfigError(f"manifest names unknown sensor {entry.sensor_id!r}")
        radar = sim.RadarConfig(fc=fc, bandwidth=sensor.bandwidth,
                                sample_rate=iq.sample_rate,
                                sweep_rate=sensor.sweep_rate)
        frames = len(iq) // (cfg.samples_per_sweep * cfg.doppler_window)
        cube = dsp.range_doppler_cube(iq, radar, cfg.samples_per_sweep,
                                      frames, cfg.doppler_window)
        diagram = cx.iwv_diagram(cube, fc, cfg.velocity_bins)
        key = entry.signer_type if args.group_by == "signer" else entry.label
        groups.setdefault(key, []).append(diagram)
    results = cx.compare_complexity(groups, segment_len=cfg.welch_segment)
    text = f"# {_stamp(cfg)}\n" + cx.complexity_report(results)
    Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_probe_imitation(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    native = _dataset_from_csv(args.native)
    imitation = _dataset_from_csv(args.imitation)
    report = learn.native_vs_imitation_probe(native, imitation, cfg.seed)
    lines = [f"# {_stamp(cfg)}",
             f"accuracy: {report.accuracy:.6f}",
             f"variance_ratio: {report.variance_ratio:.6f}",
             f"centroid_shift: {report.centroid_shift:.6f}",
             f"n_per_group: {report.n_per_group}"]
    text = "\n".join(lines) + "\n"
    Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_render(args) -> int:
    cfg = _load_config(args)
    _announce(cfg)
    if args.what == "spectrogram":
        spec = dsp.spectrogram_from_csv(args.input)
        dsp.spectrogram_to_pgm(args.out, spec)
        print(f"wrote {spec.shape[0]}x{spec.shape[1]} PGM to {args.out}")
    elif args.what == "iwv":
        sensor = cfg.sensors.get(args.sensor or "")
        if sensor is None:
            raise ConfigError("render iwv needs --sensor naming a configured sensor")
        cube = dsp.cube_from_binary(args.input)
        diagram = cx.iwv_diagram(cube, sensor.fc, cfg.velocity_bins)
        cx.iwv_to_csv(args.out, diagram)
        print(f"wrote {diagram.values.shape[0]}x{diagram.values.shape[1]} "
              f"IWV CSV to {args.out}")
    elif args.what == "curve":
        lines = [l for l in Path(args.input).read_text().strip().splitlines()
                 if l and not l.startswith("#")]
        rows = [line.split(",") for line in lines[1:]]
        width = 40
        accs = [float(r[1]) for r in rows]
        out_lines = ["k    accuracy  " + "-" * width]
        for (k, _), acc in zip(rows, accs):
            bar = "#" * int(round(acc * width))
            out_lines.append(f"{k:>4s}  {acc:.4f}  {bar}")
        Path(args.out).write_text("\n".join(out_lines) + "\n")
        print("\n".join(out_lines))
    elif args.what == "ablation":
        def rows_of(path):
            return [l for l in Path(path).read_text().strip().splitlines()
                    if l and not l.startswith("#")][1:]

        with_lines = rows_of(args.input)
        without_lines = rows_of(args.second)
        out_lines = ["k,accuracy_with_hpf,accuracy_without_hpf"]
        for a, b in zip(with_lines, without_lines):
            ka, va = a.split(",")
            kb, vb = b.split(",")
            if ka != kb:
                raise DataError("ablation inputs disagree on the k grid")
            out_lines.append(f"{ka},{float(va)!r},{float(vb)!r}")
        Path(args.out).write_text("\n".join(out_lines) + "\n")
        print("\n".join(out_lines))
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microdoppler",
        description="simulate, process and classify micro-Doppler radar returns")
    parser.add_argument("--config", help="run-configuration file (key = value)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize an I/Q corpus from a scenario")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="I/Q to denoised 65x65 spectrograms")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--no-hpf", action="store_true",
                   help="skip the stationary-clutter high-pass filter")
    p.add_argument("--cubes", action="store_true",
                   help="also emit range-Doppler cubes")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("featurize", help="spectrograms to per-sensor feature CSVs")
    p.add_argument("manifest")
    p.add_argument("--spectrograms", required=True,
                   help="directory produced by 'process'")
    p.add_argument("--out", required=True)
    p.add_argument("--bank", help="optional tuned filter-bank file")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("select", help="mRMR feature selection (fuses multiple sensors)")
    p.add_argument("features", nargs="+", help="feature CSV file(s)")
    p.add_argument("--k", type=int)
    p.add_argument("--sweep", action="store_true",
                   help="emit an accuracy-vs-k curve instead of a selection")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="fit a classifier on a feature CSV")
    p.add_argument("features")
    p.add_argument("--kind", choices=learn.MODEL_KINDS, default="rfc")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model; writes report and confusion CSV")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("--protocol", choices=["score", "holdout_75_25", "kfold_5"],
                   default="holdout_75_25")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("complexity", help="group fractal-complexity comparison")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--group-by", choices=["label", "signer"], default="label")
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("probe-imitation",
                       help="native-versus-imitation discrimination probe")
    p.add_argument("--native", required=True)
    p.add_argument("--imitation", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_probe_imitation)

    p = sub.add_parser("render", help="emit PGM/plot/table renderings")
    p.add_argument("what", choices=["spectrogram", "iwv", "curve", "ablation"])
    p.add_argument("input")
    p.add_argument("second", nargs="?",
                   help="second input (ablation: the --no-hpf curve)")
    p.add_argument("--sensor", help="sensor id for iwv velocity mapping")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (DomainError, ShapeError, InsufficientDataError, AlignmentError,
            StratificationError) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
