"""Acceptance criteria for the full toolkit.

Each test prints one PASS/FAIL line (run pytest with -s to see them all) and
asserts the criterion at its stated tolerance.  Run order follows the
criterion numbering; the end-to-end benchmarks use synthetic corpora that
this module constructs by design.
"""

import hashlib
import json
import time

import numpy as np

from microdoppler import cli, complexity as cx, dsp, features, learn, sim

import oracles


def stable_seed(*parts) -> int:
    text = "/".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "little")


def check(num, name, condition, detail=""):
    status = "PASS" if condition else "FAIL"
    print(f"ACCEPTANCE {num} {name}: {status} {detail}".rstrip())
    assert condition, f"criterion {num} ({name}) failed: {detail}"


# -------------------------------------------------------------------------
# 1. Doppler law
# -------------------------------------------------------------------------

def test_01_doppler_law():
    start = time.monotonic()
    rng = np.random.default_rng(42)
    window = 128
    fs = 4096.0
    bin_hz = fs / window
    worst = 0.0
    for _ in range(50):
        fc = rng.choice([9e9, 24e9, 77e9])
        v = rng.uniform(0.2, 2.0)
        cfg = sim.RadarConfig(fc=fc, bandwidth=1e9, sample_rate=fs,
                              sweep_rate=fs)
        n = 2048
        ranges = 3.0 - v * np.arange(n) / fs
        iq = sim.synthesize_return(cfg, [sim.ScattererTrack(ranges)], n)
        spec = dsp.stft_spectrogram(iq, window)
        ridge = np.median(spec.freq_axis[np.argmax(spec.values, axis=0)])
        err = abs(ridge - sim.doppler_shift(v, fc))
        worst = max(worst, err)
    elapsed = time.monotonic() - start
    check(1, "doppler-law",
          worst <= bin_hz and elapsed < 10.0,
          f"worst error {worst:.2f} Hz vs bin {bin_hz:.2f} Hz in {elapsed:.1f}s")


# -------------------------------------------------------------------------
# 2. Range-bin law
# -------------------------------------------------------------------------

def test_02_range_bin_law():
    c = sim.SPEED_OF_LIGHT
    cfg750 = sim.RadarConfig(fc=77e9, bandwidth=750e6, sample_rate=65536,
                             sweep_rate=1024)
    cfg1500 = sim.RadarConfig(fc=24e9, bandwidth=1.5e9, sample_rate=65536,
                              sweep_rate=1024)
    exact = (cfg750.range_resolution() == c / (2 * 750e6)
             and cfg1500.range_resolution() == c / (2 * 1.5e9)
             and abs(cfg750.range_resolution() - 0.20) < 0.001
             and abs(cfg1500.range_resolution() - 0.10) < 0.001)

    n_sweeps = 1024
    ranges = 2.0 - 0.3 * np.arange(n_sweeps) / (n_sweeps - 1)
    iq = sim.synthesize_fmcw_sweeps(cfg750, [sim.ScattererTrack(ranges)], 64)
    cube = dsp.range_doppler_cube(iq, cfg750, 64, 16, 64)
    first = np.unravel_index(np.argmax(cube.values[:, :, 0]),
                             cube.values[:, :, 0].shape)
    last = np.unravel_index(np.argmax(cube.values[:, :, -1]),
                            cube.values[:, :, -1].shape)
    migration = first[0] - last[0]
    doppler_positive = (last[1] - 32) * cube.doppler_bin_hz > 0
    check(2, "range-bin-law",
          exact and migration in (1, 2) and doppler_positive,
          f"bins 20cm/10cm exact, 0.3 m approach migrated {migration} bins")


# -------------------------------------------------------------------------
# 3. STFT / DCT / LPC / mRMR oracle equivalence
# -------------------------------------------------------------------------

def test_03_oracle_equivalence():
    start = time.monotonic()
    # STFT versus double-loop DFT
    fs, w = 1000.0, 64
    t = np.arange(320) / fs
    iq = sim.IqSeries(np.exp(2j * np.pi * 117.0 * t), fs)
    spec = dsp.stft_spectrogram(iq, w)
    window = np.hanning(w)
    stft_ok = True
    for col in range(spec.values.shape[1]):
        seg = iq.samples[col * 32: col * 32 + w] * window
        want = oracles.dft_column(seg)
        stft_ok &= np.allclose(spec.values[:, col], want,
                               rtol=1e-9, atol=1e-9 * want.max())

    # DCT-II versus quadruple loop on 8x8
    x = np.random.default_rng(3).random((8, 8))
    dct_ok = np.allclose(features.dct2(x), oracles.dct2_bruteforce(x),
                         rtol=1e-9, atol=1e-12)

    # AR(2) round trip within +-0.05
    series = oracles.ar2_series(1.2, -0.5, 6000, 0)
    a = features.lpc_coefficients(series, 8)
    lpc_ok = abs(a[0] - 1.2) <= 0.05 and abs(a[1] + 0.5) <= 0.05

    # greedy mRMR recount on 8 features
    rng = np.random.default_rng(2)
    n = 48
    y = rng.integers(0, 2, n)
    X = np.column_stack([
        y + rng.normal(0, 0.3, n), y + rng.normal(0, 0.3, n),
        rng.standard_normal(n), y * 2.0 + rng.normal(0, 0.5, n),
        rng.standard_normal(n), rng.uniform(size=n),
        y + rng.normal(0, 1.0, n), rng.standard_normal(n)])
    data = learn.Dataset(X, [str(v) for v in y],
                         [f"s{i}" for i in range(n)], "s",
                         [f"f_{i}" for i in range(8)])
    got = list(learn.mrmr_select(data, 3))
    want = oracles.mrmr_bruteforce(learn.quantize_equal_frequency(X, 8), y, 3)
    mrmr_ok = got == want

    elapsed = time.monotonic() - start
    check(3, "oracle-equivalence",
          stft_ok and dct_ok and lpc_ok and mrmr_ok and elapsed < 30.0,
          f"stft={stft_ok} dct={dct_ok} lpc={lpc_ok} mrmr={mrmr_ok} "
          f"in {elapsed:.1f}s")


# -------------------------------------------------------------------------
# 4. Isodata versus exhaustive sweep
# -------------------------------------------------------------------------

def test_04_isodata_sweep():
    ok = True
    for seed in range(20):
        rng = np.random.default_rng(seed)
        lo = rng.exponential(1.0, size=rng.integers(200, 400))
        hi = rng.uniform(8.0, 15.0) + rng.exponential(2.0, size=rng.integers(100, 300))
        v = np.concatenate([lo, hi])
        rng.shuffle(v)
        rows = len(v) // 10
        v = v[:rows * 10].reshape(rows, 10)
        spec = dsp.Spectrogram(v, np.arange(rows, dtype=float),
                               np.arange(10, dtype=float))
        t, _ = dsp.isodata_threshold(spec)
        t_sweep, step = oracles.isodata_sweep(v)
        ok &= abs(t - t_sweep) <= step
    check(4, "isodata-fixed-point", ok, "20 bimodal images within one step")


# -------------------------------------------------------------------------
# 5. Fractal recovery and group ordering
# -------------------------------------------------------------------------

def test_05_fractal_recovery_and_groups():
    seg = 256
    recovery_ok = True
    details = []
    for beta in (0.5, 1.0, 1.5, 2.0):
        est = []
        for seed in range(20):
            x = cx.power_law_noise(beta, 65536, seed, f_min=1.0 / seg)
            psd = cx.welch_psd(x[None, :], seg)
            est.append(cx.fit_fractal(psd).beta)
        mean = float(np.mean(est))
        details.append(f"{beta}->{mean:.3f}")
        recovery_ok &= abs(mean - beta) <= 0.1

    # 30 samples of 8 seconds per group, end to end through the RF pathway
    cfg = sim.RadarConfig(fc=77e9, bandwidth=750e6, sample_rate=512 * 32,
                          sweep_rate=512)
    n_sweeps = 8 * 512
    spw, dw = 32, 32
    frames = n_sweeps // dw

    def sample_iwv(kind, params, seed):
        tracks = sim.script_motion(kind, params, n_sweeps, cfg.sweep_rate)
        iq = sim.synthesize_fmcw_sweeps(cfg, tracks, spw)
        iq = sim.add_noise(iq, 25.0, seed)
        cube = dsp.range_doppler_cube(iq, cfg, spw, frames, dw)
        return cx.iwv_diagram(cube, cfg.fc, 64)

    groups = {"periodic": [], "complex": []}
    for i in range(30):
        groups["periodic"].append(sample_iwv(
            "oscillate", {"r0": 2.0, "amplitude": 0.3, "cycles": 2,
                          "phase": 0.2 * i, "torso_rcs": 0.5}, 100 + i))
        groups["complex"].append(sample_iwv(
            "compound", {"r0": 2.0, "amplitude": 0.3, "n_segments": 48,
                         "seed": 200 + i, "torso_rcs": 0.5}, 300 + i))
    res = cx.compare_complexity(groups, segment_len=64)
    ordering_ok = res["complex"].mean_beta < res["periodic"].mean_beta
    check(5, "fractal-recovery",
          recovery_ok and ordering_ok,
          f"{' '.join(details)}; complex {res['complex'].mean_beta:.2f} < "
          f"periodic {res['periodic'].mean_beta:.2f}")


# -------------------------------------------------------------------------
# 6. Feature-count contract
# -------------------------------------------------------------------------

def test_06_feature_counts():
    names = features.feature_names()
    fams = [n.split("_")[0] for n in names]
    counts_ok = (len(names) == 932 == features.FEATURES_PER_SENSOR
                 and fams.count("env") == 7 and fams.count("dct") == 500
                 and fams.count("fwcc") == 325 and fams.count("lpc") == 100)

    rng = np.random.default_rng(0)
    sensors = {}
    ids = [f"s{i:02d}" for i in range(12)]
    labels = ["a", "b"] * 6
    for s in ("xband", "k24", "w77"):
        X = rng.standard_normal((12, 932))
        sensors[s] = learn.Dataset(X, labels, ids, s,
                                   [f"{n}_{s}" for n in names])
    fused_full = learn.fuse_and_select(sensors, k_final=2796)
    width_ok = fused_full.n_features == 2796
    default_ok = learn.DEFAULT_K_FINAL == 150
    check(6, "feature-count-contract",
          counts_ok and width_ok and default_ok,
          "932 = 7+500+325+100, fused 2796, k_final 150")


# -------------------------------------------------------------------------
# 7. Genetic search contract
# -------------------------------------------------------------------------

def band_corpus(seed, n_per_class=16, band=(30, 34)):
    rng = np.random.default_rng(seed)
    freq = np.linspace(-512.0, 512.0, 65, endpoint=False)
    tim = np.arange(65, dtype=float)
    specs, labels = [], []
    for cls in ("a", "b"):
        for _ in range(n_per_class):
            v = rng.exponential(0.5, size=(65, 65))
            for _ in range(6):
                v[rng.integers(0, 65)] += rng.exponential(3.0, size=65)
            if cls == "a":
                amp = rng.uniform(2.0, 4.0)
                v[band[0]:band[1]] += amp * (
                    1 + 0.1 * rng.standard_normal((band[1] - band[0], 65))) ** 2
            specs.append(dsp.Spectrogram(v, freq, tim))
            labels.append(cls)
    return specs, labels


def test_07_ga_contract():
    start = time.monotonic()
    margins = []
    traces_ok = True
    for seed in range(5):
        specs, labels = band_corpus(seed, n_per_class=24)
        rng = np.random.default_rng(1000 + seed)
        rand_bank = features.chromosome_to_bank(
            features._random_chromosome(4, 65, rng), 65)
        Xr = np.stack([features.fwcc(s, rand_bank) for s in specs])
        acc_rand = learn.cross_val_accuracy("rfc", Xr, np.array(labels),
                                            folds=3, seed=seed)
        result = features.optimize_filterbank_ga(
            specs, labels, 4,
            features.GaParams(population=10, generations=6, seed=seed))
        trace = result.fitness_trace
        traces_ok &= all(a <= b for a, b in zip(trace, trace[1:]))
        margins.append(result.best_fitness - acc_rand)
    mean_margin = float(np.mean(margins))
    elapsed = time.monotonic() - start
    check(7, "ga-contract",
          traces_ok and mean_margin >= 0.05 and elapsed < 300.0,
          f"margin {mean_margin * 100:.1f} points over random in {elapsed:.0f}s")


# -------------------------------------------------------------------------
# 8. End-to-end synthetic benchmark
# -------------------------------------------------------------------------

def pipeline_features(class_defs, n_per_class, duration_s, seed_base,
                      snr_db=15.0, jitter=0.1):
    """Full chain: scripts -> I/Q -> HPF -> STFT -> isodata -> 65x65 -> 932."""
    fs = 4096.0
    cfg = sim.RadarConfig(fc=24e9, bandwidth=1.5e9, sample_rate=fs,
                          sweep_rate=fs)
    n = int(duration_s * fs)
    bank = features.uniform_filterbank(12, 65)
    rows, labels = [], []
    for label, script, params in class_defs:
        for i in range(n_per_class):
            seed = stable_seed(seed_base, label, i)
            rng = np.random.default_rng(seed)
            p = dict(params)
            if script in ("oscillate", "two_handed"):
                p.setdefault("phase", float(rng.uniform(0, 2 * np.pi)))
            if script == "compound":
                p["seed"] = seed
            for key in ("r0", "delta_r", "amplitude"):
                if key in p:
                    p[key] = float(p[key]) * (1.0 + jitter * rng.uniform(-1, 1))
            tracks = sim.script_motion(script, p, n, fs)
            iq = sim.synthesize_return(cfg, tracks, n)
            iq = sim.add_noise(iq, snr_db, seed)
            iq = dsp.highpass_filter(iq, 15.0)
            spec = dsp.stft_spectrogram(iq, 128)
            _, spec = dsp.isodata_threshold(spec)
            spec = dsp.resize_spectrogram(spec, 65, 65)
            rows.append(features.extract_features(spec, bank))
            labels.append(label)
    ids = [f"s{i:04d}" for i in range(len(rows))]
    names = [f"{n}_k24" for n in features.feature_names()]
    return learn.Dataset(np.stack(rows), labels, ids, "k24", names)


FIVE_CLASSES = [
    ("reach", "reach", {"r0": 2.0, "delta_r": 0.35}),
    ("bounce", "bounce", {"r0": 2.0, "delta_r": 0.3}),
    ("osc2", "oscillate", {"r0": 2.0, "amplitude": 0.25, "cycles": 2}),
    ("twohand", "two_handed", {"r0": 2.0, "amplitude": 0.2, "cycles": 3}),
    ("compound", "compound", {"r0": 2.0, "amplitude": 0.25, "n_segments": 10}),
]


def twenty_classes():
    defs = []
    for k in range(1, 6):
        defs.append((f"osc{k}a", "oscillate",
                     {"r0": 2.0, "amplitude": 0.12, "cycles": k}))
        defs.append((f"osc{k}b", "oscillate",
                     {"r0": 2.0, "amplitude": 0.3, "cycles": k}))
    for k in range(1, 5):
        defs.append((f"two{k}", "two_handed",
                     {"r0": 2.0, "amplitude": 0.2, "cycles": k}))
    defs.append(("reach-s", "reach", {"r0": 2.0, "delta_r": 0.2}))
    defs.append(("reach-l", "reach", {"r0": 2.0, "delta_r": 0.4}))
    defs.append(("bounce-s", "bounce", {"r0": 2.0, "delta_r": 0.2}))
    defs.append(("bounce-l", "bounce", {"r0": 2.0, "delta_r": 0.4}))
    defs.append(("cmp-8", "compound", {"r0": 2.0, "amplitude": 0.2,
                                       "n_segments": 8}))
    defs.append(("cmp-16", "compound", {"r0": 2.0, "amplitude": 0.2,
                                        "n_segments": 16}))
    return defs


def test_08_end_to_end_benchmark():
    data5 = pipeline_features(FIVE_CLASSES, 30, 2.0, seed_base=1)
    idx = learn.mrmr_select(data5, 150)
    template = learn.train("rfc", data5.select(idx), {"n_trees": 100}, seed=0)
    report5 = learn.evaluate(template, data5.select(idx), "holdout_75_25",
                             seed=0)

    data20 = pipeline_features(twenty_classes(), 30, 2.0, seed_base=2)
    idx20 = learn.mrmr_select(data20, 150)
    template20 = learn.train("rfc", data20.select(idx20), {"n_trees": 100},
                             seed=0)
    report20 = learn.evaluate(template20, data20.select(idx20),
                              "holdout_75_25", seed=0)
    chance20 = 1.0 / 20.0
    check(8, "end-to-end-benchmark",
          report5.accuracy >= 0.90 and report20.accuracy > 5 * chance20,
          f"5-class {report5.accuracy:.3f} (>=0.90), "
          f"20-class {report20.accuracy:.3f} (>{5 * chance20})")


# -------------------------------------------------------------------------
# 9. Imitation probe
# -------------------------------------------------------------------------

def imitation_features(distort, n_samples, seed_base):
    """Construct-by-design signing groups.

    The distorted group doubles the trajectory-amplitude variance and warps
    the velocity profile (time is bent, so speeds peak differently).
    """
    fs = 4096.0
    cfg = sim.RadarConfig(fc=24e9, bandwidth=1.5e9, sample_rate=fs,
                          sweep_rate=fs)
    n = int(2.0 * fs)
    bank = features.uniform_filterbank(12, 65)
    rows = []
    t_norm = np.arange(n) / (n - 1)
    for i in range(n_samples):
        rng = np.random.default_rng(seed_base + i)
        amp_sigma = 0.04 if not distort else 0.08
        amp = float(np.clip(rng.normal(0.22, amp_sigma), 0.05, 0.5))
        tracks = sim.script_motion(
            "oscillate", {"r0": 2.0, "amplitude": amp, "cycles": 3,
                          "phase": float(rng.uniform(0, 2 * np.pi))}, n, fs)
        ranges = tracks[0].ranges
        if distort:
            # velocity-profile distortion: traverse the same path on bent time
            warp = t_norm ** rng.uniform(1.4, 1.8)
            ranges = np.interp(warp, t_norm, ranges)
        track = sim.ScattererTrack(ranges, 1.0)
        iq = sim.synthesize_return(cfg, [track], n)
        iq = sim.add_noise(iq, 20.0, seed_base + i)
        spec = dsp.stft_spectrogram(iq, 128)
        _, spec = dsp.isodata_threshold(spec)
        spec = dsp.resize_spectrogram(spec, 65, 65)
        rows.append(features.extract_features(spec, bank))
    ids = [f"{'imi' if distort else 'nat'}{i:03d}" for i in range(n_samples)]
    names = [f"{n}_k24" for n in features.feature_names()]
    return learn.Dataset(np.stack(rows), ["g"] * n_samples, ids, "k24", names)


def test_09_imitation_probe():
    native = imitation_features(distort=False, n_samples=40, seed_base=10_000)
    imitation = imitation_features(distort=True, n_samples=60, seed_base=20_000)
    report = learn.native_vs_imitation_probe(native, imitation, seed=0)
    check(9, "imitation-probe",
          report.variance_ratio > 1.0 and report.centroid_shift > 0.0
          and report.accuracy > 0.9 and report.n_per_group == 40,
          f"acc {report.accuracy:.3f}, var ratio {report.variance_ratio:.2f}, "
          f"shift {report.centroid_shift:.2f}")


# -------------------------------------------------------------------------
# 10. Determinism
# -------------------------------------------------------------------------

def test_10_determinism(tmp_path):
    scenario = {
        "mode": "doppler",
        "duration_s": 1.0,
        "snr_db": 20.0,
        "sensors": ["w77"],
        "samples_per_class": 4,
        "classes": [
            {"label": "reach", "script": "reach",
             "params": {"r0": 2.0, "delta_r": 0.3}, "jitter": 0.1},
            {"label": "osc", "script": "oscillate",
             "params": {"r0": 2.0, "amplitude": 0.2, "cycles": 3},
             "jitter": 0.1},
        ],
    }
    outputs = []
    for tag in ("r1", "r2"):
        base = tmp_path / tag
        base.mkdir()
        scen = base / "scen.json"
        scen.write_text(json.dumps(scenario))
        corpus = base / "corpus"
        assert cli.main(["simulate", str(scen), "--out", str(corpus)]) == 0
        proc = base / "proc"
        assert cli.main(["process", str(corpus / "manifest.json"),
                         "--out", str(proc)]) == 0
        feats = base / "feats"
        assert cli.main(["featurize", str(corpus / "manifest.json"),
                         "--spectrograms", str(proc), "--out", str(feats)]) == 0
        sel = base / "sel.csv"
        assert cli.main(["select", str(feats / "w77.csv"), "--k", "40",
                         "--out", str(sel)]) == 0
        model = base / "model.bin"
        assert cli.main(["train", str(sel), "--kind", "rfc",
                         "--out", str(model)]) == 0
        evaldir = base / "eval"
        assert cli.main(["eval", str(model), str(sel), "--protocol",
                         "holdout_75_25", "--out", str(evaldir)]) == 0
        outputs.append((
            (feats / "w77.csv").read_bytes(),
            sel.read_bytes(),
            (evaldir / "report.txt").read_bytes(),
            (evaldir / "confusion.csv").read_bytes(),
        ))
    check(10, "determinism", outputs[0] == outputs[1],
          "feature CSVs, selection and reports byte-identical")
