"""Handcrafted feature families extracted from 65x65 micro-Doppler images.

Four families make up the 932-entry per-sensor vector: 7 envelope summaries,
500 two-dimensional DCT coefficients in zigzag order, 325 filter-bank
cepstral values (5 coefficients x 65 frames) and 100 linear-prediction
coefficients (50 from the column-averaged profile, 50 from the row-averaged
profile).  The triangular filter bank behind the cepstral family can be
tuned to the data with a small genetic search whose fitness is the
cross-validated accuracy of a 100-tree random forest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft
from scipy import linalg as _linalg

from .errors import DataError, DomainError, ShapeError
from .dsp import Spectrogram

LOG_FLOOR = 1e-12            # floor inside the cepstral log
ENVELOPE_PERCENTILE = 0.95
N_DCT = 500
N_CEPSTRA = 5
LPC_ORDER = 50
DEFAULT_N_FILTERS = 12

FAMILY_SIZES = {"env": 7, "dct": N_DCT, "fwcc": 325, "lpc": 2 * LPC_ORDER}
FEATURES_PER_SENSOR = sum(FAMILY_SIZES.values())  # 932

_BANK_MAGIC = "# microdoppler-filterbank v1"


@dataclass(frozen=True)
class FilterBank:
    """Triangular filters over frequency-bin indices 0..n_bins-1.

    Each filter is a (start, peak, end) triple with start < peak < end; the
    response rises linearly from 0 at start to 1 at peak and falls back to 0
    at end.
    """

    filters: tuple
    n_bins: int

    def __post_init__(self):
        object.__setattr__(self, "filters",
                           tuple((int(s), int(p), int(e)) for s, p, e in self.filters))
        if not self.filters:
            raise DomainError("filter bank must hold at least one filter")
        for s, p, e in self.filters:
            if not (0 <= s < p < e <= self.n_bins - 1):
                raise DomainError(
                    f"filter ({s},{p},{e}) violates 0 <= start < peak < end <= {self.n_bins - 1}")

    def __len__(self):
        return len(self.filters)

    def response(self, m: int) -> np.ndarray:
        s, p, e = self.filters[m]
        h = np.zeros(self.n_bins)
        k = np.arange(self.n_bins)
        rising = (k >= s) & (k <= p)
        falling = (k > p) & (k <= e)
        h[rising] = (k[rising] - s) / (p - s)
        h[falling] = (e - k[falling]) / (e - p)
        return h

    def response_matrix(self) -> np.ndarray:
        return np.stack([self.response(m) for m in range(len(self))])


def uniform_filterbank(n_filters: int = DEFAULT_N_FILTERS, n_bins: int = 65) -> FilterBank:
    """Evenly spaced triangular filters with 50% overlap across all bins."""
    if n_filters < 1:
        raise DomainError("n_filters must be >= 1")
    if n_bins < 3 or n_filters > (n_bins - 1) // 2:
        raise DomainError("too many filters for the bin count")
    points = np.round(np.linspace(0, n_bins - 1, n_filters + 2)).astype(int)
    # strictly increasing anchor points even after rounding
    for i in range(1, points.size):
        points[i] = max(points[i], points[i - 1] + 1)
    points = np.minimum(points, n_bins - 1)
    for i in range(points.size - 2, -1, -1):
        points[i] = min(points[i], points[i + 1] - 1)
    filters = [(points[m], points[m + 1], points[m + 2]) for m in range(n_filters)]
    return FilterBank(tuple(filters), n_bins)


def envelope_features(spec: Spectrogram,
                      percentile: float = ENVELOPE_PERCENTILE) -> np.ndarray:
    """Seven summaries of the upper/lower percentile envelopes.

    Per column the upper envelope is the largest frequency at which the
    cumulative energy from the top passes (1-percentile) of the column
    total; the lower envelope is the mirror image from the bottom.  Columns
    with no energy contribute 0 Hz to both envelopes.  Returns
    [max, min, mean] of the upper envelope, the same for the lower, then
    mean(upper) - mean(lower).
    """
    if not 0.0 < percentile < 1.0:
        raise DomainError("percentile must lie in (0, 1)")
    v = spec.values
    if v.size == 0:
        raise ShapeError("empty spectrogram")
    tail = 1.0 - percentile
    totals = v.sum(axis=0)
    upper = np.zeros(v.shape[1])
    lower = np.zeros(v.shape[1])
    for col in range(v.shape[1]):
        total = totals[col]
        if total <= 0.0:
            continue
        from_top = np.cumsum(v[::-1, col])
        k = int(np.searchsorted(from_top, tail * total))
        upper[col] = spec.freq_axis[v.shape[0] - 1 - k]
        from_bottom = np.cumsum(v[:, col])
        k = int(np.searchsorted(from_bottom, tail * total))
        lower[col] = spec.freq_axis[k]
    return np.array([upper.max(), upper.min(), upper.mean(),
                     lower.max(), lower.min(), lower.mean(),
                     upper.mean() - lower.mean()])


def dct2(values: np.ndarray) -> np.ndarray:
    """Orthonormal type-II 2-D DCT (Parseval-preserving)."""
    return _fft.dctn(np.asarray(values, dtype=float), type=2, norm="ortho")


def zigzag_indices(rows: int, cols: int) -> list[tuple[int, int]]:
    """Antidiagonal scan order from the low-frequency corner, JPEG style."""
    order = []
    for s in range(rows + cols - 1):
        diag = [(r, s - r) for r in range(max(0, s - cols + 1), min(rows, s + 1))]
        if s % 2 == 0:
            diag.reverse()
        order.extend(diag)
    return order


def dct_features(spec: Spectrogram, n: int = N_DCT) -> np.ndarray:
    """First ``n`` 2-D DCT coefficients of a 65x65 image in zigzag order."""
    if spec.values.shape != (65, 65):
        raise ShapeError(f"expected a 65x65 spectrogram, got {spec.values.shape}")
    if not 1 <= n <= 65 * 65:
        raise DomainError("n out of range")
    coeffs = dct2(spec.values)
    order = zigzag_indices(65, 65)[:n]
    return np.array([coeffs[r, c] for r, c in order])


def fwcc(spec: Spectrogram, bank: FilterBank, n_coeffs: int = N_CEPSTRA) -> np.ndarray:
    """Filter-bank cepstral features, vectorised row-major over (j, frame).

    Per frame n: E[n, m] = log(max(sum_k S[n, k] h_m(k), floor)), then
    C[j, n] = sum_m E[n, m] cos(j (m - 1/2) pi / M) for j = 1..n_coeffs.
    With 5 coefficients on a 65-frame spectrogram this yields 325 values.
    """
    if n_coeffs < 1:
        raise DomainError("n_coeffs must be >= 1")
    if bank.n_bins != spec.values.shape[0]:
        raise DomainError("filter bank bin count does not match the spectrogram")
    h = bank.response_matrix()                 # (M, K)
    energies = h @ spec.values                 # (M, T)
    e = np.log(np.maximum(energies, LOG_FLOOR))
    m = len(bank)
    j = np.arange(1, n_coeffs + 1)[:, None]
    basis = np.cos(j * (np.arange(1, m + 1) - 0.5)[None, :] * np.pi / m)  # (J, M)
    c = basis @ e                              # (J, T)
    return c.ravel()


# ---------------------------------------------------------------------------
# Genetic search over filter-bank geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaParams:
    population: int = 40
    generations: int = 30
    crossover_rate: float = 0.8
    mutation_rate: float = 0.05
    seed: int = 0
    cv_folds: int = 3
    n_coeffs: int = N_CEPSTRA


@dataclass(frozen=True)
class GaResult:
    bank: FilterBank
    fitness_trace: tuple      # best-so-far fitness per generation (incl. gen 0)
    best_fitness: float


def _random_chromosome(n_filters, n_bins, rng):
    genes = np.empty(3 * n_filters, dtype=int)
    for m in range(n_filters):
        genes[3 * m:3 * m + 3] = np.sort(rng.choice(n_bins, size=3, replace=False))
    return genes


def _repair(genes, n_filters, n_bins):
    """Restore start < peak < end per filter after crossover/mutation."""
    out = genes.copy()
    top = n_bins - 1
    for m in range(n_filters):
        s, p, e = np.sort(out[3 * m:3 * m + 3])
        if p <= s:
            p = s + 1
        if e <= p:
            e = p + 1
        if e > top:
            e = top
            p = min(p, e - 1)
            s = min(s, p - 1)
        out[3 * m:3 * m + 3] = (s, p, e)
    return out


def chromosome_to_bank(genes, n_bins) -> FilterBank:
    triples = [(genes[3 * m], genes[3 * m + 1], genes[3 * m + 2])
               for m in range(len(genes) // 3)]
    return FilterBank(tuple(triples), n_bins)


def optimize_filterbank_ga(specs: list[Spectrogram], labels, n_filters: int,
                           params: GaParams = GaParams()) -> GaResult:
    """Evolve triangular-filter positions for best downstream accuracy.

    A chromosome is the 3*M integer gene string (start, peak, end per
    filter); ordering is repaired after crossover and mutation.  Fitness is
    the stratified cross-validated accuracy of a 100-tree random forest on
    the cepstral features the candidate bank produces.  Elitism keeps the
    best individual, so the best-fitness trace never decreases.  Fully
    deterministic under ``params.seed``.
    """
    from . import learn  # deferred: learn never imports this module

    labels = list(labels)
    if len(set(labels)) < 2:
        raise DomainError("need at least two classes to optimise a bank")
    if n_filters < 1:
        raise DomainError("n_filters must be >= 1")
    if len(specs) != len(labels):
        raise ShapeError("specs and labels must have equal length")
    n_bins = specs[0].values.shape[0]
    rng = np.random.default_rng(params.seed)
    y = np.asarray(labels)
    cache: dict[bytes, float] = {}

    def fitness(genes) -> float:
        key = genes.tobytes()
        if key not in cache:
            bank = chromosome_to_bank(genes, n_bins)
            x = np.stack([fwcc(s, bank, params.n_coeffs) for s in specs])
            cache[key] = learn.cross_val_accuracy(
                "rfc", x, y, folds=params.cv_folds, seed=params.seed)
        return cache[key]

    pop = [_random_chromosome(n_filters, n_bins, rng)
           for _ in range(params.population)]
    scores = np.array([fitness(g) for g in pop])
    best_idx = int(np.argmax(scores))
    best_genes, best_score = pop[best_idx].copy(), float(scores[best_idx])
    trace = [best_score]

    for _ in range(params.generations):
        children = [best_genes.copy()]  # elitism
        while len(children) < params.population:
            a = _tournament(pop, scores, rng)
            b = _tournament(pop, scores, rng)
            child = a.copy()
            if rng.random() < params.crossover_rate:
                cut = int(rng.integers(1, len(a)))
                child[cut:] = b[cut:]
            mutate = rng.random(len(child)) < params.mutation_rate
            child[mutate] = rng.integers(0, n_bins, size=int(mutate.sum()))
            children.append(_repair(child, n_filters, n_bins))
        pop = children
        scores = np.array([fitness(g) for g in pop])
        gen_best = int(np.argmax(scores))
        if scores[gen_best] > best_score:
            best_score = float(scores[gen_best])
            best_genes = pop[gen_best].copy()
        trace.append(best_score)

    return GaResult(bank=chromosome_to_bank(best_genes, n_bins),
                    fitness_trace=tuple(trace), best_fitness=best_score)


def _tournament(pop, scores, rng, size=3):
    idx = rng.integers(0, len(pop), size=size)
    return pop[idx[np.argmax(scores[idx])]]


# ---------------------------------------------------------------------------
# Linear prediction
# ---------------------------------------------------------------------------

def lpc_coefficients(signal, order: int) -> np.ndarray:
    """Forward linear-predictor coefficients a_k of s[n] = sum a_k s[n-k] + e[n].

    Autocorrelation method: biased autocorrelation estimates feed the
    Toeplitz normal equations (solved by Levinson recursion).  A constant or
    otherwise degenerate signal yields the documented all-zero fallback.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ShapeError("signal must be one-dimensional")
    if not 1 <= order < x.size:
        raise DomainError("order must satisfy 1 <= order < len(signal)")
    if np.ptp(x) == 0.0:
        return np.zeros(order)
    n = x.size
    r = np.array([np.dot(x[:n - k], x[k:]) / n for k in range(order + 1)])
    if r[0] <= 0.0:
        return np.zeros(order)
    try:
        a = _linalg.solve_toeplitz((r[:order], r[:order]), r[1:order + 1])
    except np.linalg.LinAlgError:
        return np.zeros(order)
    if not np.all(np.isfinite(a)):
        return np.zeros(order)
    return a


def lpc_features(spec: Spectrogram, order_cols: int = LPC_ORDER,
                 order_rows: int = LPC_ORDER) -> np.ndarray:
    """Concatenated predictors of the column-averaged and row-averaged profiles."""
    rows, cols = spec.values.shape
    if order_cols >= rows or order_rows >= cols:
        raise DomainError("order must be smaller than the profile length")
    col_profile = spec.values.mean(axis=1)   # average of the columns
    row_profile = spec.values.mean(axis=0)   # average of the rows
    return np.concatenate([lpc_coefficients(col_profile, order_cols),
                           lpc_coefficients(row_profile, order_rows)])


# ---------------------------------------------------------------------------
# Full per-sensor vector
# ---------------------------------------------------------------------------

def feature_names() -> list[str]:
    names = [f"env_{i}" for i in range(1, FAMILY_SIZES["env"] + 1)]
    names += [f"dct_{i}" for i in range(1, FAMILY_SIZES["dct"] + 1)]
    names += [f"fwcc_{i}" for i in range(1, FAMILY_SIZES["fwcc"] + 1)]
    names += [f"lpc_{i}" for i in range(1, FAMILY_SIZES["lpc"] + 1)]
    return names


def extract_features(spec: Spectrogram, bank: FilterBank,
                     percentile: float = ENVELOPE_PERCENTILE) -> np.ndarray:
    """The full 932-entry vector: envelope, DCT, cepstral and LPC families."""
    vec = np.concatenate([
        envelope_features(spec, percentile),
        dct_features(spec, N_DCT),
        fwcc(spec, bank, N_CEPSTRA),
        lpc_features(spec, LPC_ORDER, LPC_ORDER),
    ])
    if vec.size != FEATURES_PER_SENSOR:
        raise ShapeError(f"feature vector has {vec.size} entries, expected "
                         f"{FEATURES_PER_SENSOR}")
    if not np.all(np.isfinite(vec)):
        raise DomainError("feature vector contains non-finite values")
    return vec


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_filterbank(path, bank: FilterBank) -> None:
    """Plain-text triples (start, peak, end) per line under a version header."""
    with open(path, "w") as fh:
        fh.write(_BANK_MAGIC + "\n")
        fh.write(f"n_bins {bank.n_bins}\n")
        for s, p, e in bank.filters:
            fh.write(f"{s} {p} {e}\n")


def load_filterbank(path) -> FilterBank:
    with open(path) as fh:
        if fh.readline().rstrip("\n") != _BANK_MAGIC:
            raise DataError(f"{path}: not a filter bank file")
        head = fh.readline().split()
        if len(head) != 2 or head[0] != "n_bins":
            raise DataError(f"{path}: missing n_bins line")
        n_bins = int(head[1])
        filters = []
        for line in fh:
            line = line.strip()
            if line:
                s, p, e = line.split()
                filters.append((int(s), int(p), int(e)))
    return FilterBank(tuple(filters), n_bins)


def write_feature_csv(path, matrix: np.ndarray, names: list[str], sensor_id: str,
                      sample_ids: list[str], labels: list[str],
                      comment: str | None = None) -> None:
    """Feature matrix CSV; header names each feature as ``name_sensor``.

    An optional comment (typically the run's config hash) goes on a leading
    ``#`` line.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise ShapeError("matrix width must match the name list")
    if matrix.shape[0] != len(sample_ids) or len(sample_ids) != len(labels):
        raise ShapeError("row metadata lengths must match the matrix")
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        header = ["sample_id", "label"] + [f"{n}_{sensor_id}" for n in names]
        fh.write(",".join(header) + "\n")
        for sid, lab, row in zip(sample_ids, labels, matrix):
            fh.write(",".join([sid, lab] + [repr(float(v)) for v in row]) + "\n")


def read_feature_csv(path):
    """Returns (matrix, feature names with sensor suffix, sample_ids, labels)."""
    with open(path) as fh:
        header = fh.readline()
        while header.startswith("#"):
            header = fh.readline()
        header = header.rstrip("\n").split(",")
        if header[:2] != ["sample_id", "label"]:
            raise DataError(f"{path}: not a feature CSV")
        names = header[2:]
        sample_ids, labels, rows = [], [], []
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            sample_ids.append(parts[0])
            labels.append(parts[1])
            rows.append([float(v) for v in parts[2:]])
    return np.array(rows), names, sample_ids, labels
