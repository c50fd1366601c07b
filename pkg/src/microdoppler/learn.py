"""Feature selection, balancing, classification, fusion and evaluation.

Greedy mutual-information selection (mRMR), SMOTE class balancing and PCA
are implemented here directly; the four classifier kinds are mature
scikit-learn estimators (plus a random-subspace boosted LDA ensemble built
on top of them) behind a thin, deterministic model wrapper.
"""

from __future__ import annotations

import json
import pickle
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.discriminant_analysis import LinearDiscriminantAnalysis
from sklearn.ensemble import RandomForestClassifier
from sklearn.model_selection import StratifiedKFold, train_test_split
from sklearn.neighbors import KNeighborsClassifier
from sklearn.svm import SVC

from .errors import (AlignmentError, DataError, DomainError, ShapeError,
                     StratificationError)

MODEL_KINDS = ("rfc", "svm_rbf", "knn", "lda_ensemble")
MRMR_BINS = 8                # equal-frequency quantisation for mutual information
DEFAULT_K_FINAL = 150        # second-round selection width after fusion

_MODEL_MAGIC = b"MICRODOPPLER-ML1"


@dataclass(frozen=True)
class Dataset:
    """Labelled feature rows from one sensor (or the fused pseudo-sensor)."""

    X: np.ndarray
    labels: tuple
    sample_ids: tuple
    sensor_id: str
    feature_names: tuple
    class_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.X.ndim != 2:
            raise ShapeError("feature matrix must be 2-D")
        if len(self.labels) != self.X.shape[0] or len(self.sample_ids) != self.X.shape[0]:
            raise ShapeError("labels/sample_ids must match the row count")
        if len(self.feature_names) != self.X.shape[1]:
            raise ShapeError("feature_names must match the column count")
        if not self.class_names:
            object.__setattr__(self, "class_names", tuple(sorted(set(self.labels))))
        else:
            object.__setattr__(self, "class_names", tuple(self.class_names))
        if not set(self.labels) <= set(self.class_names):
            raise DomainError("labels must be drawn from class_names")

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def y(self) -> np.ndarray:
        return np.asarray(self.labels)

    def class_counts(self) -> dict:
        return {c: self.labels.count(c) for c in self.class_names}

    def select(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return replace(self, X=self.X[:, idx],
                       feature_names=tuple(self.feature_names[i] for i in idx))


# ---------------------------------------------------------------------------
# Mutual information and mRMR
# ---------------------------------------------------------------------------

def quantize_equal_frequency(x: np.ndarray, bins: int = MRMR_BINS) -> np.ndarray:
    """Per-column equal-frequency binning into integer codes 0..bins-1."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=np.int64)
    qs = np.linspace(0.0, 1.0, bins + 1)[1:-1]
    for col in range(x.shape[1]):
        edges = np.quantile(x[:, col], qs)
        out[:, col] = np.searchsorted(edges, x[:, col], side="right")
    return out


def mutual_information_discrete(a: np.ndarray, b: np.ndarray) -> float:
    """MI in nats between two integer-coded variables."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    na, nb = int(a.max()) + 1, int(b.max()) + 1
    joint = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb) / a.size
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def mrmr_select(data: Dataset, k: int, bins: int = MRMR_BINS) -> np.ndarray:
    """Greedy minimum-redundancy maximum-relevance feature ordering.

    The first pick maximises I(feature; label); each subsequent pick
    maximises I(f; y) - mean over already-selected s of I(f; s).  Exact ties
    resolve to the lowest feature index, so the selection for k is always a
    prefix of the selection for k+1.
    """
    if not 1 <= k <= data.n_features:
        raise DomainError(f"k must lie in 1..{data.n_features}")
    q = quantize_equal_frequency(data.X, bins)
    classes = {c: i for i, c in enumerate(data.class_names)}
    y = np.array([classes[l] for l in data.labels], dtype=np.int64)
    d = data.n_features
    relevance = np.array([mutual_information_discrete(q[:, i], y) for i in range(d)])
    selected = [int(np.argmax(relevance))]
    redundancy_sum = np.zeros(d)
    remaining = np.ones(d, dtype=bool)
    remaining[selected[0]] = False
    while len(selected) < k:
        last = selected[-1]
        for i in np.nonzero(remaining)[0]:
            redundancy_sum[i] += mutual_information_discrete(q[:, i], q[:, last])
        score = np.where(remaining,
                         relevance - redundancy_sum / len(selected), -np.inf)
        nxt = int(np.argmax(score))  # argmax takes the lowest index on ties
        selected.append(nxt)
        remaining[nxt] = False
    return np.array(selected)


# ---------------------------------------------------------------------------
# SMOTE
# ---------------------------------------------------------------------------

def smote(data: Dataset, k_neighbors: int = 5, seed: int = 0) -> Dataset:
    """Equalise class counts by synthesising minority samples.

    Every synthetic row is x + u*(x_nn - x) with u ~ Uniform(0,1) and x_nn
    one of the k nearest same-class neighbours, so synthetics stay on
    segments between existing points.  Original rows are preserved verbatim;
    a class with a single sample cannot be oversampled.
    """
    counts = data.class_counts()
    majority = max(counts.values())
    if all(c == majority for c in counts.values()):
        return replace(data)
    rng = np.random.default_rng(seed)
    new_rows, new_labels, new_ids = [], [], []
    for cls in data.class_names:
        short = majority - counts[cls]
        if short == 0:
            continue
        if counts[cls] < 2:
            raise DomainError(f"class {cls!r} has a single sample; cannot oversample")
        rows = np.nonzero(data.y() == cls)[0]
        xc = data.X[rows]
        dists = np.linalg.norm(xc[:, None, :] - xc[None, :, :], axis=2)
        order = np.argsort(dists, axis=1)
        k_eff = min(k_neighbors, len(rows) - 1)
        for i in range(short):
            base = int(rng.integers(len(rows)))
            nn = int(order[base][1 + rng.integers(k_eff)])
            u = rng.random()
            new_rows.append(xc[base] + u * (xc[nn] - xc[base]))
            new_labels.append(cls)
            new_ids.append(f"smote-{cls}-{i}")
    return replace(data,
                   X=np.vstack([data.X, np.array(new_rows)]),
                   labels=data.labels + tuple(new_labels),
                   sample_ids=data.sample_ids + tuple(new_ids))


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaResult:
    components: np.ndarray           # (k, d) projection basis rows
    projected: np.ndarray            # (n, k)
    explained_variance: np.ndarray   # eigenvalues, decreasing
    explained_variance_ratio: np.ndarray
    mean: np.ndarray
    effective_rank: int              # rank of the covariance; may be < requested k


def pca(data: Dataset, n_components: int) -> PcaResult:
    """Mean-centred eigendecomposition of the sample covariance.

    Components are ordered by decreasing eigenvalue with the sign fixed so
    the largest-magnitude loading is positive.  If the covariance is rank
    deficient the basis is truncated to the effective rank, which the result
    reports.
    """
    x = data.X
    n, d = x.shape
    if not 1 <= n_components <= min(n, d):
        raise DomainError("n_components must lie in 1..min(n_samples, n_features)")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / max(n - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    total = float(eigvals.sum())
    rank = int(np.sum(eigvals > max(eigvals[0], 1e-300) * 1e-12)) if eigvals.size else 0
    k = min(n_components, max(rank, 1))
    comps = eigvecs[:, :k].T.copy()
    for row in comps:
        peak = np.argmax(np.abs(row))
        if row[peak] < 0:
            row *= -1.0
    projected = xc @ comps.T
    ratio = eigvals[:k] / total if total > 0 else np.zeros(k)
    return PcaResult(components=comps, projected=projected,
                     explained_variance=eigvals[:k],
                     explained_variance_ratio=ratio, mean=mean,
                     effective_rank=rank)


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------

class RandomSubspaceBoostedLda:
    """Boosted ensemble of LDA learners, each fit on a random feature subspace.

    SAMME-style boosting with weighted resampling (LDA has no native sample
    weights).  Deterministic under the seed.
    """

    def __init__(self, n_estimators=30, subspace_frac=0.5, seed=0):
        self.n_estimators = n_estimators
        self.subspace_frac = subspace_frac
        self.seed = seed
        self.learners_ = []

    def fit(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        n, d = x.shape
        k = len(self.classes_)
        rng = np.random.default_rng(self.seed)
        sub_d = max(1, int(round(self.subspace_frac * d)))
        weights = np.full(n, 1.0 / n)
        self.learners_ = []
        for _ in range(self.n_estimators):
            sub = np.sort(rng.choice(d, size=sub_d, replace=False))
            idx = rng.choice(n, size=n, replace=True, p=weights)
            if len(np.unique(y[idx])) < k:      # keep every class represented
                idx = np.concatenate([idx, [int(np.nonzero(y == c)[0][0])
                                            for c in self.classes_]])
            lda = LinearDiscriminantAnalysis()
            lda.fit(x[idx][:, sub], y[idx])
            pred = lda.predict(x[:, sub])
            err = float(np.clip(np.sum(weights * (pred != y)), 1e-9, 1.0 - 1e-9))
            alpha = np.log((1.0 - err) / err) + np.log(k - 1.0)
            if alpha <= 0.0:
                continue
            weights = weights * np.exp(alpha * (pred != y))
            weights /= weights.sum()
            self.learners_.append((sub, lda, alpha))
        if not self.learners_:                  # all learners rejected; keep one
            lda = LinearDiscriminantAnalysis().fit(x, y)
            self.learners_.append((np.arange(d), lda, 1.0))
        return self

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        votes = np.zeros((x.shape[0], len(self.classes_)))
        class_pos = {c: i for i, c in enumerate(self.classes_)}
        for sub, lda, alpha in self.learners_:
            pred = lda.predict(x[:, sub])
            for row, p in enumerate(pred):
                votes[row, class_pos[p]] += alpha
        return self.classes_[np.argmax(votes, axis=1)]


def _build_estimator(kind: str, hyperparams: dict, seed: int, n_features: int):
    hp = hyperparams or {}
    if kind == "rfc":
        return RandomForestClassifier(n_estimators=hp.get("n_trees", 100),
                                      random_state=seed)
    if kind == "svm_rbf":
        gamma = hp.get("gamma", 1.0 / n_features)
        return SVC(kernel="rbf", C=hp.get("c", 1.0), gamma=gamma)
    if kind == "knn":
        return KNeighborsClassifier(n_neighbors=hp.get("k", 5))
    if kind == "lda_ensemble":
        return RandomSubspaceBoostedLda(n_estimators=hp.get("n_estimators", 30),
                                        subspace_frac=hp.get("subspace_frac", 0.5),
                                        seed=seed)
    raise DomainError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


@dataclass(frozen=True)
class TrainedModel:
    """Immutable fitted classifier plus the feature subset it consumes."""

    kind: str
    estimator: object
    feature_subset: np.ndarray
    class_names: tuple
    hyperparams: dict = field(default_factory=dict)
    train_report: dict = field(default_factory=dict)
    seed: int = 0

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.feature_subset.size:
            raise ShapeError(
                f"model consumes {self.feature_subset.size}-wide inputs, got {x.shape}")
        return np.asarray(self.estimator.predict(x))


def train(kind: str, data: Dataset, hyperparams: dict | None = None,
          seed: int = 0, feature_subset=None) -> TrainedModel:
    """Fit one of the four classifier kinds on a dataset.

    ``feature_subset`` records which original feature indices the (already
    selected) columns of ``data`` correspond to; it defaults to 0..d-1.
    """
    kind = kind.lower()
    if len(set(data.labels)) < 2:
        raise DomainError("training requires at least two classes")
    est = _build_estimator(kind, hyperparams or {}, seed, data.n_features)
    est.fit(data.X, data.y())
    subset = (np.arange(data.n_features) if feature_subset is None
              else np.asarray(feature_subset, dtype=int))
    if subset.size != data.n_features:
        raise ShapeError("feature_subset length must match the trained width")
    pred = np.asarray(est.predict(data.X))
    report = {
        "train_accuracy": float(np.mean(pred == data.y())),
        "confusion": confusion_matrix(data.y(), pred, data.class_names).tolist(),
    }
    return TrainedModel(kind=kind, estimator=est, feature_subset=subset,
                        class_names=data.class_names,
                        hyperparams=dict(hyperparams or {}),
                        train_report=report, seed=seed)


def confusion_matrix(truth, pred, class_names) -> np.ndarray:
    """Rows are truth, columns are prediction."""
    pos = {c: i for i, c in enumerate(class_names)}
    out = np.zeros((len(class_names), len(class_names)), dtype=int)
    for t, p in zip(truth, pred):
        out[pos[t], pos[p]] += 1
    return out


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray
    per_class_recall: dict
    class_names: tuple
    protocol: str


def _report(truth, pred, class_names, protocol) -> EvalReport:
    conf = confusion_matrix(truth, pred, class_names)
    recall = {}
    for i, c in enumerate(class_names):
        total = conf[i].sum()
        recall[c] = float(conf[i, i] / total) if total else 0.0
    return EvalReport(accuracy=float(np.mean(np.asarray(truth) == np.asarray(pred))),
                      confusion=conf, per_class_recall=recall,
                      class_names=tuple(class_names), protocol=protocol)


def score(model: TrainedModel, data: Dataset) -> EvalReport:
    """Plain scoring of a fitted model on a labelled dataset."""
    pred = model.predict(data.X)
    return _report(data.y(), pred, data.class_names, "score")


def evaluate(model: TrainedModel, data: Dataset, protocol: str,
             seed: int = 0) -> EvalReport:
    """Protocol-driven evaluation, refitting the model template per split.

    ``holdout_75_25``: one stratified 75/25 split, train on 75, test on 25.
    ``kfold_5``: stratified five-fold cross validation; accuracy is the mean
    over folds and the confusion matrix is summed across them.
    """
    protocol = protocol.lower()
    y = data.y()
    if protocol == "holdout_75_25":
        try:
            idx_train, idx_test = train_test_split(
                np.arange(data.n_samples), test_size=0.25, stratify=y,
                random_state=seed)
        except ValueError as exc:
            raise StratificationError(str(exc)) from exc
        if set(y[idx_train]) != set(data.class_names):
            raise StratificationError("a class is absent from the training split")
        est = _build_estimator(model.kind, model.hyperparams, seed,
                               data.n_features)
        est.fit(data.X[idx_train], y[idx_train])
        pred = np.asarray(est.predict(data.X[idx_test]))
        return _report(y[idx_test], pred, data.class_names, protocol)
    if protocol == "kfold_5":
        try:
            folds = list(StratifiedKFold(n_splits=5, shuffle=True,
                                         random_state=seed).split(data.X, y))
        except ValueError as exc:
            raise StratificationError(str(exc)) from exc
        accs = []
        conf = np.zeros((len(data.class_names),) * 2, dtype=int)
        for idx_train, idx_test in folds:
            if set(y[idx_train]) != set(data.class_names):
                raise StratificationError("a class is absent from a training fold")
            est = _build_estimator(model.kind, model.hyperparams, seed,
                                   data.n_features)
            est.fit(data.X[idx_train], y[idx_train])
            pred = np.asarray(est.predict(data.X[idx_test]))
            accs.append(float(np.mean(pred == y[idx_test])))
            conf += confusion_matrix(y[idx_test], pred, data.class_names)
        recall = {}
        for i, c in enumerate(data.class_names):
            total = conf[i].sum()
            recall[c] = float(conf[i, i] / total) if total else 0.0
        return EvalReport(accuracy=float(np.mean(accs)), confusion=conf,
                          per_class_recall=recall,
                          class_names=data.class_names, protocol=protocol)
    raise DomainError(f"unknown protocol {protocol!r}")


def cross_val_accuracy(kind: str, x, y, folds: int = 3, seed: int = 0) -> float:
    """Stratified k-fold accuracy of a freshly built classifier; used as the
    genetic-search fitness."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    skf = StratifiedKFold(n_splits=folds, shuffle=False)
    accs = []
    for idx_train, idx_test in skf.split(x, y):
        est = _build_estimator(kind, {}, seed, x.shape[1])
        est.fit(x[idx_train], y[idx_train])
        accs.append(float(np.mean(np.asarray(est.predict(x[idx_test])) == y[idx_test])))
    return float(np.mean(accs))


# ---------------------------------------------------------------------------
# Fusion
# ---------------------------------------------------------------------------

def fuse_and_select(per_sensor: dict[str, Dataset],
                    k_final: int = DEFAULT_K_FINAL) -> Dataset:
    """Concatenate per-sensor features sample-wise, then select again.

    Sample ids must align across sensors (same set, same labels); the fused
    matrix keeps ``sensor:name`` provenance in its feature names so the
    composition of the final selection remains reportable.
    """
    if not per_sensor:
        raise DomainError("no sensors to fuse")
    sensors = sorted(per_sensor)
    first = per_sensor[sensors[0]]
    order = np.argsort(np.asarray(first.sample_ids))
    ref_ids = tuple(first.sample_ids[i] for i in order)
    ref_labels = tuple(first.labels[i] for i in order)
    blocks, names = [], []
    for sensor in sensors:
        ds = per_sensor[sensor]
        if sorted(ds.sample_ids) != sorted(ref_ids):
            raise AlignmentError(f"sensor {sensor!r} has misaligned sample ids")
        pos = {sid: i for i, sid in enumerate(ds.sample_ids)}
        rows = [pos[sid] for sid in ref_ids]
        if tuple(ds.labels[i] for i in rows) != ref_labels:
            raise AlignmentError(f"sensor {sensor!r} disagrees on labels")
        blocks.append(ds.X[rows])
        names.extend(f"{sensor}:{n}" for n in ds.feature_names)
    fused = Dataset(np.hstack(blocks), ref_labels, ref_ids, "fused",
                    tuple(names), first.class_names)
    idx = mrmr_select(fused, min(k_final, fused.n_features))
    return fused.select(idx)


def selection_composition(feature_names) -> dict:
    """Count selected features per (sensor, family); names look like
    ``sensor:family_i`` or ``family_i_sensor``."""
    out: dict = {}
    for name in feature_names:
        if ":" in name:
            sensor, rest = name.split(":", 1)
        else:
            rest = name
            parts = name.split("_")
            sensor = parts[-1] if len(parts) >= 3 else "-"
        family = rest.split("_", 1)[0]
        out[(sensor, family)] = out.get((sensor, family), 0) + 1
    return out


# ---------------------------------------------------------------------------
# Native-versus-imitation probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeReport:
    accuracy: float
    variance_ratio: float      # imitation variance over native variance
    centroid_shift: float      # distance between group centroids, PCA space
    n_per_group: int


def native_vs_imitation_probe(native: Dataset, imitation: Dataset, seed: int = 0,
                              n_components: int = 10) -> ProbeReport:
    """Discriminate the two signing populations on PCA features.

    Group sizes are equalised by seeded subsampling of the larger set (with
    a SMOTE pass if some imbalance survives), features are projected onto
    the leading principal components of the pooled data, and an RBF SVM is
    scored with stratified five-fold cross validation.  The centroid shift
    and variance ratio are measured on the raw projections; for the SVM the
    projections are variance-normalised per component so the kernel width
    is meaningful regardless of feature scale.
    """
    if native.n_samples == 0 or imitation.n_samples == 0:
        raise DomainError("both groups must be non-empty")
    rng = np.random.default_rng(seed)

    def subsample(ds: Dataset, n: int) -> Dataset:
        keep = np.sort(rng.choice(ds.n_samples, size=n, replace=False))
        return replace(ds, X=ds.X[keep],
                       labels=tuple(ds.labels[i] for i in keep),
                       sample_ids=tuple(ds.sample_ids[i] for i in keep))

    n = min(native.n_samples, imitation.n_samples)
    nat = subsample(native, n) if native.n_samples > n else native
    imi = subsample(imitation, n) if imitation.n_samples > n else imitation

    x = np.vstack([nat.X, imi.X])
    y = np.array(["native"] * nat.n_samples + ["imitation"] * imi.n_samples)
    pooled = Dataset(x, tuple(y), tuple(f"s{i}" for i in range(len(y))),
                     "probe", tuple(f"f{i}" for i in range(x.shape[1])),
                     ("imitation", "native"))
    if len(set(pooled.labels)) == 2 and \
            pooled.labels.count("native") != pooled.labels.count("imitation"):
        pooled = smote(pooled, seed=seed)

    k = min(n_components, pooled.n_samples - 1, pooled.n_features)
    proj = pca(pooled, k).projected
    y = pooled.y()
    nat_pts = proj[y == "native"]
    imi_pts = proj[y == "imitation"]
    centroid_shift = float(np.linalg.norm(nat_pts.mean(axis=0) - imi_pts.mean(axis=0)))
    var_nat = float(nat_pts.var(axis=0).sum())
    var_imi = float(imi_pts.var(axis=0).sum())
    variance_ratio = var_imi / var_nat if var_nat > 0 else np.inf

    scale = proj.std(axis=0)
    scale[scale == 0] = 1.0
    zproj = proj / scale
    skf = StratifiedKFold(n_splits=5, shuffle=True, random_state=seed)
    accs = []
    for idx_train, idx_test in skf.split(zproj, y):
        est = SVC(kernel="rbf", C=1.0, gamma=1.0 / zproj.shape[1])
        est.fit(zproj[idx_train], y[idx_train])
        accs.append(float(np.mean(est.predict(zproj[idx_test]) == y[idx_test])))
    return ProbeReport(accuracy=float(np.mean(accs)),
                       variance_ratio=variance_ratio,
                       centroid_shift=centroid_shift, n_per_group=n)


# ---------------------------------------------------------------------------
# Persistence and reports
# ---------------------------------------------------------------------------

def save_model(path, model: TrainedModel) -> None:
    """Versioned binary: magic, kind, feature subset, metadata, estimator blob."""
    meta = json.dumps({
        "class_names": list(model.class_names),
        "hyperparams": model.hyperparams,
        "train_report": model.train_report,
        "seed": model.seed,
    }).encode()
    blob = pickle.dumps(model.estimator)
    kind = model.kind.encode()
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<H", 1))                     # format version
        fh.write(struct.pack("<H", len(kind)) + kind)
        subset = model.feature_subset.astype("<u4")
        fh.write(struct.pack("<I", subset.size) + subset.tobytes())
        fh.write(struct.pack("<I", len(meta)) + meta)
        fh.write(struct.pack("<Q", len(blob)) + blob)


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        if fh.read(16) != _MODEL_MAGIC:
            raise DataError(f"{path}: not a model file")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != 1:
            raise DataError(f"{path}: unsupported model version {version}")
        (klen,) = struct.unpack("<H", fh.read(2))
        kind = fh.read(klen).decode()
        (slen,) = struct.unpack("<I", fh.read(4))
        subset = np.frombuffer(fh.read(4 * slen), dtype="<u4").astype(int)
        (mlen,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(mlen))
        (blen,) = struct.unpack("<Q", fh.read(8))
        estimator = pickle.loads(fh.read(blen))
    return TrainedModel(kind=kind, estimator=estimator, feature_subset=subset,
                        class_names=tuple(meta["class_names"]),
                        hyperparams=meta["hyperparams"],
                        train_report=meta["train_report"], seed=meta["seed"])


def report_text(report: EvalReport) -> str:
    lines = [f"protocol: {report.protocol}",
             f"accuracy: {report.accuracy:.6f}",
             "per_class_recall:"]
    for c in report.class_names:
        lines.append(f"  {c}: {report.per_class_recall[c]:.6f}")
    return "\n".join(lines) + "\n"


def confusion_csv(report: EvalReport) -> str:
    """Confusion matrix CSV, truth in rows, prediction in columns."""
    lines = ["truth\\pred," + ",".join(report.class_names)]
    for i, c in enumerate(report.class_names):
        lines.append(c + "," + ",".join(str(v) for v in report.confusion[i]))
    return "\n".join(lines) + "\n"
