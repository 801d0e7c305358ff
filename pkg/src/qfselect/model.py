"""Per-quality-factor feasibility classifiers.

Each quality factor in the calibrated set gets an independent binary head
trained with a weighted binary cross-entropy: the positive-class weight
(``pr``) trades precision against recall, and the decision threshold
(``dt``) cuts the sigmoid output at inference.  Form ONE shares one
standardized feature extraction across all heads (linear logistic heads);
form TWO gives every head its own small MLP and its own standardization
statistics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import QfSelectError

FEATURE_SPEC = "dct-stats-v1"
NUM_DCT_BANDS = 15
FEATURE_DIM = NUM_DCT_BANDS + 2 + 1 + 8  # bands + mean/std + gradient + histogram
HIDDEN_DIM = 16
PROB_CLAMP = 1e-12

FORM_ONE = "one"
FORM_TWO = "two"

_BAND_INDEX = (np.arange(8)[:, None] + np.arange(8)[None, :]).reshape(-1)


def extract_raw_features(img: np.ndarray) -> np.ndarray:
    """Unstandardized feature vector: DCT band energies, luma stats,
    gradient magnitude, and an 8-bin luma histogram."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise QfSelectError(f"expected (H, W, 3) image, got {img.shape}")
    h, w = img.shape[:2]
    if h < 8 or w < 8:
        raise QfSelectError("image must be at least 8x8 for feature extraction")
    luma, _, _ = kernels.rgb_to_ycbcr(np.ascontiguousarray(img, np.uint8))

    ph, pw = (-h) % 8, (-w) % 8
    padded = np.pad(luma, ((0, ph), (0, pw)), mode="edge") if (ph or pw) else luma
    hh, ww = padded.shape
    blocks = (
        padded.reshape(hh // 8, 8, ww // 8, 8).transpose(0, 2, 1, 3).reshape(-1, 8, 8)
    )
    coefs = kernels.fdct_blocks(blocks.astype(np.int64)) / float(kernels.DCT_SCALE)
    logmag = np.log1p(np.abs(coefs)).reshape(-1, 64)
    bands = np.zeros(NUM_DCT_BANDS)
    for band in range(NUM_DCT_BANDS):
        bands[band] = logmag[:, _BAND_INDEX == band].mean()

    lf = luma.astype(np.float64)
    gy, gx = np.gradient(lf)
    grad_mean = float(np.sqrt(gx * gx + gy * gy).mean())
    hist = np.bincount((luma >> 5).reshape(-1), minlength=8)[:8] / luma.size

    return np.concatenate(
        [bands, [lf.mean(), lf.std()], [grad_mean], hist.astype(np.float64)]
    )


def standardization_stats(raw_features: np.ndarray):
    """Per-feature mean and scale (std, floored to 1 where degenerate)."""
    mean = raw_features.mean(axis=0)
    scale = raw_features.std(axis=0)
    scale = np.where(scale < 1e-9, 1.0, scale)
    return mean, scale


@dataclass(frozen=True)
class FeatureExtractor:
    spec: str = FEATURE_SPEC
    mean: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    scale: np.ndarray = field(default_factory=lambda: np.ones(FEATURE_DIM))


def extract_features(img: np.ndarray, fe: FeatureExtractor) -> np.ndarray:
    """Standardized feature vector of length FEATURE_DIM."""
    return (extract_raw_features(img) - fe.mean) / fe.scale


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class BinaryHead:
    """One per-QF feasibility classifier (weights + pr + dt)."""

    form: str
    qf: int
    pr: float
    dt: float
    params: dict  # form ONE: {"w", "b"}; form TWO: {"w1","b1","w2","b2","mean","scale"}

    def __post_init__(self):
        if self.form not in (FORM_ONE, FORM_TWO):
            raise QfSelectError(f"unknown head form {self.form!r}")
        if self.pr <= 0:
            raise QfSelectError("precision constant must be > 0")
        if not 0.0 < self.dt < 1.0:
            raise QfSelectError("decision threshold must lie in (0, 1)")

    def logits(self, feats: np.ndarray) -> np.ndarray:
        """feats: (N, F) standardized for ONE, raw for TWO."""
        if self.form == FORM_ONE:
            return feats @ self.params["w"] + self.params["b"]
        x = (feats - self.params["mean"]) / self.params["scale"]
        hidden = np.tanh(x @ self.params["w1"].T + self.params["b1"])
        return hidden @ self.params["w2"] + self.params["b2"]


def _forward_batch(head: BinaryHead, feats: np.ndarray) -> np.ndarray:
    return _stable_sigmoid(head.logits(feats))


def forward(head: BinaryHead, feats: np.ndarray):
    """Sigmoid feasibility probability; stable for |logit| up to ~700.

    A single feature vector yields a float, a (N, F) batch an array.
    """
    p = _forward_batch(head, np.atleast_2d(feats))
    return float(p[0]) if np.ndim(feats) == 1 else p


def loss(head: BinaryHead, feats: np.ndarray, labels: np.ndarray) -> float:
    """Weighted binary cross-entropy with probability clamping."""
    feats = np.atleast_2d(feats)
    labels = np.asarray(labels, np.float64)
    if feats.shape[0] == 0:
        raise QfSelectError("empty batch")
    p = np.clip(_forward_batch(head, feats), PROB_CLAMP, 1.0 - PROB_CLAMP)
    terms = head.pr * labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)
    return float(-terms.mean())


def _dloss_dlogit(head: BinaryHead, p: np.ndarray, labels: np.ndarray) -> np.ndarray:
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    n = p.shape[0]
    return inside * (-head.pr * labels * (1.0 - p) + (1.0 - labels) * p) / n


def grad(head: BinaryHead, feats: np.ndarray, labels: np.ndarray) -> dict:
    """Analytic gradient of the clamped loss for every head parameter."""
    feats = np.atleast_2d(feats)
    labels = np.asarray(labels, np.float64)
    if feats.shape[0] == 0:
        raise QfSelectError("empty batch")
    p = _forward_batch(head, feats)
    dz = _dloss_dlogit(head, p, labels)
    if head.form == FORM_ONE:
        return {"w": feats.T @ dz, "b": float(dz.sum())}
    x = (feats - head.params["mean"]) / head.params["scale"]
    hidden = np.tanh(x @ head.params["w1"].T + head.params["b1"])
    dw2 = hidden.T @ dz
    db2 = float(dz.sum())
    dh = dz[:, None] * head.params["w2"][None, :]
    da = dh * (1.0 - hidden * hidden)
    return {"w1": da.T @ x, "b1": da.sum(axis=0), "w2": dw2, "b2": db2}


@dataclass(frozen=True)
class TrainConfig:
    form: str = FORM_ONE
    pr: float | tuple = 0.5
    dt: float | tuple = 0.5
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 0.5
    seed: int = 42


@dataclass
class SelectorModel:
    extractor: FeatureExtractor
    qf_set: tuple[int, ...]
    heads: list
    training: dict

    def head_for(self, qf: int) -> BinaryHead:
        for head in self.heads:
            if head.qf == qf:
                return head
        raise QfSelectError(f"no head for quality factor {qf}")


def _broadcast(value, n: int, name: str) -> tuple:
    if np.isscalar(value):
        return tuple(float(value) for _ in range(n))
    vals = tuple(float(v) for v in value)
    if len(vals) != n:
        raise QfSelectError(f"{name} vector length {len(vals)} != number of heads {n}")
    return vals


def _init_head(form: str, qf: int, pr: float, dt: float, rng, stats) -> BinaryHead:
    if form == FORM_ONE:
        params = {"w": rng.normal(0.0, 0.01, FEATURE_DIM), "b": 0.0}
    else:
        mean, scale = stats
        params = {
            "w1": rng.normal(0.0, 0.2, (HIDDEN_DIM, FEATURE_DIM)),
            "b1": np.zeros(HIDDEN_DIM),
            "w2": rng.normal(0.0, 0.2, HIDDEN_DIM),
            "b2": 0.0,
            "mean": mean.copy(),
            "scale": scale.copy(),
        }
    return BinaryHead(form=form, qf=qf, pr=pr, dt=dt, params=params)


def _sgd_step(head: BinaryHead, feats, labels, lr: float):
    g = grad(head, feats, labels)
    if head.form == FORM_ONE:
        head.params["w"] -= lr * g["w"]
        head.params["b"] -= lr * g["b"]
    else:
        head.params["w1"] -= lr * g["w1"]
        head.params["b1"] -= lr * g["b1"]
        head.params["w2"] -= lr * g["w2"]
        head.params["b2"] -= lr * g["b2"]


def train(
    raw_features: np.ndarray,
    labels: np.ndarray,
    qf_set,
    config: TrainConfig = TrainConfig(),
) -> SelectorModel:
    """Train one head per quality factor by mini-batch SGD.

    ``raw_features``: (N, F) unstandardized vectors from
    :func:`extract_raw_features` in manifest order; ``labels``: (N, n)
    binary feasibility matrix aligned with ``qf_set``.
    """
    raw_features = np.asarray(raw_features, np.float64)
    labels = np.asarray(labels)
    qfs = tuple(int(q) for q in qf_set)
    n_heads = len(qfs)
    if raw_features.shape[0] == 0:
        raise QfSelectError("empty training set")
    if labels.shape != (raw_features.shape[0], n_heads):
        raise QfSelectError(
            f"labels shape {labels.shape} != (n_images, n_heads) "
            f"({raw_features.shape[0]}, {n_heads})"
        )
    prs = _broadcast(config.pr, n_heads, "pr")
    dts = _broadcast(config.dt, n_heads, "dt")
    mean, scale = standardization_stats(raw_features)
    std_features = (raw_features - mean) / scale

    heads = []
    final_losses = []
    warnings = []
    for j, qf in enumerate(qfs):
        rng = np.random.default_rng([config.seed, qf])
        head = _init_head(config.form, qf, prs[j], dts[j], rng, (mean, scale))
        col = labels[:, j].astype(np.float64)
        if col.min() == col.max():
            warnings.append(
                f"qf{qf}: all training labels identical ({int(col[0])}); head trained anyway"
            )
        feats = std_features if config.form == FORM_ONE else raw_features
        n = feats.shape[0]
        for _ in range(config.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                idx = perm[start : start + config.batch_size]
                _sgd_step(head, feats[idx], col[idx], config.learning_rate)
        final_losses.append(loss(head, feats, col))
        heads.append(head)

    extractor = FeatureExtractor(spec=FEATURE_SPEC, mean=mean, scale=scale)
    training = {
        "seed": config.seed,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "form": config.form,
        "final_losses": final_losses,
        "warnings": warnings,
    }
    return SelectorModel(extractor=extractor, qf_set=qfs, heads=heads, training=training)


def head_probabilities(model: SelectorModel, img: np.ndarray) -> np.ndarray:
    """Per-head sigmoid outputs; features are extracted once per image."""
    raw = extract_raw_features(img)
    if model.heads and model.heads[0].form == FORM_ONE:
        feats = (raw - model.extractor.mean) / model.extractor.scale
    else:
        feats = raw
    return np.array([forward(h, feats) for h in model.heads])


def predict_feasible(model: SelectorModel, img: np.ndarray) -> tuple[int, ...]:
    """Binary feasibility vector over the model's QF set (p >= dt counts)."""
    probs = head_probabilities(model, img)
    return tuple(int(p >= h.dt) for p, h in zip(probs, model.heads))


# ---------------------------------------------------------------------------
# Model file format: selector-model/1
# ---------------------------------------------------------------------------


def _head_to_json(head: BinaryHead) -> dict:
    out = {"form": head.form, "qf": head.qf, "pr": head.pr, "dt": head.dt}
    if head.form == FORM_ONE:
        out["w"] = head.params["w"].tolist()
        out["b"] = head.params["b"]
    else:
        out["w1"] = head.params["w1"].tolist()
        out["b1"] = head.params["b1"].tolist()
        out["w2"] = head.params["w2"].tolist()
        out["b2"] = head.params["b2"]
        out["mean"] = head.params["mean"].tolist()
        out["scale"] = head.params["scale"].tolist()
    return out


def _head_from_json(raw: dict) -> BinaryHead:
    form = raw["form"]
    if form == FORM_ONE:
        params = {"w": np.asarray(raw["w"], np.float64), "b": float(raw["b"])}
    else:
        params = {
            "w1": np.asarray(raw["w1"], np.float64),
            "b1": np.asarray(raw["b1"], np.float64),
            "w2": np.asarray(raw["w2"], np.float64),
            "b2": float(raw["b2"]),
            "mean": np.asarray(raw["mean"], np.float64),
            "scale": np.asarray(raw["scale"], np.float64),
        }
    return BinaryHead(form=form, qf=int(raw["qf"]), pr=float(raw["pr"]), dt=float(raw["dt"]), params=params)


def model_to_json(model: SelectorModel) -> str:
    doc = {
        "format": "selector-model/1",
        "extractor": {
            "spec": model.extractor.spec,
            "mean": model.extractor.mean.tolist(),
            "scale": model.extractor.scale.tolist(),
        },
        "qf_set": list(model.qf_set),
        "heads": [_head_to_json(h) for h in model.heads],
        "training": model.training,
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def model_from_json(text: str) -> SelectorModel:
    doc = json.loads(text)
    if doc.get("format") != "selector-model/1":
        raise QfSelectError(f"unsupported model format {doc.get('format')!r}")
    extractor = FeatureExtractor(
        spec=doc["extractor"]["spec"],
        mean=np.asarray(doc["extractor"]["mean"], np.float64),
        scale=np.asarray(doc["extractor"]["scale"], np.float64),
    )
    heads = [_head_from_json(h) for h in doc["heads"]]
    return SelectorModel(
        extractor=extractor,
        qf_set=tuple(int(q) for q in doc["qf_set"]),
        heads=heads,
        training=doc.get("training", {}),
    )


def save_model(model: SelectorModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path) -> SelectorModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
