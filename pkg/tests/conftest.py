import numpy as np
import pytest

from qfselect import feasibility, model as model_mod, ranks, synth
from qfselect.dataset import load_image


def natural_image(rng, h, w, channels=3):
    """Smoothed-noise image with photographic statistics."""
    img = rng.uniform(0, 255, (h + 16, w + 16, channels))
    kern = np.ones(5) / 5.0
    for axis in (0, 1):
        img = np.apply_along_axis(lambda v: np.convolve(v, kern, mode="same"), axis, img)
    out = np.clip(1.6 * (img - 128) + 128 + rng.normal(0, 5, img.shape), 0, 255)
    return out[:h, :w].astype(np.uint8)


class Pipeline:
    """Demo corpus plus every derived artifact the tests share."""

    def __init__(self, root):
        self.root = root
        self.manifest = synth.generate_corpus(root, synth.CorpusSpec(n_images=240, seed=42))
        self.classifier = ranks.train_toy_classifier(self.manifest, seed=42)
        self.rank_table = ranks.build_rank_table(
            self.manifest, self.classifier, feasibility.DEFAULT_QF_SET
        )
        self.calibration = feasibility.calibrate(
            self.manifest, threshold=0.8, hit_rate_floor=0.9
        )
        self.pruned = self.calibration.pruned_set
        self.labels = feasibility.build_training_set(
            self.manifest, self.rank_table, self.pruned
        )
        self.label_matrix = np.array([r.q for r in self.labels])
        self.raw_features = np.stack(
            [model_mod.extract_raw_features(load_image(r)) for r in self.manifest.records]
        )

    def train(self, **overrides):
        cfg = model_mod.TrainConfig(
            **{"form": "one", "pr": 0.3, "dt": 0.7, "seed": 42, **overrides}
        )
        return model_mod.train(self.raw_features, self.label_matrix, self.pruned, cfg)


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    return Pipeline(tmp_path_factory.mktemp("demo_corpus"))


@pytest.fixture(scope="session")
def trained_model(pipeline):
    return pipeline.train()
