"""Watch the class-separability criterion rise during training.

The divergence tr(S^-1 B) compares the between-class scatter of the class
centers against the within-class scatter of the network outputs. Training
pulls each class toward its Walsh row, so the outputs tighten around
well-separated centers and the criterion grows.
"""

import numpy as np

from divfe import TrainConfig, analyze, fit, make_codebook
from divfe.data_io import LabeledDataset
from divfe.layers import Conv1D, Dense, FeatureExtractor, Flatten, ReLU


def make_blobs(seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(80, 8)) + 1.5
    b = rng.normal(size=(80, 8)) - 1.5
    ds = LabeledDataset(samples=np.concatenate([a, b]),
                        labels=np.repeat([0, 1], 80), class_count=2)
    n = len(ds)
    return ds.subset(np.arange(0, n, 2)), ds.subset(np.arange(1, n, 2))


def main():
    train_set, val_set = make_blobs()
    codebook = make_codebook(2, 8)
    model = FeatureExtractor(
        [Conv1D(3, 6), ReLU(), Flatten(), Dense(8)], (1, 8), 8)
    model.initialize(seed=0)

    def measure(tag):
        outputs = model.forward(train_set.samples, mode="infer")
        for mode in ("paper", "empirical"):
            report = analyze(outputs, train_set.labels, codebook, mode=mode)
            print(f"    {tag:14s} mode={mode:10s} divergence={report.divergence:10.4f}  "
                  f"ridge={report.ridge:.3g}")

    print("divergence of the untrained network:")
    measure("untrained")

    config = TrainConfig(learning_rate=0.01, batch_size=16, max_epochs=60,
                         patience=60, seed=0)
    fit(model, train_set, val_set, codebook, config)

    print("\ndivergence after training onto the Walsh targets:")
    measure("trained")
    print("\nThe codebook-centered ('paper') value climbs as outputs settle "
          "onto their assigned rows;\nthe empirical value climbs whenever the "
          "classes merely separate, whatever the centers.")


if __name__ == "__main__":
    main()
