"""Train the four-convolution flower classifier end to end.

Loads the bundled iris CSV, standardizes features on the training pool,
trains the network onto its Walsh-row targets with SGD + momentum and early
stopping, then scores the held-out test set through the minimum-distance
classifier.
"""

from pathlib import Path

import numpy as np

from divfe import SplitSpec, TrainConfig, evaluate, fit, make_codebook
from divfe.data_io import Standardizer, load_iris, split
from divfe.modelspec import load_model_spec

REPO = Path(__file__).resolve().parent.parent


def main():
    dataset = load_iris(REPO / "data" / "iris.csv")
    print(f"loaded {len(dataset)} samples, classes = {dataset.class_names}")

    train_set, val_set, test_set = split(dataset, SplitSpec(0.8, 0.1, seed=0))
    print(f"split: {len(train_set)} train / {len(val_set)} val / {len(test_set)} test")

    norm = Standardizer.fit(np.concatenate([train_set.samples, val_set.samples]))
    train_set, val_set, test_set = (norm.apply(train_set), norm.apply(val_set),
                                    norm.apply(test_set))

    model = load_model_spec(REPO / "specs" / "iris.spec")
    model.initialize(seed=0)
    print(f"model: {model.weight_count()} connection weights, "
          f"output rank {model.rank}")

    codebook = make_codebook(dataset.class_count, model.rank)
    config = TrainConfig(learning_rate=0.015, momentum=0.9, batch_size=8,
                         max_epochs=600, patience=80, seed=0)
    report = fit(model, train_set, val_set, codebook, config,
                 log=lambda e, tl, vl, va: (
                     print(f"epoch {e:3d}  train_loss={tl:.4f}  val_loss={vl:.4f}  "
                           f"val_acc={va:.3f}") if e % 25 == 0 else None))

    print(f"\nstopped after {report.epochs_run} epochs "
          f"(best validation at epoch {report.best_epoch})")
    result = evaluate(model, test_set, codebook)
    print(f"test accuracy: {result.accuracy:.3f}")
    print("confusion matrix (rows = truth, columns = prediction):")
    for row in result.confusion:
        print("   ", row)


if __name__ == "__main__":
    main()
