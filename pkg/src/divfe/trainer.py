"""Training loop, evaluation, N-trial protocol and layer growing.

Training minimizes the summed squared error between the feature extractor's
output and the Walsh row assigned to each sample's class, with SGD plus
momentum. After every epoch the validation set is scored through the
minimum-distance classifier; early stopping watches the validation loss and
the best-validation weights are restored at exit.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import mdn
from .augment import AugmentConfig, expand_training_set
from .data_io import LabeledDataset, SplitSpec, split
from .layers import BatchNorm, Conv1D, Conv2D, FeatureExtractor, Flatten, ReLU, mse_loss
from .numerics import ContractError, GradientTape, ShapeError, backward
from .walsh import WalshCodebook

# Sub-seed stream ids; all randomness of one run flows from a single master
# seed through SeedSequence(master, spawn_key=(trial, stream)).
STREAM_SPLIT = 0
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_DROPOUT = 3


def derive_rng(master_seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial, stream)))


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    augment: AugmentConfig | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ContractError("learning rate must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ContractError("batch_size, max_epochs and patience must be >= 1")


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    epochs_run: int = 0
    best_epoch: int = 0
    test_accuracy: float | None = None
    test_divergence: float | None = None
    wall_clock: float = 0.0
    growth_history: list = field(default_factory=list)   # (depth, train_accuracy)
    cap_reached: bool = False


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    mean_loss: float
    confusion: np.ndarray


def evaluate(model: FeatureExtractor, dataset: LabeledDataset,
             codebook: WalshCodebook, batch_size: int = 256) -> EvalResult:
    """Minimum-distance classification accuracy, mean loss and confusion matrix."""
    if len(dataset) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    c = codebook.class_count
    confusion = np.zeros((c, c), dtype=np.int64)
    total_loss = 0.0
    correct = 0
    targets = codebook.targets()
    for start in range(0, len(dataset), batch_size):
        xb = dataset.samples[start:start + batch_size]
        yb = dataset.labels[start:start + batch_size]
        out = model.forward(xb, mode="infer")
        pred = mdn.classify_batch(out, codebook)
        correct += int(np.sum(pred == yb))
        diff = out - targets[yb]
        total_loss += float(np.sum(diff * diff))
        np.add.at(confusion, (yb, pred), 1)
    n = len(dataset)
    return EvalResult(accuracy=correct / n, mean_loss=total_loss / n, confusion=confusion)


def _has_batchnorm(model):
    return any(isinstance(layer, BatchNorm) for layer in model.layers)


def fit(model: FeatureExtractor, train_set: LabeledDataset,
        validation_set: LabeledDataset, codebook: WalshCodebook,
        config: TrainConfig, trial: int = 0,
        log=None) -> TrainReport:
    """Train the feature extractor onto its Walsh targets.

    Stops at ``max_epochs`` or when the validation loss has not improved for
    ``patience`` epochs; the best-validation weights are restored at exit.
    """
    if codebook.class_count < 2:
        raise ContractError("training requires at least 2 classes")
    if model.rank != codebook.rank:
        raise ShapeError(f"model output dim {model.rank} != codebook rank {codebook.rank}")
    if train_set.labels.max() >= codebook.class_count:
        raise ContractError("dataset contains labels without an assigned Walsh row")

    if config.augment is not None and config.augment.factor > 1:
        train_set = expand_training_set(train_set, config.augment)

    shuffle_rng = derive_rng(config.seed, trial, STREAM_SHUFFLE)
    model.reseed_dropout(int(derive_rng(config.seed, trial, STREAM_DROPOUT).integers(2 ** 31)))

    targets = codebook.targets()[train_set.labels]
    params = model.trainable_params
    velocity = [np.zeros_like(p) for p in params]
    needs_batch2 = _has_batchnorm(model)

    report = TrainReport()
    best_val = np.inf
    best_snapshot = model.snapshot()
    since_best = 0
    start_time = time.perf_counter()
    n = len(train_set)

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if needs_batch2 and idx.size == 1:
                continue   # batch norm cannot normalize a single sample
            xb = train_set.samples[idx]
            tb = targets[idx]
            tape = GradientTape()
            out = model.forward(xb, mode="train", tape=tape)
            loss = mse_loss(out, tb, tape=tape)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}")
            grads = backward(tape, loss)
            for p, v in zip(params, velocity):
                g = grads.get(id(p))
                if g is None:
                    continue
                v *= config.momentum
                v += g
                p -= config.learning_rate * v
            batch_losses.append(float(loss))

        val = evaluate(model, validation_set, codebook)
        report.train_loss.append(float(np.mean(batch_losses)) if batch_losses else 0.0)
        report.val_loss.append(val.mean_loss)
        report.val_accuracy.append(val.accuracy)
        report.epochs_run = epoch
        if log is not None:
            log(epoch, report.train_loss[-1], val.mean_loss, val.accuracy)

        if val.mean_loss < best_val:
            best_val = val.mean_loss
            best_snapshot = model.snapshot()
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    model.restore(best_snapshot)
    report.wall_clock = time.perf_counter() - start_time
    return report


@dataclass(frozen=True)
class TrialResult:
    accuracies: tuple
    mean_accuracy: float
    std_accuracy: float
    reports: tuple


def run_trials(model_factory, dataset: LabeledDataset, split_spec: SplitSpec,
               codebook: WalshCodebook, config: TrainConfig, n_trials: int,
               normalizer_factory=None) -> TrialResult:
    """N independent seeded splits and trainings from fresh initializations.

    ``model_factory()`` must return a freshly wired, uninitialized model.
    ``normalizer_factory(train_pool_samples)``, when given, returns an object
    with ``apply(dataset)`` fitted on the training pool only.
    """
    if n_trials < 1:
        raise ContractError("n_trials must be >= 1")
    accuracies = []
    reports = []
    for trial in range(n_trials):
        split_seed = int(derive_rng(split_spec.seed, trial, STREAM_SPLIT).integers(2 ** 31))
        train_set, val_set, test_set = split(
            dataset, SplitSpec(split_spec.train_fraction,
                               split_spec.validation_fraction, split_seed))
        if normalizer_factory is not None:
            pool = np.concatenate([train_set.samples, val_set.samples])
            norm = normalizer_factory(pool)
            train_set, val_set, test_set = (norm.apply(train_set), norm.apply(val_set),
                                            norm.apply(test_set))
        model = model_factory()
        model.initialize(derive_rng(config.seed, trial, STREAM_INIT))
        report = fit(model, train_set, val_set, codebook, config, trial=trial)
        result = evaluate(model, test_set, codebook)
        report.test_accuracy = result.accuracy
        accuracies.append(result.accuracy)
        reports.append(report)
    acc = np.asarray(accuracies)
    return TrialResult(accuracies=tuple(accuracies),
                       mean_accuracy=float(acc.mean()),
                       std_accuracy=float(acc.std()),
                       reports=tuple(reports))


@dataclass(frozen=True)
class GrowthTemplate:
    """Per-depth schedule for the layer-growing procedure.

    At depth d the model is the first d-1 scheduled convolutions (each
    followed by optional batch norm and ReLU) plus a final convolution that
    spans the remaining map and emits one plane per codebook row, then a
    flatten. Depth 1 is therefore the spanning convolution alone, a purely
    linear map.
    """

    input_shape: tuple            # (C, L) or (C, H, W)
    filters: tuple                # ints for 1D, (h, w) pairs for 2D
    planes: int
    use_relu: bool = True
    use_batchnorm: bool = False

    @property
    def max_depth(self) -> int:
        return len(self.filters) + 1

    def build_model(self, depth: int, rank: int) -> FeatureExtractor:
        if depth < 1 or depth > self.max_depth:
            raise ContractError(f"depth {depth} outside 1..{self.max_depth}")
        is_1d = len(self.input_shape) == 2
        spatial = list(self.input_shape[1:])
        layers = []
        for i in range(depth - 1):
            f = self.filters[i]
            if is_1d:
                layers.append(Conv1D(f, self.planes))
                spatial[0] -= f - 1
            else:
                fh, fw = f
                layers.append(Conv2D(fh, fw, self.planes))
                spatial[0] -= fh - 1
                spatial[1] -= fw - 1
            if min(spatial) < 1:
                raise ShapeError(f"filter schedule exhausts the map at depth {depth}")
            if self.use_batchnorm:
                layers.append(BatchNorm())
            if self.use_relu:
                layers.append(ReLU())
        if is_1d:
            layers.append(Conv1D(spatial[0], rank))
        else:
            layers.append(Conv2D(spatial[0], spatial[1], rank))
        layers.append(Flatten())
        return FeatureExtractor(layers, self.input_shape, rank)


def grow_layers(template: GrowthTemplate, train_set: LabeledDataset,
                validation_set: LabeledDataset, codebook: WalshCodebook,
                config: TrainConfig, threshold: float = 0.95,
                max_depth: int = 9):
    """Add convolution layers until training accuracy clears the threshold.

    Every round retrains from a fresh initialization. Returns the first
    model whose training accuracy exceeds the threshold, or the best one
    found when the depth cap is reached (flagged in the report).
    """
    if not 0.0 <= threshold <= 1.0:
        raise ContractError(f"threshold must be in [0, 1], got {threshold}")
    max_depth = min(max_depth, template.max_depth)
    best = None   # (accuracy, model, report)
    history = []
    for depth in range(1, max_depth + 1):
        model = template.build_model(depth, codebook.rank)
        model.initialize(derive_rng(config.seed, depth, STREAM_INIT))
        report = fit(model, train_set, validation_set, codebook, config, trial=depth)
        train_acc = evaluate(model, train_set, codebook).accuracy
        history.append((depth, train_acc))
        if best is None or train_acc > best[0]:
            best = (train_acc, model, report)
        if threshold == 0.0 or train_acc > threshold:
            report.growth_history = history
            return model, report
    _, model, report = best
    report.growth_history = history
    report.cap_reached = True
    return model, report
