"""Parameter optimization for class separation.

Plain finite-difference gradient descent with backtracking; no adaptive
optimizers, so runs are reproducible bit-for-bit given a seed. The main
client is the graph classifier, whose observable A(theta)^(x n) stays
permutation-invariant for every theta by construction.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .observables import PAULI
from .tensor import expectation_copies, expm_hermitian, kron_all


@dataclass
class TrainConfig:
    learning_rate: float = 0.2
    iterations: int = 100
    fd_step: float = 1e-4
    seed: int = 0
    loss: str = "mse_labels"

    def __post_init__(self):
        if self.learning_rate <= 0 or self.fd_step <= 0 or self.iterations < 1:
            raise ValueError("learning_rate, fd_step must be > 0; iterations >= 1")
        if self.loss not in ("mse_labels", "margin_separation"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class TrainableModel:
    """A parameterised scalar model value_fn(theta, state) with a start point."""

    value_fn: object
    theta0: np.ndarray
    name: str = "trainable"


@dataclass
class OptimizeResult:
    theta: np.ndarray
    loss_trace: list
    thetas: list = field(repr=False, default_factory=list)


def mse_labels(values, labels):
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels, dtype=float)
    return float(np.mean((values - labels) ** 2))


def margin_separation(values, labels):
    """Negated squared class-mean gap over the pooled within-class variance.

    With a single representative per class the variance term vanishes and
    the 1e-12 regulariser dominates; prefer mse_labels there.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    v0 = values[labels == 0]
    v1 = values[labels == 1]
    gap = v1.mean() - v0.mean()
    spread = (v0.var() if len(v0) > 1 else 0.0) + (v1.var() if len(v1) > 1 else 0.0)
    return float(-(gap**2) / (spread + 1e-12))


LOSSES = {"mse_labels": mse_labels, "margin_separation": margin_separation}


def dataset_loss(trainable, theta, dataset, kind="mse_labels"):
    values = [trainable.value_fn(theta, item.state) for item in dataset]
    labels = [item.label for item in dataset]
    return LOSSES[kind](values, labels)


def finite_diff_gradient(f, theta, step):
    """Central-difference gradient of a scalar function of a vector."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (f(up) - f(dn)) / (2 * step)
    return grad


def optimize(trainable, dataset, config):
    """Gradient descent with halving backtracking (max 20 halvings per step).

    The loss trace is nonincreasing; a step that cannot improve keeps the
    current point. Non-finite losses abort with a diagnostic.
    """

    def loss_at(th):
        value = dataset_loss(trainable, th, dataset, config.loss)
        if not np.isfinite(value):
            raise RuntimeError(f"non-finite loss {value} at theta={th}")
        return value

    theta = np.asarray(trainable.theta0, dtype=float).copy()
    current = loss_at(theta)
    trace = [current]
    thetas = [theta.copy()]
    for _ in range(config.iterations):
        grad = finite_diff_gradient(loss_at, theta, config.fd_step)
        lr = config.learning_rate
        for _ in range(20):
            cand = theta - lr * grad
            cand_loss = loss_at(cand)
            if cand_loss <= current:
                theta, current = cand, cand_loss
                break
            lr /= 2
        # on 20 failed halvings the point is kept and the trace stays flat
        trace.append(current)
        thetas.append(theta.copy())
    return OptimizeResult(theta=theta, loss_trace=trace, thetas=thetas)


def graph_invariant_model(n, theta0=(0.3, 0.2, 0.1)):
    """Permutation-invariant single-copy model A(theta)^(x n).

    A(theta) = R Z R^dag with R = exp(-i (t1 X + t2 Y + t3 Z)), so the
    observable is a tensor power of one single-qubit operator for every
    theta and commutes with all qubit permutations.
    """

    def value_fn(theta, rho):
        gen = theta[0] * PAULI["X"] + theta[1] * PAULI["Y"] + theta[2] * PAULI["Z"]
        r = expm_hermitian(gen, 1.0)
        a = r @ PAULI["Z"] @ r.conj().T
        return expectation_copies(rho, 1, kron_all([a] * n))

    return TrainableModel(value_fn=value_fn, theta0=np.asarray(theta0, float), name=f"graph_invariant_{n}")


def save_trace_csv(path, result):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n_params = len(result.theta)
        writer.writerow(["iteration", "loss"] + [f"theta_{i}" for i in range(n_params)])
        for i, (loss, theta) in enumerate(zip(result.loss_trace, result.thetas)):
            writer.writerow([i, repr(loss)] + [repr(float(t)) for t in theta])
