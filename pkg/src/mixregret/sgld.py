"""Posterior sampling by stochastic-gradient Langevin dynamics, and the
gradient-spectrum experiment on a small softmax classifier.

A Langevin chain with the Euler-Maruyama update

    theta <- theta + (eta/2) grad[log w(theta) + log P_theta(data)] + sqrt(eta) xi

has the Bayesian posterior as its (approximate, O(eta)-biased) stationary law;
averaging predictions over kept samples approximates the mixture learner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InstabilityError, ParameterError
from .families import SequenceSample, SoftmaxNet, as_sample
from .fisher import eigen_spectrum
from .info import as_generator, normalized


@dataclass(frozen=True)
class SgldConfig:
    """Chain hyperparameters; ``noise_scale=0`` turns the chain into plain
    gradient ascent (diagnostic mode)."""

    step_size: float
    steps: int
    burn_in: int
    thinning: int = 1
    minibatch: int | None = None
    boundary: str = "reflect"
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ParameterError("step_size must be positive")
        if not 0 <= self.burn_in < self.steps:
            raise ParameterError("need 0 <= burn_in < steps")
        if self.thinning < 1:
            raise ParameterError("thinning must be >= 1")
        if self.boundary not in ("reflect", "clip"):
            raise ParameterError("boundary must be 'reflect' or 'clip'")


@dataclass(frozen=True)
class EnsembleSample:
    """Kept post-burn-in parameter draws."""

    thetas: np.ndarray

    def __post_init__(self):
        if len(self.thetas) == 0:
            raise ParameterError("ensemble must hold at least one sample")

    def __len__(self):
        return len(self.thetas)


def _reflect(x, lo, hi):
    """Fold a point into [lo, hi] by repeated reflection at the walls."""
    span = hi - lo
    y = np.mod(x - lo, 2.0 * span)
    y = np.where(y > span, 2.0 * span - y, y)
    return lo + y


def sgld_chain(family, data, prior, config, seed):
    """Run one Langevin chain on the log posterior; deterministic given the seed.

    The gradient is the full-data score plus the prior score (zero inside a
    uniform box); with a minibatch the data term is rescaled by n/m. Samples
    are kept every ``thinning`` steps after ``burn_in``. Iterates are kept in
    the domain by per-coordinate reflection (or clipping); simplex-constrained
    families additionally get rescaled when a row overflows.
    """
    data = as_sample(data)
    rng = as_generator(seed)
    n = len(data)
    theta = prior.sample(1, rng)[0].copy()
    eta = config.step_size
    radius_cap = 1e3 * (prior.ball_radius if prior.lower is not None else 1.0 + np.linalg.norm(theta))
    kept = []
    lower, upper = family.lower, family.upper
    m = config.minibatch
    for step in range(config.steps):
        if m is not None and m < n:
            idx = rng.choice(n, size=m, replace=False)
            sub = SequenceSample(
                data.symbols[idx], None if data.labels is None else data.labels[idx]
            )
            grad = (n / m) * family.grad_log_likelihood(theta, sub)
        else:
            grad = family.grad_log_likelihood(theta, data)
        grad = grad + prior.grad_log_density(theta)
        theta = theta + 0.5 * eta * grad
        if config.noise_scale > 0:
            theta = theta + np.sqrt(eta) * config.noise_scale * rng.standard_normal(family.d)
        if config.boundary == "reflect":
            theta = _reflect(theta, lower, upper)
        else:
            theta = np.clip(theta, lower, upper)
        if not family.contains(theta):  # simplex overflow after box projection
            free = theta - lower
            total = free.sum()
            if total > 0:
                theta = lower + free * (1.0 - 1e-9) / total
        if np.linalg.norm(theta) > radius_cap:
            raise InstabilityError(
                f"chain diverged at step {step} (|theta| = {np.linalg.norm(theta):.3g}); reduce step_size"
            )
        if step >= config.burn_in and (step - config.burn_in) % config.thinning == 0:
            kept.append(theta.copy())
    return EnsembleSample(np.array(kept))


def ensemble_predict(samples, family, context=None):
    """Uniform average of the per-sample predictive distributions."""
    probs = family.predictive_nodes(samples.thetas, context)
    return normalized(probs.mean(axis=0), atol=1e-9)


# ---------------------------------------------------------------------------
# gradient-spectrum experiment (synthetic stand-in for image data)
# ---------------------------------------------------------------------------

DATASET_KINDS = ("structured", "random_labels", "random_inputs")


def make_net_dataset(kind, net, n_train, seed, separation=3.0):
    """Synthetic classification data for a :class:`SoftmaxNet`.

    ``structured``: well-separated Gaussian clusters, labels = cluster id.
    ``random_labels``: the same inputs with labels drawn uniformly.
    ``random_inputs``: pure-noise inputs with uniform labels.
    """
    if kind not in DATASET_KINDS:
        raise ParameterError(f"unknown dataset kind {kind!r}")
    rng = as_generator(seed)
    labels = rng.integers(0, net.c, size=n_train)
    means = np.zeros((net.c, net.p))
    for c in range(net.c):
        means[c, c % net.p] = separation
    X = means[labels] + rng.standard_normal((n_train, net.p))
    if kind == "random_labels":
        labels = rng.integers(0, net.c, size=n_train)
    elif kind == "random_inputs":
        X = rng.standard_normal((n_train, net.p))
        labels = rng.integers(0, net.c, size=n_train)
    return X, labels


def train_gd(net, X, y, lr=0.5, max_steps=4000, rel_tol=1e-7, patience=25, seed=0):
    """Plain full-batch gradient descent on the mean log-loss to a plateau.

    Returns (theta, converged, steps, final_loss); ``converged`` is False when
    the loss is still moving at the step budget.
    """
    rng = as_generator(seed)
    theta = 0.1 * rng.standard_normal(net.d)
    n = len(y)
    prev = np.inf
    stall = 0
    loss = np.inf
    for step in range(1, max_steps + 1):
        grad = net.per_sample_grads(theta, X, y).mean(axis=0)
        theta = theta + lr * grad
        loss = -net.log_likelihood(theta, (X, y)) / n
        if prev - loss < rel_tol * max(1.0, abs(loss)):
            stall += 1
            if stall >= patience:
                return theta, True, step, float(loss)
        else:
            stall = 0
        prev = loss
    return theta, False, max_steps, float(loss)


@dataclass(frozen=True)
class FimExperimentReport:
    """Spectrum of the gradient second-moment matrix at the trained point."""

    kind: str
    eigenvalues: np.ndarray
    tail_mass_ratio: float
    mean_grad_norm: float
    converged: bool
    steps: int
    final_loss: float

    def as_row(self):
        return {
            "row": "fim-spectrum", "kind": self.kind,
            "tail_mass_ratio": self.tail_mass_ratio,
            "mean_grad_norm": self.mean_grad_norm, "converged": self.converged,
            "steps": self.steps, "final_loss": self.final_loss,
            "top_eigenvalue": float(self.eigenvalues[0]),
        }


def fim_spectrum_experiment(kind, net, n_train, seed, lr=0.5, max_steps=4000, separation=3.0):
    """Train a small net on one dataset kind and return its gradient spectrum.

    The spectrum is the eigendecomposition of the empirical second moment of
    per-sample score vectors at the trained parameters. ``tail_mass_ratio`` is
    the eigenvalue mass beyond index d/2; structured data concentrates mass in
    few directions while randomized data spreads it out and shows larger
    per-sample gradients.
    """
    if not isinstance(net, SoftmaxNet):
        raise ParameterError("experiment requires a SoftmaxNet family")
    if net.d > 200:
        raise ParameterError("net too large for a dense desk-scale spectrum (d <= 200)")
    X, y = make_net_dataset(kind, net, n_train, seed, separation)
    theta, converged, steps, final_loss = train_gd(net, X, y, lr=lr, max_steps=max_steps, seed=seed)
    grads = net.per_sample_grads(theta, X, y)
    fim = grads.T @ grads / len(y)
    eigs = eigen_spectrum(fim)
    total = float(eigs.sum())
    tail = float(eigs[net.d // 2 :].sum() / total) if total > 0 else 0.0
    return FimExperimentReport(
        kind=kind,
        eigenvalues=eigs,
        tail_mass_ratio=tail,
        mean_grad_norm=float(np.linalg.norm(grads, axis=1).mean()),
        converged=converged,
        steps=steps,
        final_loss=final_loss,
    )


__all__ = [
    "SgldConfig",
    "EnsembleSample",
    "sgld_chain",
    "ensemble_predict",
    "DATASET_KINDS",
    "make_net_dataset",
    "train_gd",
    "FimExperimentReport",
    "fim_spectrum_experiment",
]
