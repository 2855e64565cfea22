"""Parametric hypothesis classes: evaluation, sampling, gradients, Fisher information.

Every family maps a parameter vector theta (a plain ``numpy`` array of length
``d``) to a probability law. Sequence families (Bernoulli, categorical, Markov)
model symbol strings over a finite alphabet; feature families (linear-Gaussian,
softmax net) model labels conditioned on feature vectors. All log quantities
are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import (
    BoundaryError,
    ContextError,
    DataError,
    NotAvailableError,
    ParameterError,
)
from .info import as_generator, logsumexp

# Finite stand-in for log(0) in vectorized count paths: multiplying by a zero
# count must yield 0, and exp() of any count multiple must underflow to 0.
_LOG_ZERO = -1e300


def _safe_log(p):
    with np.errstate(divide="ignore"):
        lp = np.log(p)
    return np.where(np.isneginf(lp), _LOG_ZERO, lp)


@dataclass(frozen=True)
class SequenceSample:
    """A length-n observation: a symbol string, or (features, labels) pairs.

    ``symbols`` holds the symbol string for sequence families, or the feature
    matrix (one row per observation) for supervised families, in which case
    ``labels`` holds the matching label vector.
    """

    symbols: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "symbols", np.asarray(self.symbols))
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels))
            if len(self.labels) != len(self.symbols):
                raise DataError("features and labels must have equal length")
        if len(self.symbols) < 1:
            raise DataError("a sample needs at least one observation")

    def __len__(self):
        return len(self.symbols)


def as_sample(data):
    if isinstance(data, SequenceSample):
        return data
    if isinstance(data, tuple) and len(data) == 2:
        return SequenceSample(np.asarray(data[0]), np.asarray(data[1]))
    return SequenceSample(np.asarray(data))


class ModelFamily:
    """Common surface of all hypothesis classes.

    Subclasses set ``kind``, ``d``, ``lower``/``upper`` (per-coordinate domain
    box) and ``alphabet`` (outcome alphabet size, ``None`` for a continuous
    label). Vectorized ``*_nodes`` variants evaluate a whole (M, d) matrix of
    parameter vectors at once; the base class supplies loop fallbacks.
    """

    kind: str
    d: int
    alphabet: int | None
    exchangeable = False

    # -- domain ------------------------------------------------------------
    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower - 1e-12) and np.all(theta <= self.upper + 1e-12))

    def contains_nodes(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.all((thetas >= self.lower - 1e-12) & (thetas <= self.upper + 1e-12), axis=1)

    def validate_theta(self, theta, interior=False):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.d,):
            raise ParameterError(f"{self.kind}: expected theta of length {self.d}, got shape {theta.shape}")
        if not self.contains(theta):
            raise ParameterError(f"{self.kind}: theta {theta} outside domain")
        if interior and self.on_boundary(theta):
            raise BoundaryError(f"{self.kind}: theta {theta} on domain boundary")
        return theta

    def on_boundary(self, theta):
        return bool(np.any(theta == self.lower) or np.any(theta == self.upper))

    # -- evaluation ----------------------------------------------------------
    def log_likelihood(self, theta, data):
        raise NotImplementedError

    def log_likelihood_nodes(self, thetas, data):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.array([self.log_likelihood(t, data) for t in thetas])

    def grad_log_likelihood(self, theta, data):
        raise NotImplementedError

    def sample_sequence(self, theta, n, seed):
        raise NotImplementedError

    def analytic_fisher(self, theta, n=1):
        raise NotAvailableError(f"{self.kind}: no closed-form Fisher information; use empirical_fim")

    def predictive(self, theta, context=None):
        raise NotAvailableError(f"{self.kind}: no finite-alphabet predictive distribution")

    def predictive_nodes(self, thetas, context=None):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.array([self.predictive(t, context) for t in thetas])

    def mle(self, data):
        raise NotAvailableError(f"{self.kind}: no closed-form ML estimator")

    def kl_nats(self, theta0, theta):
        """Single-observation KL divergence D(P_theta0 || P_theta) in nats."""
        raise NotAvailableError(f"{self.kind}: no closed-form KL divergence")

    def kl_nats_nodes(self, theta0, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.array([self.kl_nats(theta0, t) for t in thetas])

    def prior_bounds(self):
        """Natural domain box used when a prior is built for this family."""
        return np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)

    def __repr__(self):
        return f"{self.__class__.__name__}(d={self.d})"


# ---------------------------------------------------------------------------
# Bernoulli i.i.d.
# ---------------------------------------------------------------------------


class BernoulliIID(ModelFamily):
    """Coin with success probability theta, observations in {0, 1}."""

    kind = "bernoulli"
    d = 1
    alphabet = 2
    exchangeable = True

    def __init__(self):
        self.lower = np.array([0.0])
        self.upper = np.array([1.0])

    @staticmethod
    def _counts(data):
        x = as_sample(data).symbols
        if x.ndim != 1 or not np.all((x == 0) | (x == 1)):
            raise DataError("bernoulli data must be a flat 0/1 sequence")
        s = int(x.sum())
        return s, len(x) - s

    def log_likelihood(self, theta, data):
        theta = self.validate_theta(theta)
        s, f = self._counts(data)
        return float(xlogy(s, theta[0]) + xlogy(f, 1.0 - theta[0]))

    def log_likelihood_nodes(self, thetas, data):
        s, f = self._counts(data)
        return self.count_log_likelihood_nodes(thetas, np.array([[f, s]]))[0]

    def count_log_likelihood_nodes(self, thetas, counts):
        """log P over nodes for count vectors ``counts[:, (zeros, ones)]``."""
        th = np.atleast_2d(np.asarray(thetas, dtype=float))[:, 0]
        counts = np.atleast_2d(np.asarray(counts, dtype=float))
        lp = np.stack([_safe_log(1.0 - th), _safe_log(th)])  # (2, M)
        return counts @ lp

    def grad_log_likelihood(self, theta, data):
        theta = self.validate_theta(theta, interior=True)
        s, f = self._counts(data)
        return np.array([s / theta[0] - f / (1.0 - theta[0])])

    def sample_sequence(self, theta, n, seed):
        theta = self.validate_theta(theta)
        rng = as_generator(seed)
        return SequenceSample((rng.random(n) < theta[0]).astype(np.int64))

    def analytic_fisher(self, theta, n=1):
        theta = self.validate_theta(theta, interior=True)
        return np.array([[n / (theta[0] * (1.0 - theta[0]))]])

    def predictive(self, theta, context=None):
        theta = self.validate_theta(theta)
        return np.array([1.0 - theta[0], theta[0]])

    def predictive_nodes(self, thetas, context=None):
        th = np.atleast_2d(np.asarray(thetas, dtype=float))[:, 0]
        return np.column_stack([1.0 - th, th])

    def mle(self, data):
        s, f = self._counts(data)
        return np.array([s / (s + f)])

    def score_samples(self, theta, n_samples, rng):
        x = (rng.random(n_samples) < theta[0]).astype(float)
        return (x / theta[0] - (1.0 - x) / (1.0 - theta[0]))[:, None]

    def kl_nats(self, theta0, theta):
        return float(self.kl_nats_nodes(theta0, np.atleast_2d(theta))[0])

    def kl_nats_nodes(self, theta0, thetas):
        p = float(np.atleast_1d(theta0)[0])
        q = np.atleast_2d(np.asarray(thetas, dtype=float))[:, 0]
        from .info import bernoulli_kl_nats

        return bernoulli_kl_nats(p, q)

    def full_probs(self, theta):
        return self.predictive(theta)


# ---------------------------------------------------------------------------
# Categorical i.i.d.
# ---------------------------------------------------------------------------


class CategoricalIID(ModelFamily):
    """Die over alphabet {0..A-1}; free parameters are the first A-1 cell
    probabilities, the last is implied."""

    exchangeable = True
    kind = "categorical"

    def __init__(self, alphabet_size):
        if alphabet_size < 2:
            raise ParameterError("categorical alphabet must have at least 2 symbols")
        self.alphabet = int(alphabet_size)
        self.d = self.alphabet - 1
        self.lower = np.zeros(self.d)
        self.upper = np.ones(self.d)

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= -1e-12) and theta.sum() <= 1.0 + 1e-12)

    def contains_nodes(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.all(thetas >= -1e-12, axis=1) & (thetas.sum(axis=1) <= 1.0 + 1e-12)

    def on_boundary(self, theta):
        full = self.full_probs(theta)
        return bool(np.any(full <= 1e-15))

    def full_probs(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return np.append(theta, 1.0 - theta.sum())

    def full_probs_nodes(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.column_stack([thetas, 1.0 - thetas.sum(axis=1)])

    def _counts(self, data):
        x = as_sample(data).symbols
        if x.ndim != 1 or np.any(x < 0) or np.any(x >= self.alphabet):
            raise DataError(f"symbols must lie in 0..{self.alphabet - 1}")
        return np.bincount(x, minlength=self.alphabet).astype(float)

    def log_likelihood(self, theta, data):
        theta = self.validate_theta(theta)
        c = self._counts(data)
        return float(np.sum(xlogy(c, np.clip(self.full_probs(theta), 0.0, None))))

    def log_likelihood_nodes(self, thetas, data):
        return self.count_log_likelihood_nodes(thetas, self._counts(data)[None, :])[0]

    def count_log_likelihood_nodes(self, thetas, counts):
        full = np.clip(self.full_probs_nodes(thetas), 0.0, None)  # (M, A)
        counts = np.atleast_2d(np.asarray(counts, dtype=float))  # (K, A)
        return counts @ _safe_log(full).T

    def grad_log_likelihood(self, theta, data):
        theta = self.validate_theta(theta, interior=True)
        c = self._counts(data)
        full = self.full_probs(theta)
        return c[:-1] / full[:-1] - c[-1] / full[-1]

    def sample_sequence(self, theta, n, seed):
        theta = self.validate_theta(theta)
        rng = as_generator(seed)
        return SequenceSample(rng.choice(self.alphabet, size=n, p=np.clip(self.full_probs(theta), 0, None)))

    def analytic_fisher(self, theta, n=1):
        theta = self.validate_theta(theta, interior=True)
        full = self.full_probs(theta)
        return n * (np.diag(1.0 / full[:-1]) + 1.0 / full[-1])

    def predictive(self, theta, context=None):
        theta = self.validate_theta(theta)
        return np.clip(self.full_probs(theta), 0.0, None)

    def predictive_nodes(self, thetas, context=None):
        return np.clip(self.full_probs_nodes(thetas), 0.0, None)

    def mle(self, data):
        c = self._counts(data)
        return (c / c.sum())[:-1]

    def score_samples(self, theta, n_samples, rng):
        full = np.clip(self.full_probs(theta), 0.0, None)
        x = rng.choice(self.alphabet, size=n_samples, p=full)
        onehot = np.eye(self.alphabet)[x]
        return onehot[:, :-1] / full[:-1] - (onehot[:, -1] / full[-1])[:, None]

    def kl_nats(self, theta0, theta):
        from .info import kl_nats as _kl

        return _kl(self.full_probs(theta0), self.full_probs(theta))

    def kl_nats_nodes(self, theta0, thetas):
        p = self.full_probs(theta0)
        q = np.clip(self.full_probs_nodes(thetas), 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = xlogy(p[None, :], p[None, :]) - xlogy(p[None, :], q)
        out = terms.sum(axis=1)
        return np.where(np.isnan(out), np.inf, out)


# ---------------------------------------------------------------------------
# Markov chain with finite memory
# ---------------------------------------------------------------------------


class MarkovChain(ModelFamily):
    """Order-m chain over {0..A-1}; one transition row per context.

    The first m symbols are uniform by convention. Parameters are the first
    A-1 probabilities of every row, rows ordered by context index
    ``sum_i x_{t-i} A^(i-1)`` (most recent symbol = least significant digit).
    Doubles as a conditional table P(y | x) for the supervised setting when
    m = 1 (rows are the label laws per feature value).
    """

    kind = "markov"
    exchangeable = False

    def __init__(self, alphabet_size, order=1):
        if alphabet_size < 2 or order < 1:
            raise ParameterError("markov chain needs alphabet >= 2 and order >= 1")
        self.alphabet = int(alphabet_size)
        self.order = int(order)
        self.n_contexts = self.alphabet**self.order
        self.d = self.n_contexts * (self.alphabet - 1)
        self.lower = np.zeros(self.d)
        self.upper = np.ones(self.d)

    def _rows(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float)).reshape(self.n_contexts, self.alphabet - 1)
        return np.column_stack([theta, 1.0 - theta.sum(axis=1)])

    def _rows_nodes(self, thetas):
        """(M, S, A) transition tensor for a whole (M, d) parameter matrix."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        free = thetas.reshape(len(thetas), self.n_contexts, self.alphabet - 1)
        last = 1.0 - free.sum(axis=2, keepdims=True)
        return np.concatenate([free, last], axis=2)

    def contains(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.d,):
            return False
        rows = theta.reshape(self.n_contexts, self.alphabet - 1)
        return bool(np.all(rows >= -1e-12) and np.all(rows.sum(axis=1) <= 1.0 + 1e-12))

    def contains_nodes(self, thetas):
        free = self._rows_nodes(thetas)[:, :, :-1]
        sums = free.sum(axis=2)
        return np.all(free >= -1e-12, axis=(1, 2)) & np.all(sums <= 1.0 + 1e-12, axis=1)

    def on_boundary(self, theta):
        return bool(np.any(self._rows(theta) <= 1e-15))

    def context_index(self, context):
        context = np.asarray(context)
        if len(context) < self.order:
            raise ContextError(f"context of length {len(context)} < order {self.order}")
        recent = context[-self.order:]
        if np.any(recent < 0) or np.any(recent >= self.alphabet):
            raise DataError("context symbol outside alphabet")
        return int(sum(int(recent[-1 - i]) * self.alphabet**i for i in range(self.order)))

    def transition_counts(self, data):
        x = as_sample(data).symbols
        if np.any(x < 0) or np.any(x >= self.alphabet):
            raise DataError("symbol outside alphabet")
        counts = np.zeros((self.n_contexts, self.alphabet))
        for t in range(self.order, len(x)):
            counts[self.context_index(x[:t]), int(x[t])] += 1
        return counts

    def log_likelihood(self, theta, data):
        theta = self.validate_theta(theta)
        x = as_sample(data).symbols
        counts = self.transition_counts(data)
        rows = np.clip(self._rows(theta), 0.0, None)
        head = -min(len(x), self.order) * np.log(self.alphabet)
        return head + float(np.sum(xlogy(counts, rows)))

    def log_likelihood_nodes(self, thetas, data):
        x = as_sample(data).symbols
        counts = self.transition_counts(data).ravel()  # (S*A,)
        rows = np.clip(self._rows_nodes(thetas).reshape(-1, self.n_contexts * self.alphabet), 0.0, None)
        return _safe_log(rows) @ counts - min(len(x), self.order) * np.log(self.alphabet)

    def grad_log_likelihood(self, theta, data):
        theta = self.validate_theta(theta, interior=True)
        counts = self.transition_counts(data)
        rows = self._rows(theta)
        grad = counts[:, :-1] / rows[:, :-1] - (counts[:, -1] / rows[:, -1])[:, None]
        return grad.ravel()

    def sample_sequence(self, theta, n, seed):
        theta = self.validate_theta(theta)
        rng = as_generator(seed)
        rows = np.clip(self._rows(theta), 0.0, None)
        rows = rows / rows.sum(axis=1, keepdims=True)
        x = list(rng.choice(self.alphabet, size=min(n, self.order)))
        while len(x) < n:
            x.append(int(rng.choice(self.alphabet, p=rows[self.context_index(np.array(x))])))
        return SequenceSample(np.array(x, dtype=np.int64))

    def predictive(self, theta, context=None):
        theta = self.validate_theta(theta)
        if context is None:
            raise ContextError(f"markov predictive needs a context of length >= {self.order}")
        return np.clip(self._rows(theta)[self.context_index(context)], 0.0, None)

    def predictive_nodes(self, thetas, context=None):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if context is None:
            raise ContextError(f"markov predictive needs a context of length >= {self.order}")
        c = self.context_index(context)
        block = thetas.reshape(len(thetas), self.n_contexts, self.alphabet - 1)[:, c, :]
        return np.clip(np.column_stack([block, 1.0 - block.sum(axis=1)]), 0.0, None)

    def mle(self, data):
        counts = self.transition_counts(data)
        with np.errstate(invalid="ignore"):
            rows = counts / counts.sum(axis=1, keepdims=True)
        rows = np.where(np.isnan(rows), 1.0 / self.alphabet, rows)
        return rows[:, :-1].ravel()

    def sequence_kl_nats(self, theta0, theta, n):
        """Exact D(P_theta0(X^n) || P_theta(X^n)) in nats via forward marginals."""
        theta0 = self.validate_theta(theta0)
        theta = self.validate_theta(theta)
        rows0 = np.clip(self._rows(theta0), 0.0, None)
        rows1 = np.clip(self._rows(theta), 0.0, None)
        from .info import kl_nats as _kl

        row_kl = np.array([_kl(rows0[c], rows1[c]) for c in range(self.n_contexts)])
        # context distribution under theta0, starting uniform over the first m symbols
        ctx = np.full(self.n_contexts, 1.0 / self.n_contexts)
        total = 0.0
        shift = self.alphabet ** (self.order - 1)
        for _ in range(self.order, n):
            total += float(ctx @ row_kl)
            nxt = np.zeros_like(ctx)
            for c in range(self.n_contexts):
                for a in range(self.alphabet):
                    nxt[(c % shift) * self.alphabet + a] += ctx[c] * rows0[c, a]
            ctx = nxt
        return total

    # conditional-table view (supervised setting, order must be 1)
    def cond_predictive(self, theta, x):
        return self.predictive(theta, np.array([x]))

    def cond_predictive_nodes(self, thetas, x):
        return self.predictive_nodes(thetas, np.array([x]))

    def cond_log_likelihood_nodes(self, thetas, xs, ys):
        if self.order != 1:
            raise NotAvailableError("conditional-table view requires order 1")
        counts = np.zeros((self.n_contexts, self.alphabet))
        for x, y in zip(np.asarray(xs), np.asarray(ys)):
            counts[int(x), int(y)] += 1
        rows = np.clip(self._rows_nodes(thetas).reshape(-1, self.n_contexts * self.alphabet), 0.0, None)
        return _safe_log(rows) @ counts.ravel()

    def cond_kl_nats_nodes(self, theta0, thetas, x):
        """KL between label laws at feature x, vectorized over nodes."""
        p = self.cond_predictive(theta0, x)
        q = np.clip(self.cond_predictive_nodes(thetas, x), 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = xlogy(p[None, :], p[None, :]) - xlogy(p[None, :], q)
        out = terms.sum(axis=1)
        return np.where(np.isnan(out), np.inf, out)


# ---------------------------------------------------------------------------
# Linear-Gaussian regression
# ---------------------------------------------------------------------------


class LinearGaussian(ModelFamily):
    """y = x.theta + noise with known noise variance; Gaussian features.

    ``feature_cov`` is the covariance of the sampled feature vectors (identity
    by default); the single-sample Fisher information is feature_cov / sigma^2
    regardless of theta.
    """

    kind = "linear_gaussian"
    alphabet = None
    exchangeable = False

    def __init__(self, feature_dim, noise_var=1.0, half_width=10.0, feature_cov=None):
        if feature_dim < 1 or noise_var <= 0:
            raise ParameterError("need feature_dim >= 1 and noise_var > 0")
        self.d = int(feature_dim)
        self.noise_var = float(noise_var)
        self.lower = -half_width * np.ones(self.d)
        self.upper = half_width * np.ones(self.d)
        self.feature_cov = np.eye(self.d) if feature_cov is None else np.asarray(feature_cov, dtype=float)
        self._chol = np.linalg.cholesky(self.feature_cov)

    @staticmethod
    def _xy(data):
        s = as_sample(data)
        if s.labels is None:
            raise DataError("linear-gaussian data must be (features, labels)")
        X = np.atleast_2d(np.asarray(s.symbols, dtype=float))
        return X, np.asarray(s.labels, dtype=float)

    def log_likelihood(self, theta, data):
        theta = self.validate_theta(theta)
        X, y = self._xy(data)
        r = y - X @ theta
        return float(-0.5 * len(y) * np.log(2 * np.pi * self.noise_var) - r @ r / (2 * self.noise_var))

    def log_likelihood_nodes(self, thetas, data):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        X, y = self._xy(data)
        resid = y[None, :] - thetas @ X.T  # (M, n)
        return -0.5 * len(y) * np.log(2 * np.pi * self.noise_var) - np.sum(resid**2, axis=1) / (
            2 * self.noise_var
        )

    def grad_log_likelihood(self, theta, data):
        theta = self.validate_theta(theta, interior=True)
        X, y = self._xy(data)
        return X.T @ (y - X @ theta) / self.noise_var

    def sample_sequence(self, theta, n, seed):
        theta = self.validate_theta(theta)
        rng = as_generator(seed)
        X = rng.standard_normal((n, self.d)) @ self._chol.T
        y = X @ theta + np.sqrt(self.noise_var) * rng.standard_normal(n)
        return SequenceSample(X, y)

    def analytic_fisher(self, theta, n=1):
        self.validate_theta(theta)
        return n * self.feature_cov / self.noise_var

    def mle(self, data):
        X, y = self._xy(data)
        theta, *_ = np.linalg.lstsq(X, y, rcond=None)
        return theta

    def score_samples(self, theta, n_samples, rng):
        X = rng.standard_normal((n_samples, self.d)) @ self._chol.T
        noise = np.sqrt(self.noise_var) * rng.standard_normal(n_samples)
        return X * (noise / self.noise_var)[:, None]

    def kl_nats(self, theta0, theta):
        """Feature-averaged KL, exactly quadratic: (dtheta' Sigma_x dtheta)/(2 sigma^2)."""
        delta = np.asarray(theta, dtype=float) - np.asarray(theta0, dtype=float)
        return float(delta @ self.feature_cov @ delta / (2 * self.noise_var))

    def kl_nats_nodes(self, theta0, thetas):
        delta = np.atleast_2d(np.asarray(thetas, dtype=float)) - np.asarray(theta0, dtype=float)[None, :]
        return np.einsum("ij,jk,ik->i", delta, self.feature_cov, delta) / (2 * self.noise_var)

    # conditional (supervised) interface: continuous labels
    def cond_mean(self, theta, x):
        return float(np.asarray(x, dtype=float) @ np.asarray(theta, dtype=float))

    def cond_mean_nodes(self, thetas, x):
        return np.atleast_2d(np.asarray(thetas, dtype=float)) @ np.asarray(x, dtype=float)

    def cond_log_likelihood_nodes(self, thetas, xs, ys):
        return self.log_likelihood_nodes(thetas, (xs, ys))

    def cond_kl_nats_nodes(self, theta0, thetas, x):
        x = np.asarray(x, dtype=float)
        delta = np.atleast_2d(np.asarray(thetas, dtype=float)) - np.asarray(theta0, dtype=float)[None, :]
        return (delta @ x) ** 2 / (2 * self.noise_var)


# ---------------------------------------------------------------------------
# One-hidden-layer softmax classifier
# ---------------------------------------------------------------------------


class SoftmaxNet(ModelFamily):
    """tanh hidden layer + softmax output; explicit backprop, no autodiff.

    Parameter packing: [W1 (h x p), b1 (h), W2 (C x h), b2 (C)], flattened
    row-major. Features are sampled standard normal when the family itself
    generates data.
    """

    kind = "softmax_net"
    exchangeable = False

    def __init__(self, input_dim, hidden_width, n_classes, half_width=5.0):
        if min(input_dim, hidden_width, n_classes) < 1:
            raise ParameterError("net dimensions must be positive")
        self.p = int(input_dim)
        self.h = int(hidden_width)
        self.c = int(n_classes)
        self.alphabet = self.c
        self.d = self.h * self.p + self.h + self.c * self.h + self.c
        self.lower = -half_width * np.ones(self.d)
        self.upper = half_width * np.ones(self.d)

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        i = 0
        w1 = theta[i : i + self.h * self.p].reshape(self.h, self.p); i += self.h * self.p
        b1 = theta[i : i + self.h]; i += self.h
        w2 = theta[i : i + self.c * self.h].reshape(self.c, self.h); i += self.c * self.h
        b2 = theta[i : i + self.c]
        return w1, b1, w2, b2

    def _forward(self, theta, X):
        w1, b1, w2, b2 = self.unpack(theta)
        hidden = np.tanh(X @ w1.T + b1)
        logits = hidden @ w2.T + b2
        logz = logsumexp(logits, axis=1, keepdims=True)
        return hidden, logits - logz

    @staticmethod
    def _xy(data):
        s = as_sample(data)
        if s.labels is None:
            raise DataError("softmax-net data must be (features, labels)")
        return np.atleast_2d(np.asarray(s.symbols, dtype=float)), np.asarray(s.labels, dtype=int)

    def log_likelihood(self, theta, data):
        theta = self.validate_theta(theta)
        X, y = self._xy(data)
        if np.any(y < 0) or np.any(y >= self.c):
            raise DataError("label outside class alphabet")
        _, logp = self._forward(theta, X)
        return float(logp[np.arange(len(y)), y].sum())

    def grad_log_likelihood(self, theta, data):
        theta = self.validate_theta(theta, interior=True)
        X, y = self._xy(data)
        return self.per_sample_grads(theta, X, y).sum(axis=0)

    def per_sample_grads(self, theta, X, y):
        """(n, d) matrix of per-observation score vectors (backprop)."""
        w1, b1, w2, b2 = self.unpack(theta)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=int)
        hidden = np.tanh(X @ w1.T + b1)            # (n, h)
        logits = hidden @ w2.T + b2                # (n, c)
        probs = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        dlogits = -probs
        dlogits[np.arange(len(y)), y] += 1.0       # one-hot minus probs
        dhidden = dlogits @ w2                     # (n, h)
        dpre = dhidden * (1.0 - hidden**2)         # tanh'
        gw1 = np.einsum("nh,np->nhp", dpre, X).reshape(len(y), -1)
        gw2 = np.einsum("nc,nh->nch", dlogits, hidden).reshape(len(y), -1)
        return np.concatenate([gw1, dpre, gw2, dlogits], axis=1)

    def sample_sequence(self, theta, n, seed):
        theta = self.validate_theta(theta)
        rng = as_generator(seed)
        X = rng.standard_normal((n, self.p))
        _, logp = self._forward(theta, X)
        cum = np.cumsum(np.exp(logp), axis=1)
        y = (rng.random(n)[:, None] > cum).sum(axis=1)
        return SequenceSample(X, y.astype(np.int64))

    def predictive(self, theta, context=None):
        theta = self.validate_theta(theta)
        if context is None:
            raise ContextError("softmax-net predictive needs a feature vector")
        _, logp = self._forward(theta, np.atleast_2d(np.asarray(context, dtype=float)))
        return np.exp(logp[0])

    def cond_predictive(self, theta, x):
        return self.predictive(theta, x)

    def cond_log_likelihood_nodes(self, thetas, xs, ys):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.array([self.log_likelihood(t, (xs, ys)) for t in thetas])

    def score_samples(self, theta, n_samples, rng):
        sample = self.sample_sequence(theta, n_samples, rng)
        return self.per_sample_grads(theta, sample.symbols, sample.labels)


def make_family(kind, **kwargs):
    """Build a family from its config name."""
    kinds = {
        "bernoulli": BernoulliIID,
        "categorical": CategoricalIID,
        "markov": MarkovChain,
        "linear_gaussian": LinearGaussian,
        "softmax_net": SoftmaxNet,
    }
    if kind not in kinds:
        raise ParameterError(f"unknown family kind {kind!r}; expected one of {sorted(kinds)}")
    return kinds[kind](**kwargs)


__all__ = [
    "SequenceSample",
    "as_sample",
    "ModelFamily",
    "BernoulliIID",
    "CategoricalIID",
    "MarkovChain",
    "LinearGaussian",
    "SoftmaxNet",
    "make_family",
]
