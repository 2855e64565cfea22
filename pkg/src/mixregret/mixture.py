"""Bayesian mixture learners over a discretized prior.

The learner is the mixture Q(data) = sum_i w_i P_{theta_i}(data) over prior
nodes, updated to posterior weights as data arrives. Everything runs in log
space; quadrature nodes and weights come from a :class:`PriorSpec`.

Grid construction uses a tensor trapezoid rule (boundary nodes get half-cell
weight) for d <= 3 and self-normalized importance sampling from the prior for
higher dimension.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEvidenceError, ParameterError
from .families import CategoricalIID, SequenceSample, as_sample
from .info import as_generator, logsumexp, normalized

_GRID_BUDGET = 200_000  # max tensor-grid nodes when nodes_per_dim is defaulted
_EVIDENCE_FLOOR = -1e250  # below this the grid evidence is considered dead


def _trapezoid_axis(lo, hi, g):
    """Nodes and normalized weights of the 1-D trapezoid rule on [lo, hi]."""
    if g < 2:
        raise ParameterError("need at least 2 nodes per dimension")
    nodes = np.linspace(lo, hi, g)
    w = np.ones(g)
    w[0] = w[-1] = 0.5
    return nodes, w / w.sum()


@dataclass(frozen=True)
class PriorSpec:
    """Discretized prior over the parameter domain.

    ``nodes`` is (M, d); ``log_weights`` sums (in probability) to one. ``kind``
    records how the discretization was built; ``stochastic`` marks importance
    particles. ``half_widths`` holds the per-coordinate box half-widths when the
    domain is a box, from which the enclosing-ball radius R (R^2 = sum a_i^2,
    i.e. R^2 = a^2 d for a cube) is derived.
    """

    nodes: np.ndarray
    log_weights: np.ndarray
    kind: str
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    stochastic: bool = False
    density_ratio: float = 1.0
    tilt: object = None
    _rng_hint: int = field(default=0, repr=False)

    def __post_init__(self):
        if abs(np.exp(logsumexp(self.log_weights)) - 1.0) > 1e-12:
            raise ParameterError("quadrature weights must sum to 1 within 1e-12")
        if len(self.nodes) != len(self.log_weights):
            raise ParameterError("nodes and weights length mismatch")

    # -- construction -------------------------------------------------------
    @classmethod
    def uniform_box(cls, lower, upper, nodes_per_dim=None, tilt=None):
        """Uniform (optionally tilted) prior on a box, tensor trapezoid grid."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        d = len(lower)
        if np.any(upper <= lower):
            raise ParameterError("upper bounds must exceed lower bounds")
        g = nodes_per_dim or max(2, int(_GRID_BUDGET ** (1.0 / d)))
        axes = [_trapezoid_axis(lower[j], upper[j], g) for j in range(d)]
        if d == 1:
            nodes = axes[0][0][:, None]
            w = axes[0][1]
        else:
            nodes = np.array(list(itertools.product(*[a[0] for a in axes])))
            w = np.prod(np.array(list(itertools.product(*[a[1] for a in axes]))), axis=1)
        return cls._finish(nodes, w, "box-grid", lower, upper, tilt)

    @classmethod
    def uniform_simplex(cls, alphabet_size, nodes_per_dim=None):
        """Uniform prior on the probability simplex (free coords of a categorical)."""
        d = alphabet_size - 1
        g = nodes_per_dim or max(2, int((2 * _GRID_BUDGET) ** (1.0 / d)))
        axes = [_trapezoid_axis(0.0, 1.0, g) for _ in range(d)]
        nodes = np.array(list(itertools.product(*[a[0] for a in axes])))
        w = np.prod(np.array(list(itertools.product(*[a[1] for a in axes]))), axis=1)
        keep = nodes.sum(axis=1) <= 1.0 + 1e-12
        return cls._finish(nodes[keep], w[keep], "simplex-grid", np.zeros(d), np.ones(d), None)

    @classmethod
    def finite(cls, models, weights=None):
        """Point-mass prior over an explicit list of parameter vectors."""
        nodes = np.atleast_2d(np.asarray(models, dtype=float))
        if weights is None:
            weights = np.full(len(nodes), 1.0 / len(nodes))
        return cls._finish(nodes, np.asarray(weights, dtype=float), "finite", None, None, None)

    @classmethod
    def importance_box(cls, lower, upper, n_particles, seed, tilt=None):
        """Importance particles drawn from the uniform box (for d > 3)."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        rng = as_generator(seed)
        nodes = rng.uniform(lower, upper, size=(int(n_particles), len(lower)))
        w = np.full(len(nodes), 1.0 / len(nodes))
        spec = cls._finish(nodes, w, "box-importance", lower, upper, tilt)
        return spec

    @classmethod
    def for_family(cls, family, nodes_per_dim=None, n_particles=20_000, seed=0):
        """Uniform prior on the family's natural domain.

        Categorical families get a simplex grid; box domains get a tensor grid
        up to d = 3 and importance particles beyond.
        """
        if isinstance(family, CategoricalIID):
            return cls.uniform_simplex(family.alphabet, nodes_per_dim)
        lower, upper = family.prior_bounds()
        if family.d <= 3:
            return cls.uniform_box(lower, upper, nodes_per_dim)
        return cls.importance_box(lower, upper, n_particles, seed)

    @classmethod
    def _finish(cls, nodes, w, kind, lower, upper, tilt):
        w = np.asarray(w, dtype=float)
        ratio = 1.0
        if tilt is not None:
            dens = np.array([float(tilt(x)) for x in nodes])
            if np.any(dens < 0):
                raise ParameterError("prior density must be nonnegative")
            w = w * dens
            pos = dens[dens > 0]
            ratio = float(pos.max() / pos.min()) if len(pos) else 1.0
        w = w / w.sum()
        with np.errstate(divide="ignore"):
            logw = np.log(w)
        return cls(
            nodes=nodes,
            log_weights=logw,
            kind=kind,
            lower=None if lower is None else np.asarray(lower, dtype=float),
            upper=None if upper is None else np.asarray(upper, dtype=float),
            stochastic=kind == "box-importance",
            density_ratio=ratio,
            tilt=tilt,
        )

    # -- geometry ------------------------------------------------------------
    @property
    def d(self):
        return self.nodes.shape[1]

    @property
    def half_widths(self):
        if self.lower is None:
            raise ParameterError(f"{self.kind} prior has no box geometry")
        return 0.5 * (self.upper - self.lower)

    @property
    def ball_radius(self):
        """Radius of the ball enclosing the domain box (R^2 = a^2 d for a cube)."""
        return float(np.sqrt(np.sum(self.half_widths**2)))

    # -- continuous sampling ---------------------------------------------------
    def sample(self, n_draws, seed):
        """Draw from the continuous prior itself (not from the grid nodes)."""
        rng = as_generator(seed)
        if self.kind == "finite":
            idx = rng.choice(len(self.nodes), size=n_draws, p=np.exp(self.log_weights))
            return self.nodes[idx]
        if self.kind == "simplex-grid":
            full = rng.dirichlet(np.ones(self.d + 1), size=n_draws)
            return full[:, :-1]
        if self.tilt is None:
            return rng.uniform(self.lower, self.upper, size=(n_draws, self.d))
        # tilted box: rejection against the uniform envelope
        out = np.empty((n_draws, self.d))
        bound = None
        filled = 0
        while filled < n_draws:
            cand = rng.uniform(self.lower, self.upper, size=(max(n_draws, 1024), self.d))
            dens = np.array([float(self.tilt(x)) for x in cand])
            if bound is None:
                bound = max(dens.max(), 1e-300) * 1.05
            accept = cand[rng.random(len(cand)) * bound < dens]
            take = min(len(accept), n_draws - filled)
            out[filled : filled + take] = accept[:take]
            filled += take
        return out

    def log_density(self, theta):
        """Log prior density (continuous view); -inf outside the support."""
        theta = np.asarray(theta, dtype=float)
        if self.lower is None:
            raise ParameterError(f"{self.kind} prior has no continuous density")
        if np.any(theta < self.lower) or np.any(theta > self.upper):
            return float("-inf")
        base = -float(np.sum(np.log(self.upper - self.lower)))
        if self.tilt is not None:
            dens = float(self.tilt(theta))
            return base + (np.log(dens) if dens > 0 else float("-inf"))
        return base

    def grad_log_density(self, theta):
        """Score of the prior; zero inside a uniform box."""
        if self.tilt is not None:
            raise ParameterError("tilted priors have no analytic score")
        return np.zeros(self.d)


@dataclass(frozen=True)
class PosteriorGrid:
    """Prior nodes with data-conditioned log weights (normalized)."""

    nodes: np.ndarray
    log_weights: np.ndarray

    @property
    def weights(self):
        return np.exp(self.log_weights)

    def weight_of(self, mask):
        """Probability mass of a boolean subset of nodes."""
        mask = np.asarray(mask, dtype=bool)
        if not np.any(mask):
            return 0.0
        return float(np.exp(logsumexp(self.log_weights[mask])))


def _posterior_logw(prior, loglik):
    joint = prior.log_weights + loglik
    z = logsumexp(joint)
    if not np.isfinite(z) or z < _EVIDENCE_FLOOR:
        raise DegenerateEvidenceError("all prior nodes assign (numerically) zero probability to the data")
    return joint - z, z


def marginal_likelihood(prior, family, data):
    """log Q(data) in nats: log-sum-exp quadrature of the prior-weighted likelihood."""
    data = as_sample(data)
    loglik = family.log_likelihood_nodes(prior.nodes, data)
    _, z = _posterior_logw(prior, loglik)
    return float(z)


def _is_empty(data):
    if data is None:
        return True
    if isinstance(data, tuple):
        return len(np.asarray(data[0])) == 0
    if isinstance(data, SequenceSample):
        return False
    return len(np.asarray(data)) == 0


def posterior_weights(prior, family, data=None):
    """Posterior node weights after ``data`` (the prior itself when data is empty)."""
    if _is_empty(data):
        return PosteriorGrid(prior.nodes, prior.log_weights - logsumexp(prior.log_weights))
    loglik = family.log_likelihood_nodes(prior.nodes, as_sample(data))
    logw, _ = _posterior_logw(prior, loglik)
    return PosteriorGrid(prior.nodes, logw)


def _mixture_predictive(post, family, context):
    probs_nodes = family.predictive_nodes(post.nodes, context)
    probs = post.weights @ probs_nodes
    return normalized(probs)


def predict_online(prior, family, context=None):
    """Q(x_t | x^{t-1}): posterior-weighted next-symbol mixture."""
    context = np.asarray([] if context is None else context, dtype=np.int64)
    post = posterior_weights(prior, family, context if len(context) else None)
    return _mixture_predictive(post, family, context)


def predict_batch(prior, family, training):
    """Q(x_n | x^{n-1}): identical to the online predictive at t = n."""
    return predict_online(prior, family, training)


@dataclass(frozen=True)
class GaussianMixturePredictive:
    """Label predictive for continuous-label families: a Gaussian mixture."""

    weights: np.ndarray
    means: np.ndarray
    sigma: float

    def mean(self):
        return float(self.weights @ self.means)

    def logpdf(self, y):
        z = -0.5 * ((y - self.means) / self.sigma) ** 2 - np.log(self.sigma * np.sqrt(2 * np.pi))
        return float(logsumexp(z, b=self.weights))


def predict_supervised(prior, family, training=None, query=None):
    """Q(y | x; S): posterior over the training pairs, mixed label law at x.

    ``training`` is (features, labels) or None/empty; the output never depends
    on any assumed feature distribution, only on the observed pairs.
    """
    if _is_empty(training):
        post = posterior_weights(prior, family, None)
    else:
        s = as_sample(training)
        loglik = family.cond_log_likelihood_nodes(prior.nodes, s.symbols, s.labels)
        logw, _ = _posterior_logw(prior, loglik)
        post = PosteriorGrid(prior.nodes, logw)
    if hasattr(family, "cond_mean_nodes"):
        means = family.cond_mean_nodes(post.nodes, query)
        return GaussianMixturePredictive(post.weights, means, float(np.sqrt(family.noise_var)))
    probs_nodes = family.cond_predictive_nodes(post.nodes, query)
    return normalized(post.weights @ probs_nodes)


__all__ = [
    "PriorSpec",
    "PosteriorGrid",
    "GaussianMixturePredictive",
    "marginal_likelihood",
    "posterior_weights",
    "predict_online",
    "predict_batch",
    "predict_supervised",
]
