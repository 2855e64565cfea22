"""KL-ball weights and the epsilon^2 - log w(Theta_0) regret bounds.

Theta_0 is the set of parameters whose divergence from the true model is at
most epsilon^2 (per-symbol for online, next-symbol for batch, worst-case over
the feature alphabet for supervised). Its prior (or posterior) weight turns
into an upper bound on the expected regret; the bound is minimized over an
epsilon^2 grid and stays conservative by using the lower confidence limit of
the estimated weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotAvailableError, ParameterError
from .families import MarkovChain
from .info import LN2, LOG2E, as_generator, logsumexp, wilson_interval
from .mixture import PosteriorGrid, PriorSpec, posterior_weights


@dataclass(frozen=True)
class KLBallSpec:
    """Which divergence ball to measure: setting, center, radius (bits)."""

    setting: str
    theta0: np.ndarray
    epsilon_sq: float
    context: np.ndarray | None = None

    def __post_init__(self):
        if self.setting not in ("online", "batch", "supervised"):
            raise ParameterError(f"unknown setting {self.setting!r}")
        if self.epsilon_sq < 0:
            raise ParameterError("epsilon_sq must be >= 0")
        object.__setattr__(self, "theta0", np.atleast_1d(np.asarray(self.theta0, dtype=float)))
        if self.context is not None:
            object.__setattr__(self, "context", np.asarray(self.context))


@dataclass(frozen=True)
class WeightEstimate:
    """Estimated measure of a KL ball, with confidence half-width."""

    value: float
    ci_halfwidth: float
    n_draws: int
    measure: str

    @property
    def lower(self):
        return max(0.0, self.value - self.ci_halfwidth)


def kl_to(family, theta0, theta, n=1, setting="online", context=None):
    """Divergence (bits) from theta0's law to theta's, per the setting.

    Online: (1/n) D over n-tuples (equals the single-symbol KL for i.i.d.
    families). Batch: next-symbol conditional KL. Supervised: label-law KL at
    the given feature. Returns +inf when absolute continuity fails.
    """
    theta0 = family.validate_theta(theta0)
    theta = family.validate_theta(theta)
    if setting == "online":
        if isinstance(family, MarkovChain):
            return family.sequence_kl_nats(theta0, theta, n) * LOG2E / n
        return family.kl_nats(theta0, theta) * LOG2E
    if setting == "batch":
        if isinstance(family, MarkovChain):
            return _next_symbol_kl_nats(family, theta0, theta[None, :], context)[0] * LOG2E
        return family.kl_nats(theta0, theta) * LOG2E
    if setting == "supervised":
        if context is None:
            raise ParameterError("supervised kl_to needs a feature in `context`")
        return float(family.cond_kl_nats_nodes(theta0, theta[None, :], context)[0]) * LOG2E
    raise ParameterError(f"unknown setting {setting!r}")


def _next_symbol_kl_nats(family, theta0, thetas, context):
    """D(P_theta0(X_next | ctx) || P_theta(X_next | ctx)) over nodes, nats."""
    from scipy.special import xlogy

    p = family.predictive(theta0, context)
    q = np.clip(family.predictive_nodes(thetas, context), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = xlogy(p[None, :], p[None, :]) - xlogy(p[None, :], q)
    out = terms.sum(axis=1)
    return np.where(np.isnan(out), np.inf, out)


def _membership_nodes(spec, family, n, thetas):
    """Boolean Theta_0 membership for a whole (M, d) parameter matrix."""
    eps_nats = spec.epsilon_sq * LN2
    if spec.setting == "online":
        if isinstance(family, MarkovChain):
            kl = np.array([family.sequence_kl_nats(spec.theta0, t, n) / n for t in thetas])
        else:
            kl = family.kl_nats_nodes(spec.theta0, thetas)
    elif spec.setting == "batch":
        if isinstance(family, MarkovChain):
            kl = _next_symbol_kl_nats(family, spec.theta0, thetas, spec.context)
        else:
            kl = family.kl_nats_nodes(spec.theta0, thetas)
    else:
        feats = spec.context
        if feats is None:
            raise ParameterError("supervised ball needs the feature alphabet in `context`")
        kl = np.max(
            np.stack([family.cond_kl_nats_nodes(spec.theta0, thetas, x) for x in np.atleast_1d(feats)]),
            axis=0,
        )
    return kl <= eps_nats + 1e-15


def ball_membership(spec, theta, family, n=1):
    """Is theta inside Theta_0? Supervised uses the worst case over features."""
    theta = family.validate_theta(theta)
    return bool(_membership_nodes(spec, family, n, theta[None, :])[0])


def estimate_weight(spec, family, n, measure_source, n_draws=10_000, seed=0):
    """Measure of Theta_0 under a prior (Monte Carlo) or a posterior grid (exact sum).

    The Monte-Carlo path is deterministic given the seed and reuses nested
    draws, so the estimate is nondecreasing in epsilon^2 at a fixed seed.
    """
    if isinstance(measure_source, PosteriorGrid):
        mask = _membership_nodes(spec, family, n, measure_source.nodes)
        return WeightEstimate(measure_source.weight_of(mask), 0.0, len(measure_source.nodes), "posterior")
    if n_draws < 1:
        raise ParameterError("n_draws must be >= 1")
    draws = measure_source.sample(n_draws, seed)
    hits = int(np.count_nonzero(_membership_nodes(spec, family, n, draws)))
    est, lo, hi = wilson_interval(hits, n_draws)
    return WeightEstimate(est, (hi - lo) / 2.0, n_draws, "prior")


def default_epsilon_grid(n, lo=None, hi=10.0, points=40):
    """Log-spaced epsilon^2 grid (bits), from 1e-4/n to 10 by default."""
    lo = (1e-4 / n) if lo is None else lo
    return np.logspace(np.log10(lo), np.log10(hi), points)


@dataclass(frozen=True)
class BoundReport:
    """Minimized weight bound with its per-epsilon diagnostic table."""

    setting: str
    value: float
    epsilon_sq: float
    n: int
    table: list = field(repr=False, default_factory=list)

    def as_rows(self):
        return [
            {"row": "bound-table", "setting": self.setting, "n": self.n, **entry}
            for entry in self.table
        ]


def regret_bound(family, theta0, prior, n, setting="online", epsilon_grid=None,
                 n_mc=10_000, seed=0, setting_info=None, n_contexts=200):
    """min over epsilon^2 of [epsilon^2 + log2(1 / w(Theta_0))] (bits).

    Online divides the log-weight term by n and measures Theta_0 under the
    prior. Batch and supervised keep the undivided term and average
    log2(1/w(Theta_0 | context)) over Monte-Carlo contexts, measuring under
    the per-context posterior. The weight's CI lower limit keeps the bound
    valid under MC noise. Returns +inf (with a diagnostic table) if every
    grid point has zero estimated weight.
    """
    theta0 = family.validate_theta(theta0)
    grid = np.sort(np.asarray(default_epsilon_grid(n) if epsilon_grid is None else epsilon_grid, dtype=float))
    if len(grid) == 0:
        raise ParameterError("epsilon grid must be nonempty")

    contexts = None
    if setting == "batch":
        rng = as_generator(seed)
        contexts = [family.sample_sequence(theta0, n - 1, rng).symbols for _ in range(n_contexts)] if n > 1 else [None]
    elif setting == "supervised":
        if setting_info is None:
            raise ParameterError("supervised bound needs a SupervisedSetting")
        rng = as_generator(seed)
        contexts = []
        for _ in range(n_contexts):
            idx = rng.choice(len(setting_info.feature_alphabet), size=n, p=setting_info.feature_probs)
            xs = setting_info.feature_alphabet[idx]
            ys = np.array([
                rng.choice(family.alphabet, p=np.clip(family.cond_predictive(theta0, x), 0, None))
                for x in xs
            ])
            contexts.append((xs, ys))

    best = (np.inf, float(grid[0]))
    table = []
    for eps in grid:
        if setting == "online":
            spec = KLBallSpec("online", theta0, float(eps))
            w = estimate_weight(spec, family, n, prior, n_mc, seed)
            log_term = np.inf if w.lower == 0.0 else np.log2(1.0 / w.lower) / n
            entry = {"epsilon_sq": float(eps), "weight": w.value, "ci_halfwidth": w.ci_halfwidth}
        else:
            logs = []
            for ctx in contexts:
                if setting == "batch":
                    spec = KLBallSpec("batch", theta0, float(eps), context=ctx)
                    post = posterior_weights(prior, family, ctx)
                else:
                    xs, ys = ctx
                    spec = KLBallSpec("supervised", theta0, float(eps), context=setting_info.feature_alphabet)
                    loglik = family.cond_log_likelihood_nodes(prior.nodes, xs, ys)
                    logw = prior.log_weights + loglik
                    post = PosteriorGrid(prior.nodes, logw - logsumexp(logw))
                w = estimate_weight(spec, family, n, post)
                logs.append(np.inf if w.value == 0.0 else np.log2(1.0 / w.value))
            log_term = float(np.mean(logs))
            entry = {"epsilon_sq": float(eps), "mean_log2_inv_weight": log_term}
        bound = eps + log_term
        entry["bound_bits"] = float(bound)
        table.append(entry)
        if bound < best[0]:
            best = (float(bound), float(eps))
    return BoundReport(setting, best[0], best[1], n, table)


# ---------------------------------------------------------------------------
# posterior-weight check at epsilon^2 = alpha k log(n) / n
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PosteriorWeightCheck:
    """Outcome of the Laplace-posterior tail check on the batch KL ball."""

    epsilon_sq_nats: float
    deficit: float
    deficit_se: float
    allowance: float
    passes: bool
    deficit_noncentral: float
    skipped: bool = False

    def as_row(self):
        return {
            "row": "chi2-weight", "epsilon_sq_nats": self.epsilon_sq_nats,
            "deficit": self.deficit, "deficit_se": self.deficit_se,
            "allowance": self.allowance, "passes": self.passes,
            "deficit_noncentral": self.deficit_noncentral, "skipped": self.skipped,
        }


def chi2_weight_check(family, theta0, n, alpha, n_data=400, n_post=2000, seed=0):
    """Check that the posterior weight of the batch ball at eps^2 = alpha k log(n)/n
    stays above 1 - n^(-alpha).

    The quadratic form of the ball under the Laplace posterior is a chi-square
    with k = d degrees of freedom; its tail at 2 n eps^2 controls the weight
    deficit once the O(1)-noncentrality from the ML estimate's displacement is
    dropped, which is the approximation the k/2n batch rate rests on. The pass
    rule therefore measures the ball around the realized ML estimate
    (``deficit``); the strict ball around theta0 keeps the noncentral term and
    is reported as ``deficit_noncentral``. Both are Monte Carlo over data
    realizations and Laplace-posterior draws; passes iff the average deficit
    is at most n^(-alpha) + 3 standard errors.
    """
    if alpha < 1:
        raise ParameterError("alpha must be >= 1")
    theta0 = family.validate_theta(theta0)
    k = family.d
    eps_nats = alpha * k * np.log(n) / n
    if eps_nats == 0.0:
        return PosteriorWeightCheck(0.0, 0.0, 0.0, 1.0, True, 0.0, skipped=True)
    from .fisher import laplace_posterior

    rng = as_generator(seed)
    m = n - 1
    defic_c = np.empty(n_data)
    defic_nc = np.empty(n_data)
    for i in range(n_data):
        data = family.sample_sequence(theta0, m, rng)
        lap = laplace_posterior(family, data)
        thetas = lap.sample(n_post, rng)
        inside = family.contains_nodes(thetas)
        kl_c = np.full(n_post, np.inf)
        kl_nc = np.full(n_post, np.inf)
        kl_c[inside] = family.kl_nats_nodes(lap.mean, thetas[inside])
        kl_nc[inside] = family.kl_nats_nodes(theta0, thetas[inside])
        defic_c[i] = np.mean(kl_c > eps_nats)
        defic_nc[i] = np.mean(kl_nc > eps_nats)
    deficit = float(defic_c.mean())
    se = float(defic_c.std(ddof=1) / np.sqrt(n_data))
    allowance = float(n ** (-alpha) + 3 * se)
    return PosteriorWeightCheck(
        float(eps_nats), deficit, se, allowance, deficit <= allowance, float(defic_nc.mean())
    )


__all__ = [
    "KLBallSpec",
    "WeightEstimate",
    "BoundReport",
    "PosteriorWeightCheck",
    "kl_to",
    "ball_membership",
    "estimate_weight",
    "default_epsilon_grid",
    "regret_bound",
    "chi2_weight_check",
]
