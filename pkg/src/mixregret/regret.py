"""Exact and Monte-Carlo expected regret in the online, batch, and supervised settings.

Expected regret equals a KL divergence between the true model and the mixture
learner: per-symbol for online, next-symbol conditional for batch, test-pair
conditional averaged over training sets for supervised. Values are reported in
bits.

Exact computation walks either all sequences (small alphabets/horizons) or,
for exchangeable families, all count vectors with multinomial multiplicities,
which reaches n ~ 1e5.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import ParameterError, SizeError
from .families import as_sample
from .info import LOG2E, as_generator, logsumexp, wilson_interval
from .mixture import PriorSpec, posterior_weights

_ENUM_CAP = 2**20


@dataclass(frozen=True)
class SupervisedSetting:
    """Finite feature alphabet with its sampling distribution P_X."""

    feature_alphabet: np.ndarray
    feature_probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature_alphabet", np.asarray(self.feature_alphabet))
        object.__setattr__(self, "feature_probs", np.asarray(self.feature_probs, dtype=float))
        if len(self.feature_alphabet) != len(self.feature_probs):
            raise ParameterError("feature alphabet and probabilities must align")
        if abs(self.feature_probs.sum() - 1.0) > 1e-9 or np.any(self.feature_probs < 0):
            raise ParameterError("feature probabilities must form a distribution")


@dataclass(frozen=True)
class RegretReport:
    """One measured regret value (bits, per the setting's normalization)."""

    setting: str
    value: float
    method: str
    n: int
    std_error: float | None = None

    def as_row(self):
        row = {"row": "regret", "setting": self.setting, "value_bits": self.value,
               "method": self.method, "n": self.n}
        if self.std_error is not None:
            row["std_error"] = self.std_error
        return row


# ---------------------------------------------------------------------------
# enumeration helpers
# ---------------------------------------------------------------------------


def count_vectors(n, alphabet):
    """All count vectors over the alphabet summing to n, as an (K, A) array."""
    if alphabet == 2:
        s = np.arange(n + 1)
        return np.column_stack([n - s, s])
    out = []
    for head in itertools.combinations(range(n + alphabet - 1), alphabet - 1):
        prev = -1
        c = []
        for h in head:
            c.append(h - prev - 1)
            prev = h
        c.append(n + alphabet - 2 - prev)
        out.append(c)
    return np.array(out, dtype=float)


def log_multinomial(counts):
    counts = np.atleast_2d(counts)
    n = counts.sum(axis=1)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)


def _chunked_logz(family, prior, counts, chunk=4096):
    """log mixture probability of one representative sequence per count vector."""
    out = np.empty(len(counts))
    for lo in range(0, len(counts), chunk):
        cll = family.count_log_likelihood_nodes(prior.nodes, counts[lo : lo + chunk])
        out[lo : lo + chunk] = logsumexp(prior.log_weights[None, :] + cll, axis=1)
    return out


def _all_sequences(alphabet, n):
    if alphabet**n > _ENUM_CAP:
        raise SizeError(
            f"enumeration over {alphabet}^{n} sequences exceeds the cap; "
            "use an exchangeable family or the Monte-Carlo estimator"
        )
    grids = np.meshgrid(*([np.arange(alphabet)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# online
# ---------------------------------------------------------------------------


def exact_regret_online(family, theta0, prior, n):
    """(1/n) D(P_theta0(X^n) || Q(X^n)) in bits."""
    theta0 = family.validate_theta(theta0)
    if family.exchangeable:
        counts = count_vectors(n, family.alphabet)
        logq = _chunked_logz(family, prior, counts)
        p0 = np.clip(family.full_probs(theta0), 0.0, None)
        logp = counts @ np.where(p0 > 0, np.log(np.where(p0 > 0, p0, 1.0)), 0.0)
        support = np.all((counts == 0) | (p0 > 0)[None, :], axis=1)
        w = np.where(support, np.exp(log_multinomial(counts) + logp), 0.0)
        d_nats = float(np.sum(w * (logp - logq)))
    else:
        seqs = _all_sequences(family.alphabet, n)
        d_nats = 0.0
        for seq in seqs:
            logp = family.log_likelihood(theta0, seq)
            if not np.isfinite(logp):
                continue
            loglik = family.log_likelihood_nodes(prior.nodes, seq)
            logq = float(logsumexp(prior.log_weights + loglik))
            d_nats += np.exp(logp) * (logp - logq)
    return RegretReport("online", d_nats * LOG2E / n,
                        "exact-sufficient-stat" if family.exchangeable else "exact-enum", n)


# ---------------------------------------------------------------------------
# batch
# ---------------------------------------------------------------------------


def exact_regret_batch(family, theta0, prior, n):
    """Expected next-symbol divergence after n-1 training symbols, in bits.

    Computed directly (not as a difference of online values) to avoid
    cancellation: sum over training contexts of the conditional KL between the
    true next-symbol law and the mixture predictive.
    """
    theta0 = family.validate_theta(theta0)
    if family.exchangeable:
        p0 = np.clip(family.full_probs(theta0), 0.0, None)
        counts = count_vectors(n - 1, family.alphabet)
        logz_ctx = _chunked_logz(family, prior, counts)
        # mixture predictive per next symbol: Z(counts + e_a) / Z(counts)
        d_next = np.zeros(len(counts))
        for a in range(family.alphabet):
            if p0[a] == 0.0:
                continue
            bumped = counts.copy()
            bumped[:, a] += 1
            logq_a = _chunked_logz(family, prior, bumped) - logz_ctx
            d_next += p0[a] * (np.log(p0[a]) - logq_a)
        lp_sym = np.where(p0 > 0, np.log(np.where(p0 > 0, p0, 1.0)), -np.inf)
        logp_ctx = counts @ np.where(np.isfinite(lp_sym), lp_sym, 0.0)
        support = np.all((counts == 0) | (p0 > 0)[None, :], axis=1)
        w_ctx = np.where(support, np.exp(log_multinomial(counts) + logp_ctx), 0.0)
        d_nats = float(w_ctx @ d_next)
    else:
        contexts = _all_sequences(family.alphabet, n - 1) if n > 1 else [np.array([], dtype=np.int64)]
        d_nats = 0.0
        for ctx in contexts:
            logp_ctx = family.log_likelihood(theta0, ctx) if len(ctx) else 0.0
            if not np.isfinite(logp_ctx):
                continue
            post = posterior_weights(prior, family, ctx if len(ctx) else None)
            q = post.weights @ family.predictive_nodes(post.nodes, ctx)
            p = family.predictive(theta0, ctx)
            active = p > 0
            d_nats += np.exp(logp_ctx) * float(np.sum(xlogy(p[active], p[active] / q[active])))
    return RegretReport("batch", d_nats * LOG2E,
                        "exact-sufficient-stat" if family.exchangeable else "exact-enum", n)


def batch_online_identity(family, theta0, prior, n):
    """Residual of R^b(n) = n R^o(n) - (n-1) R^o(n-1); ~0 for any mixture learner."""
    rb = exact_regret_batch(family, theta0, prior, n).value
    ro_n = exact_regret_online(family, theta0, prior, n).value
    ro_prev = exact_regret_online(family, theta0, prior, n - 1).value if n > 1 else 0.0
    return rb - (n * ro_n - (n - 1) * ro_prev)


# ---------------------------------------------------------------------------
# supervised
# ---------------------------------------------------------------------------


def _supervised_inner_kl_nats(family, theta0, prior, xs, ys, setting):
    """E_x D(P_theta0(Y|x) || Q(Y|x; S)) for one training set S = (xs, ys)."""
    if len(xs):
        loglik = family.cond_log_likelihood_nodes(prior.nodes, xs, ys)
        logw = prior.log_weights + loglik
        logw = logw - logsumexp(logw)
    else:
        logw = prior.log_weights
    w = np.exp(logw)
    total = 0.0
    for x, px in zip(setting.feature_alphabet, setting.feature_probs):
        q = w @ family.cond_predictive_nodes(prior.nodes, x)
        p = family.cond_predictive(theta0, x)
        active = p > 0
        total += px * float(np.sum(xlogy(p[active], p[active] / q[active])))
    return total


def exact_regret_supervised(family, theta0, prior, setting, n):
    """D(P_theta0(Y|X) || Q(Y|X; S)) in bits, enumerating all training sets."""
    theta0 = family.validate_theta(theta0)
    n_feat, n_lab = len(setting.feature_alphabet), family.alphabet
    if n_lab is None:
        raise SizeError("exact supervised regret needs a finite label alphabet")
    if (n_feat * n_lab) ** n > _ENUM_CAP:
        raise SizeError("training-set enumeration too large; use mc_regret")
    d_nats = 0.0
    pairs = list(itertools.product(range(n_feat), range(n_lab)))
    for combo in itertools.product(pairs, repeat=n):
        xs = np.array([setting.feature_alphabet[i] for i, _ in combo])
        ys = np.array([y for _, y in combo])
        logp = 0.0
        for (i, y), x in zip(combo, xs):
            py = family.cond_predictive(theta0, x)[y]
            if py == 0.0 or setting.feature_probs[i] == 0.0:
                logp = -np.inf
                break
            logp += np.log(setting.feature_probs[i]) + np.log(py)
        if not np.isfinite(logp):
            continue
        d_nats += np.exp(logp) * _supervised_inner_kl_nats(family, theta0, prior, xs, ys, setting)
    return RegretReport("supervised", d_nats * LOG2E, "exact-enum", n)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def mc_regret(family, theta0, prior, n, setting=None, n_mc=1000, seed=0):
    """Unbiased pointwise log-ratio estimate of the regret with standard error."""
    if n_mc < 2:
        raise ParameterError("n_mc must be >= 2")
    theta0 = family.validate_theta(theta0)
    rng = as_generator(seed)
    which = setting if isinstance(setting, str) else ("supervised" if setting is not None else "online")
    vals = np.empty(n_mc)
    for i in range(n_mc):
        if which == "online":
            seq = family.sample_sequence(theta0, n, rng)
            logp = family.log_likelihood(theta0, seq)
            loglik = family.log_likelihood_nodes(prior.nodes, seq)
            logq = float(logsumexp(prior.log_weights + loglik))
            vals[i] = (logp - logq) * LOG2E / n
        elif which == "batch":
            seq = family.sample_sequence(theta0, n, rng).symbols
            ctx, nxt = seq[:-1], int(seq[-1])
            post = posterior_weights(prior, family, ctx if len(ctx) else None)
            q = post.weights @ family.predictive_nodes(post.nodes, ctx)
            p = family.predictive(theta0, ctx)
            vals[i] = (np.log(p[nxt]) - np.log(q[nxt])) * LOG2E
        else:
            vals[i] = _mc_supervised_draw(family, theta0, prior, n, setting, rng)
    se = float(vals.std(ddof=1) / np.sqrt(n_mc))
    return RegretReport(which, float(vals.mean()), "monte-carlo", n, std_error=se)


def _mc_supervised_draw(family, theta0, prior, n, setting, rng):
    idx = rng.choice(len(setting.feature_alphabet), size=n + 1, p=setting.feature_probs)
    xs = setting.feature_alphabet[idx]
    ys = np.array([
        rng.choice(family.alphabet, p=np.clip(family.cond_predictive(theta0, x), 0, None)) for x in xs
    ])
    train_x, train_y, (qx, qy) = xs[:-1], ys[:-1], (xs[-1], ys[-1])
    if n:
        loglik = family.cond_log_likelihood_nodes(prior.nodes, train_x, train_y)
        logw = prior.log_weights + loglik
        logw = logw - logsumexp(logw)
    else:
        logw = prior.log_weights
    q = np.exp(logw) @ family.cond_predictive_nodes(prior.nodes, qx)
    p = family.cond_predictive(theta0, qx)
    return (np.log(p[qy]) - np.log(q[qy])) * LOG2E


# ---------------------------------------------------------------------------
# dominance mass (strong lower bound)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DominanceReport:
    """Estimated prior mass where an alternative learner beats the mixture by > gamma bits."""

    gamma: float
    mass: float
    ci_halfwidth: float
    n_draws: int

    def as_row(self):
        return {"row": "dominance", "gamma": self.gamma, "mass": self.mass,
                "ci_halfwidth": self.ci_halfwidth, "n_draws": self.n_draws}


def mixture_assignment(prior, family, n):
    """log2 Q(x^n) of the grid mixture for every length-n sequence."""
    seqs = _all_sequences(family.alphabet, n)
    out = np.empty(len(seqs))
    for j, seq in enumerate(seqs):
        loglik = family.log_likelihood_nodes(prior.nodes, seq)
        out[j] = float(logsumexp(prior.log_weights + loglik)) * LOG2E
    return seqs, out


def point_mass_assignment(family, theta_star, n):
    """log2 P_{theta*}(x^n): the plug-in of one fixed model."""
    seqs = _all_sequences(family.alphabet, n)
    return seqs, np.array([family.log_likelihood(theta_star, s) * LOG2E for s in seqs])


def erm_plugin_assignment(family, n):
    """Sequential maximum-likelihood plug-in predictor (uniform before any data).

    Not a mixture, hence improvable; boundary ML estimates assign probability
    zero to some continuations, so most sequences get -inf log probability.
    """
    seqs = _all_sequences(family.alphabet, n)
    out = np.empty(len(seqs))
    for j, seq in enumerate(seqs):
        lp = 0.0
        for t in range(n):
            if t == 0:
                p = np.full(family.alphabet, 1.0 / family.alphabet)
            else:
                p = np.clip(family.predictive(family.mle(seq[:t]), seq[:t]), 0.0, None)
            pt = p[int(seq[t])]
            if pt == 0.0:
                lp = -np.inf
                break
            lp += np.log2(pt)
        out[j] = lp
    return seqs, out


def dominance_mass(family, prior, n, alt_log2, gamma, n_draws=10_000, seed=0):
    """Monte-Carlo prior mass of {theta : D(P_theta||Q) - D(P_theta||alt) > gamma}.

    ``alt_log2`` is the alternative learner's log2 probability per enumerated
    sequence (aligned with :func:`mixture_assignment` ordering). ``gamma`` is
    in bits. Parameters where the alternative has infinite divergence can
    never dominate and count as outside the set.
    """
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    seqs, q_log2 = mixture_assignment(prior, family, n)
    alt_log2 = np.asarray(alt_log2, dtype=float)
    draws = prior.sample(n_draws, seed)
    if family.exchangeable:
        counts = np.array([np.bincount(s, minlength=family.alphabet) for s in seqs], dtype=float)
        p = np.exp(family.count_log_likelihood_nodes(draws, counts).T)  # (M, K)
    else:
        p = np.empty((n_draws, len(seqs)))
        for j, seq in enumerate(seqs):
            p[:, j] = np.exp(family.log_likelihood_nodes(draws, seq))
    log2p = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    d_mix = np.sum(p * (log2p - q_log2[None, :]), axis=1)
    finite_alt = np.isfinite(alt_log2)
    blown = np.any(p[:, ~finite_alt] > 0, axis=1) if np.any(~finite_alt) else np.zeros(n_draws, bool)
    d_alt = np.sum(p[:, finite_alt] * (log2p[:, finite_alt] - alt_log2[None, finite_alt]), axis=1)
    inside = (~blown) & (d_mix - d_alt > gamma)
    est, lo, hi = wilson_interval(int(inside.sum()), n_draws)
    return DominanceReport(gamma, est, (hi - lo) / 2.0, n_draws)


__all__ = [
    "SupervisedSetting",
    "RegretReport",
    "DominanceReport",
    "count_vectors",
    "log_multinomial",
    "exact_regret_online",
    "exact_regret_batch",
    "exact_regret_supervised",
    "batch_online_identity",
    "mc_regret",
    "dominance_mass",
    "mixture_assignment",
    "point_mass_assignment",
    "erm_plugin_assignment",
]
