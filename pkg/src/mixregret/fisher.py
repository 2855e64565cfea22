"""Fisher information geometry: spectra, effective dimension, local regret bounds.

Eigen-decompositions use a cyclic Jacobi sweep (matrices here are small and
symmetric). Fisher matrices are in nats; the regret-bound formulas convert to
bits at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, NotAvailableError, ParameterError
from .info import LOG2E, as_generator


# ---------------------------------------------------------------------------
# Jacobi eigensolver
# ---------------------------------------------------------------------------


def jacobi_eigh(matrix, tol=1e-10, max_sweeps=60):
    """Eigenvalues (descending) and eigenvectors of a symmetric matrix.

    Cyclic-by-row Givens rotations until the off-diagonal Frobenius norm drops
    below ``tol`` (scaled by the matrix norm). Columns of the returned matrix
    are the eigenvectors matching the sorted eigenvalues.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError("need a square matrix")
    if a.shape[0] == 0:
        return np.array([]), np.zeros((0, 0))
    asym = np.max(np.abs(a - a.T))
    if asym > 1e-8 * max(1.0, np.max(np.abs(a))):
        raise ParameterError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    a = 0.5 * (a + a.T)
    d = a.shape[0]
    v = np.eye(d)
    scale = max(1.0, float(np.linalg.norm(a)))
    threshold = tol * scale

    def off(m):
        return np.sqrt(np.sum(m**2) - np.sum(np.diag(m) ** 2))

    for _ in range(max_sweeps):
        if off(a) <= threshold:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= threshold / (d * d):
                    continue
                # stable rotation angle (Golub & Van Loan style)
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = a[:, p].copy()
                rot_q = a[:, q].copy()
                a[:, p] = c * rot_p - s * rot_q
                a[:, q] = s * rot_p + c * rot_q
                rot_p = a[p, :].copy()
                rot_q = a[q, :].copy()
                a[p, :] = c * rot_p - s * rot_q
                a[q, :] = s * rot_p + c * rot_q
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    eigvals = np.diag(a).copy()
    order = np.argsort(eigvals)[::-1]
    return eigvals[order], v[:, order]


def eigen_spectrum(matrix, tol=1e-10):
    """Descending eigenvalue vector of a symmetric matrix (Jacobi sweep)."""
    return jacobi_eigh(matrix, tol=tol)[0]


# ---------------------------------------------------------------------------
# empirical Fisher information
# ---------------------------------------------------------------------------


def empirical_fim(family, theta, n_samples, seed, chunk=20_000):
    """Average outer product of single-observation scores under P_theta (nats)."""
    theta = family.validate_theta(theta, interior=True)
    if n_samples < family.d:
        raise ParameterError("need at least d samples")
    rng = as_generator(seed)
    if hasattr(family, "score_samples"):
        total = np.zeros((family.d, family.d))
        done = 0
        while done < n_samples:
            take = min(chunk, n_samples - done)
            g = family.score_samples(theta, take, rng)
            total += g.T @ g
            done += take
        return total / n_samples
    total = np.zeros((family.d, family.d))
    for _ in range(n_samples):
        data = family.sample_sequence(theta, 1, rng)
        g = family.grad_log_likelihood(theta, data)
        total += np.outer(g, g)
    return total / n_samples


# ---------------------------------------------------------------------------
# effective dimension and the local regret bound
# ---------------------------------------------------------------------------


def effective_k(eigenvalues, n, epsilon_sq_nats, radius):
    """Largest k whose KL-ellipsoid axis sqrt(2n eps^2 / lambda_k) fits in the ball.

    Equivalently the count of eigenvalues >= 2 n eps^2 / R^2; 0 if none.
    Eigenvalues must be sorted descending; epsilon^2 is in nats.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(np.diff(lam) > 1e-12):
        raise ParameterError("eigenvalues must be sorted descending")
    if epsilon_sq_nats < 0 or radius <= 0:
        raise ParameterError("need epsilon_sq >= 0 and radius > 0")
    threshold = 2.0 * n * epsilon_sq_nats / (radius * radius)
    return int(np.count_nonzero(lam >= threshold))


def ellipsoid_weight(eigenvalues, n, epsilon_sq_nats, radius):
    """Volume-ratio approximation of w(Theta_0) for a uniform prior on a radius-R ball.

    Uses (sqrt(2n) eps)^k / (R^k prod sqrt(lambda_i)) over the k effective
    directions, capped to [0, 1]. Homogeneous of degree k in eps.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    k = effective_k(lam, n, epsilon_sq_nats, radius)
    if k == 0:
        return 1.0
    log_w = 0.5 * k * np.log(2.0 * n * epsilon_sq_nats) - k * np.log(radius) - 0.5 * np.sum(
        np.log(lam[:k])
    )
    return float(min(1.0, np.exp(min(log_w, 0.0))))


@dataclass(frozen=True)
class SpectrumReport:
    """Sorted spectrum plus the quantities derived from it."""

    eigenvalues: np.ndarray
    n: int
    radius: float | None = None
    effective_k: int | None = None
    bound_bits: float | None = None
    epsilon_sq: float | None = None

    def as_row(self):
        return {
            "row": "spectrum", "n": self.n, "radius": self.radius,
            "effective_k": self.effective_k, "bound_bits": self.bound_bits,
            "epsilon_sq": self.epsilon_sq, "top_eigenvalue": float(self.eigenvalues[0]),
        }


def theorem1_bound(eigenvalues, n, radius):
    """Local regret bound from the n-sample FIM spectrum (bits).

    For each admissible k (the next eigenvalue must satisfy
    lambda_{k+1} <= k / (R^2 log2 e)), evaluate

        (1/2n) [ k/log2(e) + k log2(log2(e)/k) + sum_{i<=k} log2(R^2 lambda_i) ]

    and keep the smallest. The minimizing epsilon^2 is k / (2 n log2 e). The
    eigenvalues are those of the n-observation Fisher matrix, in nats.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(np.diff(lam) > 1e-12):
        raise ParameterError("eigenvalues must be sorted descending")
    d = len(lam)
    best = None
    for k in range(1, d + 1):
        if lam[k - 1] <= 0:
            break
        if k < d and lam[k] > k / (radius * radius * LOG2E):
            continue
        value = (1.0 / (2 * n)) * (
            k / LOG2E + k * np.log2(LOG2E / k) + np.sum(np.log2(radius * radius * lam[:k]))
        )
        if best is None or value < best[0]:
            best = (float(value), k)
    if best is None:
        raise NotAvailableError("no k satisfies the eigenvalue precondition; bound not applicable")
    value, k = best
    return SpectrumReport(
        eigenvalues=lam, n=n, radius=radius, effective_k=k, bound_bits=value,
        epsilon_sq=k / (2.0 * n * LOG2E),
    )


# ---------------------------------------------------------------------------
# Laplace posterior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LaplacePosterior:
    """Gaussian posterior approximation N(theta_ML, I(theta_ML)^-1 / n)."""

    mean: np.ndarray
    covariance: np.ndarray

    def sample(self, n_draws, seed):
        rng = as_generator(seed)
        chol = np.linalg.cholesky(self.covariance)
        return self.mean + rng.standard_normal((n_draws, len(self.mean))) @ chol.T

    def logpdf(self, theta):
        delta = np.asarray(theta, dtype=float) - self.mean
        prec = np.linalg.inv(self.covariance)
        _, logdet = np.linalg.slogdet(self.covariance)
        return float(-0.5 * (delta @ prec @ delta + logdet + len(self.mean) * np.log(2 * np.pi)))


def laplace_posterior(family, data):
    """Fit N(theta_hat, I(theta_hat)^-1 / n) from the data's ML estimate."""
    from .families import as_sample

    data = as_sample(data)
    theta_hat = family.mle(data)
    if family.on_boundary(theta_hat):
        raise BoundaryError("ML estimate on the domain boundary; Laplace approximation undefined")
    info = family.analytic_fisher(theta_hat, n=1)
    cov = np.linalg.inv(info) / len(data)
    return LaplacePosterior(np.asarray(theta_hat, dtype=float), 0.5 * (cov + cov.T))


# ---------------------------------------------------------------------------
# products of random linear layers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeepLinearRow:
    """Condition-number summary of an l-layer random linear product."""

    layers: int
    median_condition: float
    singular_values: np.ndarray  # (n_seeds, dim)

    def as_row(self):
        return {"row": "deep-linear", "layers": self.layers, "median_condition": self.median_condition}


def deep_linear_spectrum(layer_counts, dim, n_seeds=50, seed=0):
    """Singular spectra of products of independent standard-normal matrices.

    For each l in ``layer_counts`` multiply l i.i.d. N(0,1) dim x dim matrices
    and record the singular values (via the Jacobi spectrum of M^T M). The
    condition number's growth with l quantifies how depth skews the induced
    prior toward ill-conditioned linear maps.
    """
    rng = as_generator(seed)
    rows = []
    for layers in layer_counts:
        if layers < 0 or dim < 2:
            raise ParameterError("need layers >= 0 and dim >= 2")
        spectra = np.empty((n_seeds, dim))
        conds = np.empty(n_seeds)
        for i in range(n_seeds):
            m = np.eye(dim)
            for _ in range(layers):
                m = m @ rng.standard_normal((dim, dim))
            sv = np.sqrt(np.clip(eigen_spectrum(m.T @ m), 0.0, None))
            spectra[i] = sv
            conds[i] = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
        rows.append(DeepLinearRow(layers, float(np.median(conds)), spectra))
    return rows


__all__ = [
    "jacobi_eigh",
    "eigen_spectrum",
    "empirical_fim",
    "effective_k",
    "ellipsoid_weight",
    "SpectrumReport",
    "theorem1_bound",
    "LaplacePosterior",
    "laplace_posterior",
    "DeepLinearRow",
    "deep_linear_spectrum",
]
