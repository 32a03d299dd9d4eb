"""Closed-form asymptotics of the hyperedge copy model.

Mean edge size, mean degree and degree-tail exponent are explicit formulas.
The stationary edge-size distribution is the Perron vector of the
size-transition matrix ``W`` and the pairwise-intersection constants
``q[i, j, k]`` are the Perron vector of a linear operator ``C`` assembled
from per-step transition coefficients.  Both eigenproblems are solved by
L1-normalised power iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .gen import ModelParams


class DivergenceError(ValueError):
    """A closed-form quantity is infinite or undefined for these parameters."""


class UnsupportedRegimeError(ValueError):
    """Parameters fall outside the regime an asymptotic result covers."""


class NonConvergenceError(RuntimeError):
    """Power iteration failed to reach the requested tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# ----------------------------------------------------------------------
# scalar summaries
# ----------------------------------------------------------------------


def mean_edge_size(params: ModelParams) -> float:
    if params.eta >= 1.0:
        raise DivergenceError("edge size is nonstationary for eta = 1")
    eta = params.eta
    return (1 - eta + params.mu_gamma + params.mu_beta) / (1 - eta)


def mean_degree(params: ModelParams) -> float:
    if params.mu_beta <= 0:
        raise DivergenceError("mean degree is unbounded when no novel nodes are added")
    return mean_edge_size(params) / params.mu_beta


def powerlaw_exponent(params: ModelParams) -> float:
    """Exponent ``zeta`` of the degree tail ``p_d ~ d**-zeta``."""
    eta = params.eta
    if eta >= 1.0:
        raise DivergenceError("edge size is nonstationary for eta = 1")
    denom = 1 - eta * (1 - params.mu_gamma - params.mu_beta)
    if denom <= 0:
        raise DivergenceError(f"tail exponent undefined: denominator {denom:.6g} <= 0")
    return 1 + (1 - eta + params.mu_gamma + params.mu_beta) / denom


@dataclass(frozen=True)
class AsymptoticSummary:
    mean_edge_size: float
    mean_degree: float
    zeta: float

    @classmethod
    def of(cls, params: ModelParams) -> "AsymptoticSummary":
        return cls(mean_edge_size(params), mean_degree(params), powerlaw_exponent(params))

    def to_dict(self):
        return {"mean_edge_size": self.mean_edge_size, "mean_degree": self.mean_degree,
                "zeta": self.zeta}


# ----------------------------------------------------------------------
# Perron solver
# ----------------------------------------------------------------------


def perron_vector(M, tol: float = 1e-12, max_iter: int = 10**6, x0=None):
    """Leading nonnegative eigenpair of a nonnegative square matrix.

    Power iteration with L1 normalisation, started from the uniform vector
    unless ``x0`` is given.  Stops once ``||M v - lam v||_1 / lam <= tol``.

    Returns
    -------
    v : ndarray
        Nonnegative, ``v.sum() == 1``.
    lam : float
        Eigenvalue estimate ``||M v||_1``.
    """
    if hasattr(M, "toarray") or hasattr(M, "tocsr"):
        matvec = M.dot
        shape = M.shape
        if np.any(M.data < 0):
            raise ValueError("matrix must be nonnegative")
    else:
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("matrix must be square")
        if np.any(M < 0):
            raise ValueError("matrix must be nonnegative")
        matvec = M.dot
        shape = M.shape
    size = shape[0]
    v = np.full(size, 1.0 / size) if x0 is None else np.asarray(x0, float) / np.sum(x0)
    residual = np.inf
    for _ in range(max_iter):
        w = matvec(v)
        lam = w.sum()
        if lam <= 0:
            raise NonConvergenceError("iterate collapsed to zero (nilpotent direction)", np.inf)
        w /= lam
        residual = np.abs(w - v).sum()
        v = w
        if residual <= tol:
            break
    else:
        raise NonConvergenceError(f"power iteration did not converge in {max_iter} steps", residual)
    w = matvec(v)
    lam = float(w.sum())
    return v, lam


def perron_residual(M, v, lam) -> float:
    """``||M v - lam v||_1 / lam``."""
    return float(np.abs(M.dot(v) - lam * v).sum() / lam)


# ----------------------------------------------------------------------
# edge-size distribution
# ----------------------------------------------------------------------


def _pad(p: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    n = min(size, p.size)
    out[:n] = p[:n]
    return out


def _binom_pmf(n: int, k: int, p: float) -> float:
    if k < 0 or k > n:
        return 0.0
    return comb(n, k) * p**k * (1 - p) ** (n - k)


def _added_size_law(params: ModelParams, size: int) -> np.ndarray:
    """Law of ``g + b`` (extant plus novel nodes) on ``0..size-1``."""
    g = _pad(params.gamma, size)
    b = _pad(params.beta, size)
    return np.convolve(g, b)[:size]


@dataclass
class EdgeSizeMatrix:
    """Size-transition matrix truncated at ``kmax``.

    ``raw[i-1, j-1]`` is the probability that a copy of a size-``j`` edge has
    size ``i``; ``W`` is ``raw`` with every column rescaled to sum to one and
    ``truncation_mass[j-1]`` the mass beyond ``kmax`` that was dropped.
    """

    raw: np.ndarray
    W: np.ndarray
    truncation_mass: np.ndarray

    @property
    def kmax(self) -> int:
        return self.W.shape[0]


def edge_size_matrix(params: ModelParams, kmax: int) -> EdgeSizeMatrix:
    """Probability that a copy of a size-``j`` edge has size ``i``, ``1 <= i, j <= kmax``.

    The new edge holds the seed, ``l ~ Binomial(j-1, eta)`` copied nodes,
    ``h ~ gamma`` extant and ``b ~ beta`` novel nodes, so ``i = 1 + l + h + b``.
    """
    if kmax < 2:
        raise ValueError("kmax must be at least 2")
    added = _added_size_law(params, kmax)
    raw = np.zeros((kmax, kmax))
    for j in range(1, kmax + 1):
        for ell in range(j):
            pl = _binom_pmf(j - 1, ell, params.eta)
            if pl == 0.0:
                continue
            # size 1 + ell + (g + b) for g + b = 0 .. kmax - 1 - ell
            lo = ell  # row index of size 1 + ell
            raw[lo:, j - 1] += pl * added[: kmax - lo]
    colsum = raw.sum(axis=0)
    trunc = 1.0 - colsum
    W = np.divide(raw, colsum, out=np.zeros_like(raw), where=colsum > 0)
    return EdgeSizeMatrix(raw=raw, W=W, truncation_mass=np.clip(trunc, 0.0, None))


@dataclass
class SizeDistribution:
    """Stationary edge-size law on sizes ``1..kmax``."""

    p: np.ndarray
    eigenvalue: float
    truncation_mass: float
    residual: float

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(1, self.p.size + 1)

    def mean(self) -> float:
        return float(np.dot(self.sizes, self.p))


def stationary_edge_size_dist(params: ModelParams, kmax: int = 30, tol=1e-12,
                              max_iter=10**6) -> SizeDistribution:
    """Perron vector of the column-renormalised size matrix.

    ``truncation_mass`` is the mass a stationary edge would place beyond
    ``kmax`` before renormalisation, weighted by the returned distribution.
    """
    if params.eta >= 1.0:
        raise DivergenceError("edge size is nonstationary for eta = 1")
    esm = edge_size_matrix(params, kmax)
    v, lam = perron_vector(esm.W, tol=tol, max_iter=max_iter)
    return SizeDistribution(
        p=v,
        eigenvalue=lam,
        truncation_mass=float(np.dot(esm.truncation_mass, v)),
        residual=perron_residual(esm.W, v, lam),
    )


# ----------------------------------------------------------------------
# intersection asymptotics
# ----------------------------------------------------------------------


def _hypergeom(k: int, draws: int, successes: int, population: int) -> float:
    """P(k successes in ``draws`` draws without replacement)."""
    if k < 0 or k > draws or k > successes or draws - k > population - successes:
        return 0.0
    return comb(successes, k) * comb(population - successes, draws - k) / comb(population, draws)


def w1(k: int, s: int, ell: int, h: int) -> float:
    """P(``k`` of the ``s`` copied nodes of a size-``ell`` edge fall in an ``h``-node overlap)."""
    return _hypergeom(k, s, h, ell)


def w2(k: int, s: int, x: int, ell: int, j: int, h: int, mu_beta: float) -> float:
    """Coefficient of ``1/m`` in P(|e & g| = k) from one extant node landing in ``g``.

    ``k - 1`` copied nodes hit the overlap and one of ``x`` extant nodes,
    chosen among ``n ~ mu_beta * m`` nodes, hits one of the ``j - k + 1``
    remaining members of ``g``.
    """
    if k < 1:
        return 0.0
    return _hypergeom(k - 1, s, h, ell) * x * (j - k + 1) / mu_beta


@dataclass
class IntersectionCoefficients:
    """Transition coefficients of the pair-count recursion (untruncated mass).

    Arrays are indexed by sizes directly (index 0 of a size axis is unused):

    ``b[i, k, j]``       P(|e| = i, |e & f| = k  given |f| = j)
    ``phi[i, k, l, h]``  P(|e| = i, |e & g| = k  given |f| = l, |f & g| = h)
    ``psi[i, k, l, j, h]``  coefficient of ``1/m`` in the same probability,
                         nonzero only for ``k = 1, h = 0`` to leading order
    ``retained[l]``      mass of new-edge sizes ``<= imax`` for |f| = l
    """

    imax: int
    b: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    retained: np.ndarray


def intersection_coefficients(params: ModelParams, imax: int = 12) -> IntersectionCoefficients:
    if imax < 2:
        raise ValueError("imax must be at least 2")
    if params.beta[0] >= 1.0:
        raise UnsupportedRegimeError("intersection asymptotics need beta_0 < 1")
    eta = params.eta
    mu_beta = params.mu_beta
    size = imax + 1
    gamma = _pad(params.gamma, size)
    beta = _pad(params.beta, size)
    xs = np.arange(size)

    # t1[s, l]: s nodes (seed included) taken from a size-l source
    t1 = np.zeros((size, size))
    for ell in range(1, size):
        for s in range(1, ell + 1):
            t1[s, ell] = _binom_pmf(ell - 1, s - 1, eta)

    # A[i, s] = sum_x gamma_x beta_{i-s-x};  Ax[i, s] = sum_x x gamma_x beta_{i-s-x}
    A = np.zeros((size, size))
    Ax = np.zeros((size, size))
    for s in range(1, size):
        for x in range(size):
            if gamma[x] == 0.0:
                continue
            for i in range(s + x, size):
                A[i, s] += gamma[x] * beta[i - s - x]
                Ax[i, s] += x * gamma[x] * beta[i - s - x]

    retained = np.zeros(size)
    for ell in range(1, size):
        retained[ell] = float(np.dot(t1[:, ell], A.sum(axis=0)))

    b = np.zeros((size, size, size))
    for j in range(1, size):
        for k in range(1, j + 1):
            b[:, k, j] = t1[k, j] * A[:, k]

    phi = np.zeros((size, size, size, size))
    psi = np.zeros((size, size, size, size, size))
    for ell in range(1, size):
        for h in range(0, ell + 1):
            for s in range(1, ell + 1):
                if t1[s, ell] == 0.0:
                    continue
                for k in range(0, min(h, s) + 1):
                    wk = w1(k, s, ell, h)
                    if wk:
                        phi[:, k, ell, h] += t1[s, ell] * wk * A[:, s]
                if mu_beta > 0:
                    for k in range(1, min(h + 1, s + 1, ell) + 1):
                        hit = _hypergeom(k - 1, s, h, ell)
                        if hit == 0.0:
                            continue
                        for j in range(max(k, h), size):
                            psi[:, k, ell, j, h] += t1[s, ell] * hit * (j - k + 1) / mu_beta * Ax[:, s]
    del xs
    return IntersectionCoefficients(imax=imax, b=b, phi=phi, psi=psi, retained=retained)


@dataclass
class IntersectionProfile:
    """Asymptotic pair-intersection constants.

    ``q[i, j, k]`` (sizes used as indices, index 0 of ``i``/``j`` unused):
    later edge of size ``i``, earlier of size ``j``, overlap ``k``.  The
    fraction of pairs in that class behaves as ``q[i, j, k] * m**-lambda_k``.
    """

    q: np.ndarray
    eigenvalue: float
    residual: float
    lam: dict = field(default_factory=dict)

    @property
    def imax(self) -> int:
        return self.q.shape[0] - 1

    def q_k(self) -> np.ndarray:
        """``sum_{ij} q[i, j, k]`` for ``k = 0..imax``."""
        return self.q.sum(axis=(0, 1))


def _flat_index(imax):
    size = imax + 1

    def idx(i, j, k):
        return ((i - 1) * imax + (j - 1)) * size + k

    return idx


def intersection_matrix(params: ModelParams, imax: int = 12,
                        coeffs: IntersectionCoefficients | None = None) -> np.ndarray:
    """Dense operator ``C`` with ``q = C q`` on the flattened ``(i, j, k)`` grid.

    Coefficients are divided by ``retained[|f|]`` so that, as for ``W``, the
    size of a copy is conditioned on being at most ``imax``.
    """
    c = coeffs or intersection_coefficients(params, imax)
    size = imax + 1
    N = imax * imax * size
    C = np.zeros((N, N))
    idx = _flat_index(imax)
    ret = np.where(c.retained > 0, c.retained, 1.0)
    phi = c.phi / ret[None, None, :, None]
    psi = c.psi / ret[None, None, :, None, None]
    b = c.b / ret[None, None, :]
    sizes = range(1, size)
    for j in sizes:
        for ell in sizes:
            # the copied edge f has size ell; the other edge g has size j and
            # may be the later (q[ell, j, h]... ) or earlier member of its pair
            for h in range(0, min(ell, j) + 1):
                src_f_later = idx(ell, j, h)
                src_f_earlier = idx(j, ell, h)
                for i in sizes:
                    if h == 0:
                        val = 0.5 * phi[i, 0, ell, 0]
                        if val:
                            C[idx(i, j, 0), src_f_later] += val
                            C[idx(i, j, 0), src_f_earlier] += val
                        for k in range(1, min(i, j) + 1):
                            val = b[i, k, j] + psi[i, k, ell, j, 0]
                            if val:
                                C[idx(i, j, k), src_f_later] += val
                                C[idx(i, j, k), src_f_earlier] += val
                    else:
                        for k in range(1, min(i, h) + 1):
                            val = phi[i, k, ell, h]
                            if val:
                                C[idx(i, j, k), src_f_later] += val
                                C[idx(i, j, k), src_f_earlier] += val
    return C


def intersection_profile(params: ModelParams, imax: int = 12, tol: float = 1e-12,
                         max_iter: int = 10**6) -> IntersectionProfile:
    """Solve ``q = C q`` and normalise so that ``sum_{ij} q[i, j, 0] = 1``."""
    C = intersection_matrix(params, imax)
    from scipy.sparse import csr_matrix

    Cs = csr_matrix(C)
    v, lam = perron_vector(Cs, tol=tol, max_iter=max_iter)
    residual = perron_residual(Cs, v, lam)
    size = imax + 1
    q = np.zeros((size, size, size))
    q[1:, 1:, :] = v.reshape(imax, imax, size)
    mass0 = q[:, :, 0].sum()
    if mass0 <= 0:
        raise NonConvergenceError("Perron vector carries no disjoint-pair mass", residual)
    q /= mass0
    lam_k = {k: (0 if k == 0 else 1) for k in range(size)}
    return IntersectionProfile(q=q, eigenvalue=lam, residual=residual, lam=lam_k)


def predicted_rk(profile: IntersectionProfile, m) -> np.ndarray:
    """Predicted ``r_k`` at ``m`` edges: ``r_0 = q_0``, ``r_k = q_k / m``."""
    if np.any(np.asarray(m) < 2):
        raise ValueError("m must be at least 2")
    qk = profile.q_k()
    out = qk / m
    out[0] = qk[0]
    return out
