"""Generative model: per-cluster factor-analytic Gaussians under mixed responses.

Each respondent i carries a latent D-vector z_i.  Conditional on membership
of cluster g and on the q-dimensional latent trait theta_i ~ N(0, I),

    z_i | theta_i ~ MVN_D(mu_g + Lambda_g theta_i, I),

so marginally z_i ~ MVN_D(mu_g, Lambda_g Lambda_g^T + I).  Observed responses
are deterministic decodes of z_i: a binary/ordinal item reads off which
threshold interval its single coordinate falls in, a nominal item reports
level 1 if its whole block is negative and otherwise the level whose
coordinate is the (positive) maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .survey import LatentLayout, ResponseMatrix, SurveySchema, latent_layout
from .truncnorm import log_interval_mass

__all__ = [
    "ClusterParams",
    "Thresholds",
    "LatentState",
    "ordinal_response_prob",
    "ordinal_level_probs",
    "decode_ordinal",
    "decode_nominal",
    "nominal_case",
    "decode_matrix",
    "marginal_latent_logpdf",
    "marginal_latent_density",
    "simulate_given",
    "simulate_dataset",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ClusterParams:
    """Mixture weights and per-cluster augmented loadings.

    ``lambda_tilde`` has shape (G, D, q+1); column 0 of each cluster's matrix
    is the mean mu_g and columns 1..q are the loadings Lambda_g.
    """

    pi: np.ndarray
    lambda_tilde: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        lt = np.asarray(self.lambda_tilde, dtype=float)
        if pi.ndim != 1 or lt.ndim != 3 or lt.shape[0] != pi.shape[0]:
            raise ValueError("pi must be (G,), lambda_tilde must be (G, D, q+1)")
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-8:
            raise ValueError("pi must be strictly positive and sum to 1")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "lambda_tilde", lt)

    @property
    def G(self) -> int:
        return self.pi.shape[0]

    @property
    def D(self) -> int:
        return self.lambda_tilde.shape[1]

    @property
    def q(self) -> int:
        return self.lambda_tilde.shape[2] - 1

    def mu(self, g: int) -> np.ndarray:
        return self.lambda_tilde[g, :, 0]

    def loadings(self, g: int) -> np.ndarray:
        return self.lambda_tilde[g, :, 1:]


class Thresholds:
    """Threshold vectors gamma_j for the binary/ordinal items.

    One array per item j < O, of length K_j + 1 with gamma[0] = -inf,
    gamma[1] = 0 (identifiability anchor), gamma[K_j] = +inf, nondecreasing.
    Binary items always carry (-inf, 0, +inf).
    """

    def __init__(self, gammas):
        self.gammas = tuple(np.asarray(g, dtype=float) for g in gammas)
        for j, g in enumerate(self.gammas):
            if g.ndim != 1 or g.size < 3:
                raise ValueError(f"item {j}: threshold vector too short")
            if not (np.isneginf(g[0]) and np.isposinf(g[-1])):
                raise ValueError(f"item {j}: thresholds must start at -inf and end at +inf")
            if g[1] != 0.0:
                raise ValueError(f"item {j}: gamma_1 must be fixed at 0")
            if np.any(np.diff(g) < 0):
                raise ValueError(f"item {j}: thresholds must be nondecreasing")

    @classmethod
    def from_interior(cls, interiors) -> "Thresholds":
        """Build from per-item interior vectors [0, gamma_2, ..., gamma_{K-1}]."""
        return cls([np.concatenate(([-np.inf], g, [np.inf])) for g in interiors])

    @classmethod
    def default(cls, schema: SurveySchema) -> "Thresholds":
        """Unit-spaced thresholds: gamma = (-inf, 0, 1, ..., K-2, +inf) per item."""
        return cls.from_interior(
            [np.arange(it.levels - 1, dtype=float) for it in schema.items if it.kind != "nominal"]
        )

    def interior(self, j: int) -> np.ndarray:
        return self.gammas[j][1:-1]

    def copy(self) -> "Thresholds":
        return Thresholds([g.copy() for g in self.gammas])

    def __eq__(self, other):
        return isinstance(other, Thresholds) and len(self.gammas) == len(other.gammas) and all(
            np.array_equal(a, b) for a, b in zip(self.gammas, other.gammas)
        )


@dataclass
class LatentState:
    """One configuration of all latent quantities.

    Z is (N, D), Theta is (N, q), and L holds 0-based cluster indices
    (external files use 1-based labels).
    """

    Z: np.ndarray
    Theta: np.ndarray
    L: np.ndarray


def ordinal_response_prob(lambda_tilde_row, theta, gamma_j, k: int) -> float:
    """P(y = k) for a binary/ordinal item: Phi(gamma_k - m) - Phi(gamma_{k-1} - m).

    ``m`` is the latent mean mu_j + lambda_j . theta assembled from the item's
    augmented parameter row and the respondent's trait vector.
    """
    row = np.asarray(lambda_tilde_row, dtype=float)
    m = row[0] + row[1:] @ np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma_j, dtype=float)
    if not 1 <= k <= gamma.size - 1:
        raise ValueError(f"level {k} out of range for {gamma.size - 1} levels")
    return float(np.exp(log_interval_mass(gamma[k - 1] - m, gamma[k] - m)))


def ordinal_level_probs(m, gamma_j) -> np.ndarray:
    """All K level probabilities at latent mean(s) m; last axis indexes levels."""
    m = np.asarray(m, dtype=float)
    gamma = np.asarray(gamma_j, dtype=float)
    lo = gamma[:-1] - m[..., None]
    hi = gamma[1:] - m[..., None]
    return np.exp(log_interval_mass(lo, hi))


def decode_ordinal(z: float, gamma_j) -> int:
    """Level k such that gamma_{k-1} <= z < gamma_k (half-open intervals)."""
    gamma = np.asarray(gamma_j, dtype=float)
    return int(np.searchsorted(gamma, z, side="right"))


def decode_nominal(z_block) -> int:
    """Level 1 if the whole block is negative, else the argmax coordinate's level."""
    z = np.asarray(z_block, dtype=float)
    k = int(np.argmax(z))
    return k + 2 if z[k] > 0 else 1


def nominal_case(y: int, k_index: int, z_block) -> int:
    """Which of the three nominal truncation cases applies to one block coordinate.

    ``k_index`` is the 1-based index of the coordinate within the block
    (coordinate k corresponds to response level k + 1).  Case 1: y = 1 (all
    coordinates negative).  Case 2: this coordinate is the positive maximum
    and y is its level.  Case 3: otherwise.
    """
    if y == 1:
        return 1
    if y == k_index + 1 and decode_nominal(z_block) == y:
        return 2
    return 3


def decode_matrix(Z, thresholds: Thresholds, schema: SurveySchema,
                  layout: LatentLayout | None = None) -> np.ndarray:
    """Decode an (N, D) latent matrix to the (N, J) response matrix."""
    if layout is None:
        layout = latent_layout(schema)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    n = Z.shape[0]
    Y = np.empty((n, schema.J), dtype=np.int64)
    for j, item in enumerate(schema.items):
        if item.kind != "nominal":
            Y[:, j] = np.searchsorted(thresholds.gammas[j], Z[:, j], side="right")
        else:
            block = Z[:, layout.block(j)]
            am = np.argmax(block, axis=1)
            mx = block[np.arange(n), am]
            Y[:, j] = np.where(mx > 0, am + 2, 1)
    return Y


def marginal_latent_logpdf(Z, mu, Lambda) -> np.ndarray:
    """Rows' log density under MVN_D(mu, Lambda Lambda^T + I).

    Uses the Woodbury identity and the matrix determinant lemma on the
    q x q core, so cost is O(N q^2 D) with no dense D x D factorization.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Lambda = np.asarray(Lambda, dtype=float)
    D, q = Lambda.shape
    r = Z - np.asarray(mu, dtype=float)
    core = Lambda.T @ Lambda + np.eye(q)
    cho = cho_factor(core, lower=True)
    a = r @ Lambda
    quad = np.einsum("ij,ij->i", r, r) - np.einsum("ij,ij->i", a, cho_solve(cho, a.T).T)
    logdet = 2.0 * np.log(np.diag(cho[0])).sum()
    return -0.5 * (D * np.log(2.0 * np.pi) + logdet + quad)


def marginal_latent_density(z, g: int, params: ClusterParams) -> float:
    """Density of one latent vector under cluster g's marginal Gaussian."""
    return float(np.exp(marginal_latent_logpdf(z, params.mu(g), params.loadings(g))[0]))


def _draw_allocations(pi, n, rng) -> np.ndarray:
    cum = np.cumsum(pi)
    cum[-1] = np.inf
    return np.searchsorted(cum, rng.random(n), side="right").astype(np.int64)


def _simulate_block(n: int, params: ClusterParams, thresholds: Thresholds,
                    schema: SurveySchema, layout: LatentLayout, rng):
    """Simulate n rows from one RNG stream; draw order is part of the contract."""
    q = params.q
    L = _draw_allocations(params.pi, n, rng)
    Theta = rng.standard_normal((n, q))
    theta_tilde = np.concatenate([np.ones((n, 1)), Theta], axis=1)
    mean = np.einsum("ndk,nk->nd", params.lambda_tilde[L], theta_tilde)
    Z = mean + rng.standard_normal((n, params.D))
    Y = decode_matrix(Z, thresholds, schema, layout)
    return Y, Z, Theta, L


def simulate_given(schema: SurveySchema, params: ClusterParams, thresholds: Thresholds,
                   N: int, rng) -> tuple[ResponseMatrix, LatentState]:
    """Simulate N respondents using a caller-supplied RNG stream (fast path)."""
    layout = latent_layout(schema)
    _check_dims(schema, params, thresholds, layout)
    Y, Z, Theta, L = _simulate_block(N, params, thresholds, schema, layout, rng)
    return ResponseMatrix(Y), LatentState(Z, Theta, L)


def simulate_dataset(schema: SurveySchema, params: ClusterParams, thresholds: Thresholds,
                     N: int, seed: int) -> tuple[ResponseMatrix, LatentState]:
    """Simulate N respondents plus the ground-truth latent state, reproducibly.

    Row i is generated from its own counter-based substream keyed by
    (seed, i), so the output is identical however rows are partitioned
    across workers.
    """
    layout = latent_layout(schema)
    _check_dims(schema, params, thresholds, layout)
    Y = np.empty((N, schema.J), dtype=np.int64)
    Z = np.empty((N, schema.D))
    Theta = np.empty((N, params.q))
    L = np.empty(N, dtype=np.int64)
    for i in range(N):
        rng = _row_rng(seed, i)
        Y[i], Z[i], Theta[i], L[i] = (arr[0] for arr in
                                      _simulate_block(1, params, thresholds, schema, layout, rng))
    return ResponseMatrix(Y), LatentState(Z, Theta, L)


def _row_rng(seed: int, i: int):
    key = np.array([seed & _MASK64, i & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _check_dims(schema, params, thresholds, layout):
    if params.D != schema.D:
        raise ValueError(f"params have D={params.D} but schema needs D={schema.D}")
    if len(thresholds.gammas) != schema.O:
        raise ValueError(
            f"{len(thresholds.gammas)} threshold vectors for {schema.O} binary/ordinal items"
        )
    for j in range(schema.O):
        if thresholds.gammas[j].size != schema.items[j].levels + 1:
            raise ValueError(f"item {schema.items[j].name!r}: threshold length mismatch")
