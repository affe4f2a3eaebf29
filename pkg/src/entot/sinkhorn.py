"""Log-domain solver for the entropically regularized transport dual.

All iterations run on log-scale quantities with max-shifted log-sum-exp, so
small regularization values stay stable. The ground cost is the half squared
Euclidean distance between support points; it is materialized densely below a
configurable entry budget and recomputed in row blocks above it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NegativeEntry, NotConverged, NotOptimal
from .measures import DiscreteMeasure

# Above this many cost-matrix entries the solver streams row blocks instead
# of holding the dense matrix (16M entries ~ 128 MB of float64).
DENSE_ENTRY_LIMIT = 16_000_000


class Normalization(enum.Enum):
    """Constant-shift conventions pinning an otherwise shift-free pair."""

    EQUAL_MEANS = "equal_means"  # <f, a> == <g, b>
    ZERO_G_MEAN = "zero_g_mean"  # <g, b> == 0
    RAW = "raw"


@dataclass(frozen=True)
class SolverConfig:
    """Regularization strength and stopping rule for :func:`solve`."""

    eps: float
    tol: float = 1e-9
    max_iter: int = 100_000

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True, eq=False)
class PotentialPair:
    """Dual potential values on the two supports.

    f lives on the first measure's support, g on the second's. The
    normalization tag records which shift convention the pair satisfies.
    """

    f: np.ndarray
    g: np.ndarray
    eps: float
    normalization: Normalization = Normalization.RAW

    def __post_init__(self):
        f = np.array(self.f, dtype=np.float64).reshape(-1)
        g = np.array(self.g, dtype=np.float64).reshape(-1)
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        f.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Nonnegative coupling matrix between two discrete supports."""

    entries: np.ndarray

    def __post_init__(self):
        ent = np.array(self.entries, dtype=np.float64)
        if ent.ndim != 2:
            raise ValueError("entries must be a 2-d array")
        if np.any(ent < 0):
            raise NegativeEntry("transport plan has a negative entry")
        ent.flags.writeable = False
        object.__setattr__(self, "entries", ent)


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    dual_value: float
    converged: bool


def _log_weights(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(w > 0, np.log(np.maximum(w, np.finfo(np.float64).tiny)), -np.inf)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def half_sq_cost(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Half squared Euclidean distances, accumulated per axis.

    Avoids BLAS so the summation order (and hence the bit pattern) does not
    depend on the thread count of the underlying library.
    """
    n, m = X.shape[0], Y.shape[0]
    C = np.zeros((n, m))
    for k in range(X.shape[1]):
        diff = X[:, k, None] - Y[None, :, k]
        C += diff * diff
    C *= 0.5
    return C


class _Updates:
    """Half-step maps of the dual iteration over a possibly blocked cost."""

    def __init__(self, P: DiscreteMeasure, Q: DiscreteMeasure, eps: float,
                 dense_entry_limit: int = DENSE_ENTRY_LIMIT):
        if P.dim != Q.dim:
            raise DimensionMismatch(
                f"ambient dimensions differ: {P.dim} vs {Q.dim}"
            )
        self.X, self.Y = P.points, Q.points
        self.log_a = _log_weights(P.weights)
        self.log_b = _log_weights(Q.weights)
        self.eps = eps
        n, m = P.n, Q.n
        if n * m <= dense_entry_limit:
            self._C = half_sq_cost(self.X, self.Y)
            self._block = n
        else:
            self._C = None
            self._block = max(1, dense_entry_limit // m)

    def _row_blocks(self):
        n = self.X.shape[0]
        if self._C is not None:
            yield slice(0, n), self._C
            return
        for start in range(0, n, self._block):
            rows = slice(start, min(start + self._block, n))
            yield rows, half_sq_cost(self.X[rows], self.Y)

    def f_from(self, g: np.ndarray) -> np.ndarray:
        out = np.empty(self.X.shape[0])
        for rows, C in self._row_blocks():
            s = self.log_b[None, :] + (g[None, :] - C) / self.eps
            out[rows] = -self.eps * _logsumexp(s, axis=1)
        return out

    def g_from(self, f: np.ndarray) -> np.ndarray:
        if self._C is not None:
            s = self.log_a[:, None] + (f[:, None] - self._C) / self.eps
            return -self.eps * _logsumexp(s, axis=0)
        # Streaming log-sum-exp over row blocks: keep a running column max M
        # and the sum T of exponentials shifted by M.
        m = self.Y.shape[0]
        M = np.full(m, -np.inf)
        T = np.zeros(m)
        for rows, C in self._row_blocks():
            s = self.log_a[rows, None] + (f[rows, None] - C) / self.eps
            Mb = np.max(s, axis=0)
            Mnew = np.maximum(M, Mb)
            base = np.where(np.isfinite(Mnew), Mnew, 0.0)
            scale = np.zeros(m)
            finite = np.isfinite(M)
            scale[finite] = np.exp(M[finite] - base[finite])
            T = T * scale + np.sum(np.exp(s - base[None, :]), axis=0)
            M = Mnew
        with np.errstate(divide="ignore"):
            return -self.eps * (np.log(T) + M)

    def log_plan_lse(self, f: np.ndarray, g: np.ndarray) -> float:
        """log sum_ij a_i b_j exp((f_i + g_j - C_ij)/eps), streamed."""
        M = -np.inf
        T = 0.0
        for rows, C in self._row_blocks():
            s = (self.log_a[rows, None] + self.log_b[None, :]
                 + (f[rows, None] + g[None, :] - C) / self.eps)
            Mb = float(np.max(s))
            if Mb == -np.inf:
                continue
            Mnew = max(M, Mb)
            T = (T * np.exp(M - Mnew) if np.isfinite(M) else 0.0) \
                + float(np.sum(np.exp(s - Mnew)))
            M = Mnew
        return M + float(np.log(T)) if np.isfinite(M) else -np.inf


def _check_pair_dims(P: DiscreteMeasure, Q: DiscreteMeasure, pair: PotentialPair):
    if pair.f.shape[0] != P.n or pair.g.shape[0] != Q.n:
        raise DimensionMismatch(
            f"pair sized ({pair.f.shape[0]}, {pair.g.shape[0]}) does not match "
            f"supports sized ({P.n}, {Q.n})"
        )


def normalize(pair: PotentialPair, P: DiscreteMeasure, Q: DiscreteMeasure,
              convention: Normalization) -> PotentialPair:
    """Shift (f + c, g - c) so the requested convention holds exactly.

    The shift leaves the plan, the dual objective, and all marginals
    unchanged.
    """
    _check_pair_dims(P, Q, pair)
    f_mean = float(pair.f @ P.weights)
    g_mean = float(pair.g @ Q.weights)
    if convention is Normalization.EQUAL_MEANS:
        c = 0.5 * (g_mean - f_mean)
    elif convention is Normalization.ZERO_G_MEAN:
        c = g_mean
    elif convention is Normalization.RAW:
        c = 0.0
    else:  # pragma: no cover
        raise ValueError(f"unknown convention {convention!r}")
    return PotentialPair(pair.f + c, pair.g - c, pair.eps, convention)


def solve(P: DiscreteMeasure, Q: DiscreteMeasure, cfg: SolverConfig,
          dense_entry_limit: int = DENSE_ENTRY_LIMIT):
    """Run alternating log-domain updates until the marginal residual is met.

    One iteration updates f against the current g, then g against the new f.
    The residual after a sweep is the sup norm of the log column-marginal
    ratio, i.e. ``max_j |g_new_j - g_old_j| / eps``; at or below ``cfg.tol``
    both marginals of the implied plan match the weights to within ``tol``.

    Returns ``(pair, report)`` with the pair normalized to equal means.
    Raises :class:`NotConverged` (with the report and pair attached) if the
    iteration budget runs out first.
    """
    upd = _Updates(P, Q, cfg.eps, dense_entry_limit)
    g = np.zeros(Q.n)
    f = np.zeros(P.n)
    residual = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iter + 1):
        f = upd.f_from(g)
        g_new = upd.g_from(f)
        residual = float(np.max(np.abs(g_new - g))) / cfg.eps
        g = g_new
        if residual <= cfg.tol:
            converged = True
            break
    pair = normalize(PotentialPair(f, g, cfg.eps), P, Q, Normalization.EQUAL_MEANS)
    dual = dual_objective(P, Q, pair, dense_entry_limit=dense_entry_limit)
    report = SolveReport(iterations, residual, dual, converged)
    if not converged:
        raise NotConverged(
            f"residual {residual:.3e} above tol {cfg.tol:.3e} "
            f"after {iterations} iterations",
            report=report,
            pair=pair,
        )
    return pair, report


def optimality_residual(P: DiscreteMeasure, Q: DiscreteMeasure, pair: PotentialPair,
                        dense_entry_limit: int = DENSE_ENTRY_LIMIT) -> float:
    """Sup norm of both sides' log marginal ratios for the implied plan."""
    _check_pair_dims(P, Q, pair)
    upd = _Updates(P, Q, pair.eps, dense_entry_limit)
    rf = float(np.max(np.abs(pair.f - upd.f_from(pair.g)))) / pair.eps
    rg = float(np.max(np.abs(pair.g - upd.g_from(pair.f)))) / pair.eps
    return max(rf, rg)


def dual_objective(P: DiscreteMeasure, Q: DiscreteMeasure, pair: PotentialPair,
                   dense_entry_limit: int = DENSE_ENTRY_LIMIT) -> float:
    """Value of the regularized dual functional at an arbitrary pair.

    ``<f, a> + <g, b> - eps * sum_ij a_i b_j exp((f_i + g_j - C_ij)/eps) + eps``
    """
    _check_pair_dims(P, Q, pair)
    upd = _Updates(P, Q, pair.eps, dense_entry_limit)
    lse = upd.log_plan_lse(pair.f, pair.g)
    mass = float(np.exp(lse))
    return float(pair.f @ P.weights + pair.g @ Q.weights) - pair.eps * mass + pair.eps


def cost(P: DiscreteMeasure, Q: DiscreteMeasure, pair: PotentialPair,
         tol: float = 1e-9, dense_entry_limit: int = DENSE_ENTRY_LIMIT) -> float:
    """Transport cost ``<f, a> + <g, b>`` of a pair satisfying optimality.

    Raises :class:`NotOptimal` when the pair's marginal residual exceeds
    ``10 * tol``; use the tolerance the pair was solved at.
    """
    _check_pair_dims(P, Q, pair)
    residual = optimality_residual(P, Q, pair, dense_entry_limit)
    if residual > 10.0 * tol:
        raise NotOptimal(
            f"marginal residual {residual:.3e} exceeds 10*tol = {10 * tol:.3e}"
        )
    return float(pair.f @ P.weights + pair.g @ Q.weights)


def plan(P: DiscreteMeasure, Q: DiscreteMeasure, pair: PotentialPair) -> TransportPlan:
    """Entropic coupling ``pi_ij = a_i b_j exp((f_i + g_j - C_ij)/eps)``."""
    _check_pair_dims(P, Q, pair)
    C = half_sq_cost(P.points, Q.points)
    log_a = _log_weights(P.weights)
    log_b = _log_weights(Q.weights)
    s = (log_a[:, None] + log_b[None, :]
         + (pair.f[:, None] + pair.g[None, :] - C) / pair.eps)
    return TransportPlan(np.exp(s))


def primal_cost(P: DiscreteMeasure, Q: DiscreteMeasure, transport: TransportPlan,
                eps: float) -> float:
    """Transport term plus eps times relative entropy to the product weights.

    Zero entries contribute zero to the entropy term.
    """
    pi = transport.entries
    if pi.shape != (P.n, Q.n):
        raise DimensionMismatch(
            f"plan shaped {pi.shape} does not match supports ({P.n}, {Q.n})"
        )
    if np.any(pi < 0):
        raise NegativeEntry("transport plan has a negative entry")
    C = half_sq_cost(P.points, Q.points)
    transport_term = float(np.sum(pi * C))
    ab = P.weights[:, None] * Q.weights[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_log = np.where(pi > 0, np.log(pi) - np.log(ab), 0.0)
    entropy_term = float(np.sum(np.where(pi > 0, pi * ratio_log, 0.0)))
    return transport_term + eps * entropy_term
