"""Deterministic Monte Carlo experiments over the solver and inference stack.

Four experiment kinds: interval coverage against a known population cost,
the bias of the empirical cost, the squared grid-norm error of empirical
potentials, and the decay of the debiased divergence. Each replicate draws
its randomness from a stream derived by hashing (master seed, cell index,
replicate index), so every cell is independently reproducible and results
are byte-identical across thread counts.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, NotConverged
from .inference import ci_two_sample
from .measures import (
    CompactDomain,
    DiscreteMeasure,
    SplitMix64,
    load_measure,
    mix64,
    sample_empirical,
    sample_gaussian,
)
from .oracle import GaussianPairSpec, gaussian_cost
from .potentials import (
    GridSpec,
    HolderOrder,
    PotentialDifference,
    f_extension,
    holder_norm,
)
from .sinkhorn import Normalization, SolverConfig, cost, normalize, solve

_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_POPULATION_TAG = 0x504F50  # distinguishes population draws from replicate draws

_TRUTH_TOL = 1e-12  # population problems are solved well below replicate tol


class ExperimentKind(enum.Enum):
    COVERAGE = "coverage"
    BIAS_RATE = "bias_rate"
    POTENTIAL_RATE = "potential_rate"
    DIVERGENCE_RATE = "divergence_rate"


class ScenarioKind(enum.Enum):
    GAUSSIAN_PAIR = "gaussian"
    DISCRETE_PAIR = "discrete"


class EmitFormat(enum.Enum):
    CSV_TABLE = "csv"
    PLOT_DATA = "plot"


_RATE_KINDS = (
    ExperimentKind.BIAS_RATE,
    ExperimentKind.POTENTIAL_RATE,
    ExperimentKind.DIVERGENCE_RATE,
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative sweep description; see :func:`parse_config` for the file form."""

    kind: ExperimentKind
    scenario: ScenarioKind
    dims: tuple[int, ...]
    eps_list: tuple[float, ...]
    n_list: tuple[int, ...]
    replicates: int
    alpha: float
    seed: int
    solver: SolverConfig
    atoms: int = 10
    p_file: str | None = None
    q_file: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if not self.dims or not self.eps_list or not self.n_list:
            raise ConfigError("dims, eps_list, and n_list must be nonempty")
        if any(d < 1 for d in self.dims):
            raise ConfigError("dimensions must be >= 1")
        if any(e <= 0 for e in self.eps_list):
            raise ConfigError("eps values must be positive")
        if any(n < 1 for n in self.n_list):
            raise ConfigError("sample sizes must be >= 1")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly in (0, 1)")
        if not 0 <= self.seed <= _MASK64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.atoms < 1:
            raise ConfigError("atoms must be >= 1")
        if self.kind in _RATE_KINDS:
            if any(a >= b for a, b in zip(self.n_list, self.n_list[1:])):
                raise ConfigError("n_list must be strictly increasing for rate runs")


@dataclass(frozen=True)
class CoverageCell:
    d: int
    eps: float
    n: int
    hits: int
    evaluated: int
    excluded: int
    attempted: int
    coverage: float
    mean_half_width: float


@dataclass(frozen=True)
class CoverageResult:
    kind: ExperimentKind
    config: ExperimentConfig
    cells: tuple[CoverageCell, ...]
    populations: tuple = ()


@dataclass(frozen=True)
class RatePoint:
    n: int
    mean: float
    sd: float
    evaluated: int
    excluded: int


@dataclass(frozen=True)
class RateCurve:
    label: str
    d: int
    eps: float
    points: tuple[RatePoint, ...]
    slope: float
    slope_se: float
    intercept: float


@dataclass(frozen=True)
class RateResult:
    kind: ExperimentKind
    config: ExperimentConfig
    curves: tuple[RateCurve, ...]
    populations: tuple = ()


def derived_seed(master: int, *indices: int) -> int:
    """Fold indices into a master seed; pure and order-sensitive."""
    s = master & _MASK64
    for ix in indices:
        s = mix64((s + _GAMMA * (ix + 1)) & _MASK64)
    return s


def resolve_threads(requested: int | None = None) -> int:
    """Thread count from an explicit value, EOT_THREADS, or the machine."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("EOT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_replicates(fn, count: int, threads: int) -> list:
    if threads <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


class _GaussianScenario:
    """Isotropic Gaussian pair with closed-form population cost.

    The reference pair is N(0, I_d/2) against N(1, I_d/2) under the full
    squared-distance convention of the closed form. Scaling space by sqrt(2)
    maps that cost, at the same eps, onto this library's half-squared-distance
    convention, so replicates draw from N(0, I_d) and N(sqrt(2)*1, I_d).
    """

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg

    def sample_pair(self, stream: SplitMix64, d: int, n: int):
        P_n = sample_gaussian(np.zeros(d), 1.0, n, stream)
        Q_n = sample_gaussian(np.full(d, math.sqrt(2.0)), 1.0, n, stream)
        return P_n, Q_n

    def truth(self, d: int, eps: float) -> float:
        return gaussian_cost(GaussianPairSpec(d, eps))

    def populations(self) -> tuple:
        return ()


class _DiscreteScenario:
    """Finitely supported pair; population cost from a tight solve."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._pairs: dict[int, tuple[DiscreteMeasure, DiscreteMeasure]] = {}
        self._truths: dict[tuple[int, float], float] = {}
        if cfg.p_file is not None or cfg.q_file is not None:
            if cfg.p_file is None or cfg.q_file is None:
                raise ConfigError("p_file and q_file must be given together")
            P = load_measure(cfg.p_file)
            Q = load_measure(cfg.q_file)
            if P.dim != Q.dim:
                raise ConfigError("measure files disagree on dimension")
            if cfg.dims != (P.dim,):
                raise ConfigError(
                    f"dims must equal ({P.dim},) when measure files are given"
                )
            self._pairs[P.dim] = (P, Q)
        else:
            for d in cfg.dims:
                stream = SplitMix64(derived_seed(cfg.seed, _POPULATION_TAG, d))
                pts_p = stream.uniforms(cfg.atoms * d).reshape(cfg.atoms, d)
                pts_q = stream.uniforms(cfg.atoms * d).reshape(cfg.atoms, d)
                w = np.full(cfg.atoms, 1.0 / cfg.atoms)
                self._pairs[d] = (DiscreteMeasure(pts_p, w), DiscreteMeasure(pts_q, w))

    def pair(self, d: int) -> tuple[DiscreteMeasure, DiscreteMeasure]:
        return self._pairs[d]

    def sample_pair(self, stream: SplitMix64, d: int, n: int):
        P, Q = self._pairs[d]
        return sample_empirical(P, n, stream), sample_empirical(Q, n, stream)

    def truth(self, d: int, eps: float) -> float:
        key = (d, eps)
        if key not in self._truths:
            P, Q = self._pairs[d]
            solver = SolverConfig(eps=eps, tol=_TRUTH_TOL,
                                  max_iter=max(self.cfg.solver.max_iter, 10**6))
            pair, _ = solve(P, Q, solver)
            self._truths[key] = cost(P, Q, pair, tol=_TRUTH_TOL)
        return self._truths[key]

    def populations(self) -> tuple:
        return tuple((d, pq[0], pq[1]) for d, pq in sorted(self._pairs.items()))


def _scenario_for(cfg: ExperimentConfig):
    if cfg.scenario is ScenarioKind.GAUSSIAN_PAIR:
        return _GaussianScenario(cfg)
    return _DiscreteScenario(cfg)


def _cells(cfg: ExperimentConfig):
    out = []
    index = 0
    for d in cfg.dims:
        for eps in cfg.eps_list:
            for n in cfg.n_list:
                out.append((index, d, eps, n))
                index += 1
    return out


def run_coverage(cfg: ExperimentConfig, threads: int = 1) -> CoverageResult:
    """Per cell: draw n-and-n samples, build the two-sample interval, and
    count how often it contains the population cost. Non-converged
    replicates are excluded and counted, never silently dropped."""
    if cfg.kind is not ExperimentKind.COVERAGE:
        raise ConfigError(f"config kind is {cfg.kind.value}, expected coverage")
    scenario = _scenario_for(cfg)
    cells = []
    for index, d, eps, n in _cells(cfg):
        truth = scenario.truth(d, eps)
        solver = replace(cfg.solver, eps=eps)

        def one(r, d=d, n=n, index=index, solver=solver, truth=truth):
            stream = SplitMix64(derived_seed(cfg.seed, index, r))
            P_n, Q_n = scenario.sample_pair(stream, d, n)
            try:
                ci = ci_two_sample(P_n, Q_n, solver, cfg.alpha)
            except NotConverged:
                return None
            return (1 if ci.contains(truth) else 0, ci.half_width)

        outcomes = _map_replicates(one, cfg.replicates, threads)
        kept = [o for o in outcomes if o is not None]
        hits = sum(o[0] for o in kept)
        evaluated = len(kept)
        excluded = cfg.replicates - evaluated
        coverage = hits / evaluated if evaluated else math.nan
        mean_hw = (
            float(np.mean([o[1] for o in kept])) if kept else math.nan
        )
        cells.append(CoverageCell(
            d=d, eps=eps, n=n, hits=hits, evaluated=evaluated,
            excluded=excluded, attempted=cfg.replicates,
            coverage=coverage, mean_half_width=mean_hw,
        ))
    return CoverageResult(
        kind=cfg.kind, config=cfg, cells=tuple(cells),
        populations=scenario.populations(),
    )


def _fit_loglog(ns, means):
    """OLS of log |mean| on log n; returns (slope, slope_se, intercept)."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.maximum(np.abs(np.asarray(means, dtype=np.float64)), 1e-300))
    xbar = x.mean()
    ybar = y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0.0:  # a single sample size admits no slope
        return math.nan, math.nan, float(ybar)
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = ybar - slope * xbar
    k = len(x)
    if k > 2:
        resid = y - (intercept + slope * x)
        se = math.sqrt(float(np.sum(resid**2)) / (k - 2) / sxx)
    else:
        se = math.nan
    return slope, se, float(intercept)


def _make_points(ns, samples_per_n):
    points = []
    for n, vals in zip(ns, samples_per_n):
        kept = [v for v in vals if v is not None]
        arr = np.asarray(kept, dtype=np.float64)
        mean = float(arr.mean()) if kept else math.nan
        sd = float(arr.std(ddof=1)) if len(kept) > 1 else 0.0
        points.append(RatePoint(
            n=n, mean=mean, sd=sd,
            evaluated=len(kept), excluded=len(vals) - len(kept),
        ))
    return points


def _make_curve(label, d, eps, points):
    slope, se, intercept = _fit_loglog(
        [p.n for p in points], [p.mean for p in points]
    )
    return RateCurve(label=label, d=d, eps=eps, points=tuple(points),
                     slope=slope, slope_se=se, intercept=intercept)


def _require_discrete(cfg: ExperimentConfig, what: str):
    if cfg.scenario is not ScenarioKind.DISCRETE_PAIR:
        raise ConfigError(f"{what} runs need the discrete scenario (exact truth)")


def run_bias_rate(cfg: ExperimentConfig, threads: int = 1) -> RateResult:
    """Mean of (empirical cost - population cost) per sample size, with a
    log-log slope fit of the absolute mean bias."""
    if cfg.kind is not ExperimentKind.BIAS_RATE:
        raise ConfigError(f"config kind is {cfg.kind.value}, expected bias_rate")
    _require_discrete(cfg, "bias-rate")
    scenario = _scenario_for(cfg)
    curves = []
    per_cell = {(d, e, n): ix for ix, d, e, n in _cells(cfg)}
    for d in cfg.dims:
        P, Q = scenario.pair(d)
        for eps in cfg.eps_list:
            truth = scenario.truth(d, eps)
            solver = replace(cfg.solver, eps=eps)
            samples = []
            for n in cfg.n_list:
                index = per_cell[(d, eps, n)]

                def one(r, n=n, index=index):
                    stream = SplitMix64(derived_seed(cfg.seed, index, r))
                    P_n = sample_empirical(P, n, stream)
                    try:
                        return bias_replicate(P_n, Q, solver, truth)
                    except NotConverged:
                        return None

                samples.append(_map_replicates(one, cfg.replicates, threads))
            points = _make_points(cfg.n_list, samples)
            curves.append(_make_curve("bias", d, eps, points))
    return RateResult(kind=cfg.kind, config=cfg, curves=tuple(curves),
                      populations=scenario.populations())


def bias_replicate(P_emp: DiscreteMeasure, Q: DiscreteMeasure,
                   solver: SolverConfig, truth: float) -> float:
    """Cost of one empirical problem minus the population cost."""
    pair, _ = solve(P_emp, Q, solver)
    return cost(P_emp, Q, pair, tol=solver.tol) - truth


def run_potential_rate(cfg: ExperimentConfig, threads: int = 1) -> RateResult:
    """Mean squared grid norm of (empirical minus population) f potentials.

    Fits the slope of the squared derivative-sum norm and, as a
    sub-statistic of the same runs, of the squared sup-norm term alone.
    """
    if cfg.kind is not ExperimentKind.POTENTIAL_RATE:
        raise ConfigError(f"config kind is {cfg.kind.value}, expected potential_rate")
    _require_discrete(cfg, "potential-rate")
    if any(d > 2 for d in cfg.dims):
        raise ConfigError("potential-rate runs support d <= 2")
    if any(e != 1.0 for e in cfg.eps_list):
        raise ConfigError("potential-rate runs require eps = 1")
    scenario = _scenario_for(cfg)
    curves = []
    per_cell = {(d, e, n): ix for ix, d, e, n in _cells(cfg)}
    for d in cfg.dims:
        P, Q = scenario.pair(d)
        domain = CompactDomain.enclosing(P, Q)
        grid = GridSpec.default(domain)
        order = HolderOrder.for_dimension(d)
        for eps in cfg.eps_list:
            solver = replace(cfg.solver, eps=eps)
            pop_solver = SolverConfig(eps=eps, tol=_TRUTH_TOL,
                                      max_iter=max(cfg.solver.max_iter, 10**6))
            pop_pair, _ = solve(P, Q, pop_solver)
            pop_pair = normalize(pop_pair, P, Q, Normalization.ZERO_G_MEAN)
            f_star = f_extension(pop_pair, Q)
            holder_samples = []
            sup_samples = []
            for n in cfg.n_list:
                index = per_cell[(d, eps, n)]

                def one(r, n=n, index=index):
                    stream = SplitMix64(derived_seed(cfg.seed, index, r))
                    P_n = sample_empirical(P, n, stream)
                    try:
                        pair, _ = solve(P_n, Q, solver)
                    except NotConverged:
                        return None
                    pair = normalize(pair, P_n, Q, Normalization.ZERO_G_MEAN)
                    delta = PotentialDifference(f_extension(pair, Q), f_star)
                    est = holder_norm(delta, order, grid)
                    return est.value**2, est.order_terms[0] ** 2

                both = _map_replicates(one, cfg.replicates, threads)
                holder_samples.append([b[0] if b is not None else None for b in both])
                sup_samples.append([b[1] if b is not None else None for b in both])
            curves.append(_make_curve(
                "holder_sq", d, eps, _make_points(cfg.n_list, holder_samples)
            ))
            curves.append(_make_curve(
                "sup_sq", d, eps, _make_points(cfg.n_list, sup_samples)
            ))
    return RateResult(kind=cfg.kind, config=cfg, curves=tuple(curves),
                      populations=scenario.populations())


def run_divergence_rate(cfg: ExperimentConfig, threads: int = 1) -> RateResult:
    """Mean one-sample and two-sample divergences per sample size.

    The population self-transport term is solved once per curve and shared
    across replicates; the per-replicate empirical self term is shared
    between the one- and two-sample statistics.
    """
    if cfg.kind is not ExperimentKind.DIVERGENCE_RATE:
        raise ConfigError(f"config kind is {cfg.kind.value}, expected divergence_rate")
    _require_discrete(cfg, "divergence-rate")
    if any(e != 1.0 for e in cfg.eps_list):
        raise ConfigError("divergence-rate runs require eps = 1")
    scenario = _scenario_for(cfg)
    curves = []
    per_cell = {(d, e, n): ix for ix, d, e, n in _cells(cfg)}
    for d in cfg.dims:
        P, _ = scenario.pair(d)
        for eps in cfg.eps_list:
            solver = replace(cfg.solver, eps=eps)
            pop_pair, _ = solve(P, P, solver)
            s_pop_self = cost(P, P, pop_pair, tol=solver.tol)
            one_samples = []
            two_samples = []
            for n in cfg.n_list:
                index = per_cell[(d, eps, n)]

                def one(r, n=n, index=index):
                    stream = SplitMix64(derived_seed(cfg.seed, index, r))
                    P_n = sample_empirical(P, n, stream)
                    P2_n = sample_empirical(P, n, stream)
                    try:
                        s_nn = _plain_cost(P_n, P_n, solver)
                        s_np = _plain_cost(P_n, P, solver)
                        s_22 = _plain_cost(P2_n, P2_n, solver)
                        s_12 = _plain_cost(P_n, P2_n, solver)
                    except NotConverged:
                        return None
                    one_sample = s_np - 0.5 * (s_nn + s_pop_self)
                    two_sample = s_12 - 0.5 * (s_nn + s_22)
                    return one_sample, two_sample

                both = _map_replicates(one, cfg.replicates, threads)
                one_samples.append([b[0] if b is not None else None for b in both])
                two_samples.append([b[1] if b is not None else None for b in both])
            curves.append(_make_curve(
                "one_sample", d, eps, _make_points(cfg.n_list, one_samples)
            ))
            curves.append(_make_curve(
                "two_sample", d, eps, _make_points(cfg.n_list, two_samples)
            ))
    return RateResult(kind=cfg.kind, config=cfg, curves=tuple(curves),
                      populations=scenario.populations())


def _plain_cost(A: DiscreteMeasure, B: DiscreteMeasure, solver: SolverConfig) -> float:
    pair, _ = solve(A, B, solver)
    return cost(A, B, pair, tol=solver.tol)


def run_experiment(cfg: ExperimentConfig, threads: int = 1):
    if cfg.kind is ExperimentKind.COVERAGE:
        return run_coverage(cfg, threads)
    if cfg.kind is ExperimentKind.BIAS_RATE:
        return run_bias_rate(cfg, threads)
    if cfg.kind is ExperimentKind.POTENTIAL_RATE:
        return run_potential_rate(cfg, threads)
    return run_divergence_rate(cfg, threads)


# ---------------------------------------------------------------------------
# config file parsing


_CONFIG_KEYS = {
    "kind", "scenario", "dims", "eps_list", "n_list", "replicates",
    "alpha", "seed", "tol", "max_iter", "atoms", "p_file", "q_file",
}

_REQUIRED_KEYS = ("kind", "scenario", "dims", "eps_list", "n_list",
                  "replicates", "alpha", "seed")


def parse_config(text: str) -> ExperimentConfig:
    """Parse the line-oriented ``key = value`` experiment description.

    Blank lines and ``#`` comments are skipped; list values are comma
    separated; unknown or duplicate keys are rejected.
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in entries]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    def _int(key, default=None):
        raw = entries.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {exc}") from exc

    def _float(key, default=None):
        raw = entries.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {exc}") from exc

    def _list(key, conv):
        try:
            return tuple(conv(tok.strip()) for tok in entries[key].split(","))
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {exc}") from exc

    try:
        kind = ExperimentKind(entries["kind"].lower())
    except ValueError as exc:
        raise ConfigError(f"unknown kind {entries['kind']!r}") from exc
    try:
        scenario = ScenarioKind(entries["scenario"].lower())
    except ValueError as exc:
        raise ConfigError(f"unknown scenario {entries['scenario']!r}") from exc

    eps_list = _list("eps_list", float)
    solver = SolverConfig(
        eps=eps_list[0],
        tol=_float("tol", 1e-9),
        max_iter=_int("max_iter", 100_000),
    )
    return ExperimentConfig(
        kind=kind,
        scenario=scenario,
        dims=_list("dims", int),
        eps_list=eps_list,
        n_list=_list("n_list", int),
        replicates=_int("replicates"),
        alpha=_float("alpha"),
        seed=_int("seed"),
        solver=solver,
        atoms=_int("atoms", 10),
        p_file=entries.get("p_file"),
        q_file=entries.get("q_file"),
    )


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# emission


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _header_comments(result) -> list[str]:
    cfg = result.config
    lines = [
        f"# kind={cfg.kind.value},scenario={cfg.scenario.value},"
        f"seed={cfg.seed},alpha={_fmt(cfg.alpha)},replicates={cfg.replicates},"
        f"tol={_fmt(cfg.solver.tol)},max_iter={cfg.solver.max_iter}"
    ]
    for d, P, Q in result.populations:
        for name, m in (("p", P), ("q", Q)):
            atoms = ";".join(
                ",".join(_fmt(v) for v in (w, *pt))
                for w, pt in zip(m.weights, m.points)
            )
            lines.append(f"# population_{name}_d{d}={atoms}")
    return lines


def _render_coverage_csv(result: CoverageResult) -> str:
    lines = _header_comments(result)
    cfg = result.config
    by_key = {(c.d, c.eps, c.n): c for c in result.cells}
    for d in cfg.dims:
        if not any(c.d == d for c in result.cells):
            continue
        lines.append(f"# d={d}")
        lines.append("n," + ",".join(f"eps={_fmt(e)}" for e in cfg.eps_list))
        for n in cfg.n_list:
            row = [str(n)]
            for e in cfg.eps_list:
                row.append(_fmt(by_key[(d, e, n)].coverage))
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _render_coverage_plot(result: CoverageResult) -> str:
    lines = ["curve,d,eps,n,coverage,mean_half_width,hits,evaluated,excluded,attempted"]
    for c in result.cells:
        lines.append(",".join([
            "coverage", str(c.d), _fmt(c.eps), str(c.n), _fmt(c.coverage),
            _fmt(c.mean_half_width), str(c.hits), str(c.evaluated),
            str(c.excluded), str(c.attempted),
        ]))
    return "\n".join(lines) + "\n"


def _render_rate_csv(result: RateResult) -> str:
    lines = _header_comments(result)
    cfg = result.config
    by_key = {(c.label, c.d, c.eps): c for c in result.curves}
    labels = []
    for c in result.curves:
        if c.label not in labels:
            labels.append(c.label)
    for d in cfg.dims:
        for label in labels:
            if not any(c.d == d and c.label == label for c in result.curves):
                continue
            lines.append(f"# d={d},label={label}")
            lines.append("n," + ",".join(f"eps={_fmt(e)}" for e in cfg.eps_list))
            for i, n in enumerate(cfg.n_list):
                row = [str(n)]
                for e in cfg.eps_list:
                    row.append(_fmt(by_key[(label, d, e)].points[i].mean))
                lines.append(",".join(row))
            for fit_field in ("slope", "slope_se", "intercept"):
                row = [fit_field]
                for e in cfg.eps_list:
                    row.append(_fmt(getattr(by_key[(label, d, e)], fit_field)))
                lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _render_rate_plot(result: RateResult) -> str:
    lines = ["curve,d,eps,row,x,y"]
    for c in result.curves:
        for p in c.points:
            x = math.log(p.n)
            y = math.log(max(abs(p.mean), 1e-300))
            lines.append(",".join([
                c.label, str(c.d), _fmt(c.eps), "point", _fmt(x), _fmt(y),
            ]))
        lines.append(",".join([
            c.label, str(c.d), _fmt(c.eps), "fit", _fmt(c.slope), _fmt(c.intercept),
        ]))
    return "\n".join(lines) + "\n"


def render(result, fmt: EmitFormat) -> str:
    if isinstance(result, CoverageResult):
        if fmt is EmitFormat.CSV_TABLE:
            return _render_coverage_csv(result)
        return _render_coverage_plot(result)
    if isinstance(result, RateResult):
        if fmt is EmitFormat.CSV_TABLE:
            return _render_rate_csv(result)
        return _render_rate_plot(result)
    raise TypeError(f"cannot render {type(result).__name__}")


def emit(result, path, fmt: EmitFormat) -> None:
    """Write a result to disk; identical results produce identical bytes."""
    text = render(result, fmt)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
