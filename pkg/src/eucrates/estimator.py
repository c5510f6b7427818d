"""Monte Carlo means, alpha fits, rate fits and paired gap experiments.

Trial ``t`` at size ``n`` always draws its points from the stream
``SeedSpec(seed).stream(n, t)``; paired experiments extend or truncate that
same stream so that every compared quantity sees common random numbers.
Results are gathered and reduced in trial order, so the thread count never
changes a number.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, UsageError
from .geometry import Box, PointSet
from .sampling import (
    AffineDensity,
    BlockDensity,
    HolderDensity,
    Sampler,
    SeedSpec,
    approximate_block,
    density_power_integral,
    l1_gap,
    parse_sampler,
)
from .solvers import Functional, Instance, Mode, PowerParams, Variant, solve

CSV_FIELDS = ("functional", "variant", "d", "p", "sampler", "n", "trials", "mean", "stderr", "seed")
NOISE_SIGMAS = 3.0


# ------------------------------------------------------------ regimes


def regime(d: int, p: float) -> str:
    """'low' for 0<p<d-1, 'log' for p=d-1 != 1, 'const' otherwise."""
    if not 0 < p < d:
        raise UsageError(f"need 0 < p < d, got p={p}, d={d}")
    if abs(p - (d - 1)) < 1e-12:
        return "const" if abs(p - 1) < 1e-12 else "log"
    return "low" if p < d - 1 else "const"


def boundary_exponent(d: int, p: float) -> float:
    """Growth exponent of the boundary correction |EL - EL*| (log and constant cases give 0)."""
    return (d - 1 - p) / d if regime(d, p) == "low" else 0.0


def block_rate_exponent(d: int, p: float) -> float:
    """Exponent of n in the fixed-level block-density error bound (negative)."""
    return -1.0 / d if regime(d, p) == "low" else -(d - p) / d


def holder_rate_exponent(d: int, p: float, beta: float) -> float:
    """Exponent of n in the Hoelder-density error bound (negative)."""
    r = regime(d, p)
    e = (d - p) / d
    if r == "low":
        return -(beta * e) / ((beta * e + 1) * d)
    if r == "log":
        return -beta / (d * (beta + d))
    return -(beta * e) / (beta + d)


def holder_level(n: int, d: int, p: float, beta: float) -> int:
    """Block level m = n^(1 / (beta (d-p) + d)), rounded, at least 1."""
    return max(1, int(round(n ** (1.0 / (beta * (d - p) + d)))))


# ------------------------------------------------------------ templates


@dataclass(frozen=True)
class Template:
    """What to solve on each sample: functional, variant, power and sampler."""

    functional: str
    variant: str = "plain"
    d: int = 2
    p: float = 1.0
    sampler: str = "uniform"
    mode: str = "exact"
    boundary_factor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "functional", Functional(self.functional).value)
        object.__setattr__(self, "variant", Variant(self.variant).value)
        object.__setattr__(self, "mode", Mode(self.mode).value)
        if self.mode == Mode.BRUTE_ORACLE.value:
            raise UsageError("Monte Carlo runs need exact or heuristic mode")
        if int(self.d) != self.d or self.d < 1:
            raise UsageError("dimension must be a positive integer")
        if not self.p > 0:
            raise UsageError("power p must be positive")

    @property
    def sampler_obj(self) -> Sampler:
        return parse_sampler(self.sampler, self.d)

    def with_(self, **kw) -> Template:
        args = {k: getattr(self, k) for k in ("functional", "variant", "d", "p", "sampler", "mode", "boundary_factor")}
        args.update(kw)
        return Template(**args)

    def solution(self, ps: PointSet):
        inst = Instance(
            ps,
            Box.unit(self.d),
            PowerParams(self.p, self.d),
            Functional(self.functional),
            Variant(self.variant),
            Mode(self.mode),
            self.boundary_factor,
        )
        return solve(inst)

    def value(self, ps: PointSet) -> float:
        return self.solution(ps).value


def _seed(seed) -> SeedSpec:
    return seed if isinstance(seed, SeedSpec) else SeedSpec(seed)


def _run(fn: Callable[[int], object], trials: int, threads: int = 1) -> list:
    """fn(t) for t in range(trials), results in trial order."""
    if threads is None or threads <= 1 or trials <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, range(trials)))


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Compensated mean and sample-std / sqrt(T), summed in the given order."""
    v = [float(x) for x in values]
    t = len(v)
    if t == 0:
        raise UsageError("no values")
    mean = math.fsum(v) / t
    if t < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in v) / (t - 1)
    return mean, math.sqrt(var / t)


# ------------------------------------------------------------ estimates


@dataclass
class Estimate:
    functional: str
    variant: str
    d: int
    p: float
    sampler: str
    n: int
    trials: int
    mean: float
    stderr: float
    seed: int
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def row(self) -> dict:
        return {
            "functional": self.functional,
            "variant": self.variant,
            "d": str(self.d),
            "p": repr(float(self.p)),
            "sampler": self.sampler,
            "n": str(self.n),
            "trials": str(self.trials),
            "mean": repr(float(self.mean)),
            "stderr": repr(float(self.stderr)),
            "seed": str(self.seed),
        }

    @classmethod
    def from_row(cls, row: dict) -> Estimate:
        try:
            return cls(
                row["functional"],
                row["variant"],
                int(row["d"]),
                float(row["p"]),
                row["sampler"],
                int(row["n"]),
                int(row["trials"]),
                float(row["mean"]),
                float(row["stderr"]),
                int(row["seed"]),
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad estimate row {row}: {exc}") from exc


def trial_points(sampler: Sampler, n: int, seed: SeedSpec, t: int) -> PointSet:
    return sampler.draw(n, seed.stream(n, t), seed.stream(n, t, 1))


def mc_mean(template: Template, n: int, trials: int, seed, threads: int = 1) -> Estimate:
    """Mean and stderr of the functional over ``trials`` independent samples of size n."""
    if trials < 2:
        raise UsageError("need at least 2 trials")
    if n < 0:
        raise UsageError("n must be >= 0")
    ss = _seed(seed)
    sampler = template.sampler_obj

    def one(t):
        return template.value(trial_points(sampler, n, ss, t))

    try:
        vals = _run(one, trials, threads)
    except UsageError as exc:
        raise type(exc)(f"{template.functional} at n={n}: {exc}") from exc
    mean, se = mean_stderr(vals)
    return Estimate(template.functional, template.variant, template.d, template.p, sampler.name, n, trials, mean, se, ss.seed, np.array(vals))


def estimate_grid(template: Template, n_grid: Sequence[int], trials: int, seed, threads: int = 1) -> list[Estimate]:
    return [mc_mean(template, n, trials, seed, threads) for n in n_grid]


def format_csv(estimates: Sequence[Estimate]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for e in estimates:
        w.writerow(e.row())
    return buf.getvalue()


def atomic_write(path: str | Path, text: str) -> None:
    """Write to a temporary sibling then rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str | Path, estimates: Sequence[Estimate]) -> None:
    atomic_write(path, format_csv(estimates))


def read_csv(path: str | Path) -> list[Estimate]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_FIELDS:
            raise ConfigError(f"{path}: expected columns {','.join(CSV_FIELDS)}")
        return [Estimate.from_row(r) for r in reader]


# ------------------------------------------------------------ fits


@dataclass
class RateFit:
    model: str
    alpha_hat: float
    c_hat: float
    exponent_hat: float
    residual_rms: float
    n_grid: list[int]
    alpha_stderr: float = 0.0
    const_hat: float = 0.0
    exponent_stderr: float = 0.0
    status: str = "ok"
    used: list[int] = field(default_factory=list)
    excluded: list[int] = field(default_factory=list)

    def report(self) -> str:
        keys = ["model", "status", "alpha_hat", "alpha_stderr", "c_hat", "const_hat", "exponent_hat", "exponent_stderr", "residual_rms", "n_grid", "used", "excluded"]
        out = []
        for k in keys:
            v = getattr(self, k)
            out.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(out) + "\n"


def _series(estimates: Sequence[Estimate]):
    if len({(e.d, e.p) for e in estimates}) > 1:
        raise UsageError("estimates mix different (d, p)")
    ns = np.array([e.n for e in estimates], dtype=np.float64)
    if np.any(np.diff(ns) <= 0):
        raise ConfigError("n grid must be strictly increasing")
    y = np.array([e.mean for e in estimates])
    se = np.array([e.stderr for e in estimates])
    return ns, y, se


def fit_alpha(estimates: Sequence[Estimate], min_points: int = 4) -> RateFit:
    """Weighted least squares of mean_n on [n^((d-p)/d), regime correction, 1].

    The correction regressor is n^((d-1-p)/d) for 0<p<d-1 and log n for
    p=d-1 != 1; otherwise the model is alpha n^((d-p)/d) + c. Weights are
    stderr^-2; if any stderr is zero (noiseless input) all weights are 1.
    """
    if len(estimates) < min_points:
        raise ConfigError(f"need at least {min_points} grid points, got {len(estimates)}")
    d, p = estimates[0].d, estimates[0].p
    ns, y, se = _series(estimates)
    e = (d - p) / d
    r = regime(d, p)
    cols = [ns**e]
    if r == "low":
        cols.append(ns ** ((d - 1 - p) / d))
        model = "alpha_plus_correction"
    elif r == "log":
        cols.append(np.log(ns))
        model = "power_with_log"
    else:
        model = "pure_power"
    cols.append(np.ones_like(ns))
    X = np.column_stack(cols)
    w = np.ones_like(ns) if np.any(se <= 0) else se**-2.0
    sw = np.sqrt(w)
    A = X * sw[:, None]
    b = y * sw
    if np.linalg.matrix_rank(A) < A.shape[1] or np.linalg.cond(A) > 1e12:
        raise ConfigError("singular design: widen the n grid")
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    cov = np.linalg.inv(A.T @ A)
    resid = y - X @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    alpha = float(coef[0])
    c_hat = float(coef[1]) if len(coef) == 3 else float(coef[-1])
    const = float(coef[-1])
    return RateFit(model, alpha, c_hat, e, rms, [int(n) for n in ns], float(np.sqrt(cov[0, 0])), const, used=[int(n) for n in ns])


@dataclass
class SlopeFit:
    slope: float
    slope_stderr: float
    used: list[int]
    excluded: list[int]
    status: str


def log_slope(ns, vals, ses, sigmas: float = NOISE_SIGMAS, min_points: int = 3) -> SlopeFit:
    """OLS slope of log|val| on log n over points resolved beyond ``sigmas`` stderr."""
    ns = np.asarray(ns, dtype=np.float64)
    vals = np.asarray(vals, dtype=np.float64)
    ses = np.asarray(ses, dtype=np.float64)
    keep = np.abs(vals) > sigmas * ses
    keep &= np.abs(vals) > 0
    used = [int(n) for n in ns[keep]]
    excluded = [int(n) for n in ns[~keep]]
    if keep.sum() < min_points:
        return SlopeFit(math.nan, math.nan, used, excluded, "inconclusive")
    x = np.log(ns[keep])
    yv = np.log(np.abs(vals[keep]))
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, yv, rcond=None)
    res = yv - X @ coef
    dof = len(x) - 2
    if dof > 0:
        s2 = float(res @ res) / dof
        se = math.sqrt(s2 * np.linalg.inv(X.T @ X)[0, 0])
    else:
        se = 0.0
    return SlopeFit(float(coef[0]), se, used, excluded, "ok")


def residual_rate(estimates: Sequence[Estimate], alpha_hat: float, alpha_stderr: float = 0.0) -> RateFit:
    """Slope of log|mean_n - alpha_hat n^((d-p)/d)| against log n.

    Residuals within 3 combined stderr of zero (sample stderr and the
    alpha_hat uncertainty scaled by n^((d-p)/d)) are treated as noise and
    excluded; fewer than 3 usable points makes the fit inconclusive.
    """
    d, p = estimates[0].d, estimates[0].p
    ns, y, se = _series(estimates)
    e = (d - p) / d
    resid = y - alpha_hat * ns**e
    comb = np.sqrt(se**2 + (alpha_stderr * ns**e) ** 2)
    sf = log_slope(ns, resid, comb)
    rms = float(np.sqrt(np.mean(resid**2)))
    return RateFit(
        "residual",
        float(alpha_hat),
        float(resid[-1]),
        sf.slope,
        rms,
        [int(n) for n in ns],
        float(alpha_stderr),
        status=sf.status,
        exponent_stderr=sf.slope_stderr,
        used=sf.used,
        excluded=sf.excluded,
    )


# ------------------------------------------------------------ gap series


@dataclass
class GapPoint:
    n: int
    mean: float
    stderr: float
    k: int = 0
    extra: dict = field(default_factory=dict)


@dataclass
class GapSeries:
    name: str
    functional: str
    variant: str
    d: int
    p: float
    points: list[GapPoint]
    meta: dict = field(default_factory=dict)

    @property
    def ns(self) -> list[int]:
        return [g.n for g in self.points]

    @property
    def means(self) -> np.ndarray:
        return np.array([g.mean for g in self.points])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([g.stderr for g in self.points])

    def slope(self, sigmas: float = NOISE_SIGMAS) -> SlopeFit:
        return log_slope(self.ns, self.means, self.stderrs, sigmas)

    def upper_slope(self, z: float = 2.0) -> SlopeFit:
        """Slope of the upper envelope |mean| + z stderr, always resolvable."""
        ub = np.abs(self.means) + z * self.stderrs
        return log_slope(self.ns, ub, np.zeros_like(ub), 0.0)

    def table(self) -> str:
        lines = [f"# {self.name} {self.functional}{'*' if self.variant == 'dual' else ''} d={self.d} p={self.p:g}"]
        extra_keys = sorted({k for g in self.points for k in g.extra})
        lines.append(" ".join(["n", "k", "mean", "stderr"] + extra_keys))
        for g in self.points:
            vals = [str(g.n), str(g.k), repr(g.mean), repr(g.stderr)] + [repr(g.extra.get(k)) for k in extra_keys]
            lines.append(" ".join(vals))
        return "\n".join(lines) + "\n"


def _gap_point(n, vals, k=0, **extra) -> GapPoint:
    mean, se = mean_stderr(vals)
    return GapPoint(n, mean, se, k, extra)


def closeness_gap(template: Template, n_grid: Sequence[int], trials: int, seed, threads: int = 1) -> GapSeries:
    """Paired E[L - L*] on identical samples, one point per n."""
    ss = _seed(seed)
    plain = template.with_(variant="plain")
    dual = template.with_(variant="dual")
    sampler = template.sampler_obj
    pts = []
    for n in n_grid:

        def one(t, n=n):
            ps = trial_points(sampler, n, ss, t)
            return plain.value(ps) - dual.value(ps)

        vals = _run(one, trials, threads)
        pts.append(_gap_point(n, vals, min_gap=float(min(vals))))
    return GapSeries("closeness", template.functional, "dual", template.d, template.p, pts)


def boundary_growth(template: Template, n_grid: Sequence[int], trials: int, seed, threads: int = 1) -> tuple[GapSeries, GapSeries]:
    """(E N_B / n^((d-1)/d), E L_B) per n from the optimal dual structures."""
    ss = _seed(seed)
    dual = template.with_(variant="dual")
    sampler = template.sampler_obj
    d = template.d
    nb_pts, lb_pts = [], []
    for n in n_grid:

        def one(t, n=n):
            sol = dual.solution(trial_points(sampler, n, ss, t))
            return sol.n_boundary, sol.boundary_cost

        res = _run(one, trials, threads)
        scale = n ** ((d - 1) / d)
        nb_pts.append(_gap_point(n, [r[0] / scale for r in res]))
        lb_pts.append(_gap_point(n, [r[1] for r in res]))
    meta = {"lb_bound_exponent": boundary_exponent(d, template.p)}
    return (
        GapSeries("N_B/n^((d-1)/d)", template.functional, "dual", d, template.p, nb_pts),
        GapSeries("L_B", template.functional, "dual", d, template.p, lb_pts, meta),
    )


def _prefix_values(template: Template, x: np.ndarray, sizes: Sequence[int]) -> dict[int, float]:
    d = template.d
    return {m: template.value(PointSet(x[:m], dim=d)) for m in sorted(set(sizes))}


def perturbation_gaps(template: Template, n: int, k_list: Sequence[int], trials: int, seed, threads: int = 1) -> GapSeries:
    """Paired L(U_{n+k}) - L(U_n) and L(U_{n-k}) - L(U_n) for each k.

    U_{n+k} extends the n-point stream and U_{n-k} is its prefix. Rows use
    k > 0 for n + k and k < 0 for n - k; k = 0 is identically zero.
    """
    if template.sampler_obj.kind == "poisson":
        raise UsageError("perturbation gaps need a fixed-size sampler")
    ks = sorted({int(k) for k in k_list})
    if any(k < 0 or k > n // 2 for k in ks):
        raise UsageError("k must lie in [0, n/2]")
    ss = _seed(seed)
    sampler = template.sampler_obj
    kmax = max(ks) if ks else 0
    sizes = {n} | {n + k for k in ks} | {n - k for k in ks}

    def one(t):
        x = sampler.draw(n + kmax, ss.stream(n, t)).coords
        v = _prefix_values(template, x, sizes)
        return v

    res = _run(one, trials, threads)
    pts = []
    for k in ks:
        pts.append(_gap_point(n, [r[n + k] - r[n] for r in res], k))
        if k:
            pts.append(_gap_point(n, [r[n - k] - r[n] for r in res], -k))
    return GapSeries("k-diff", template.functional, template.variant, template.d, template.p, pts)


def add_one_series(template: Template, n_grid: Sequence[int], trials: int, seed, threads: int = 1) -> GapSeries:
    """Paired E[L(U_{n+1}) - L(U_n)] across n."""
    pts = []
    for n in n_grid:
        series = perturbation_gaps(template, n, [1], trials, seed, threads)
        pts.extend(g for g in series.points if g.k == 1)
    return GapSeries("add-one", template.functional, template.variant, template.d, template.p, pts)


def poissonization_gap(template: Template, n_grid: Sequence[int], trials: int, seed, threads: int = 1) -> GapSeries:
    """Paired E[L(U_N) - L(U_n)] with N ~ Poisson(n) independent of the points.

    U_N truncates or extends the n-point stream. N - n has known mean zero,
    so it serves as a control variate: the reported mean is
    mean(gap) - b * mean(N - n) with b the least-squares slope of gap on
    N - n, and the stderr comes from the regression residuals.
    """
    ss = _seed(seed)
    sampler = template.with_(sampler="uniform").sampler_obj
    pts = []
    for n in n_grid:

        def one(t, n=n):
            count = int(ss.stream(n, t, 1).poisson(n))
            x = sampler.draw(max(n, count), ss.stream(n, t)).coords
            v = _prefix_values(template, x, [n, count])
            return v[count] - v[n], count - n

        res = _run(one, trials, threads)
        g = np.array([r[0] for r in res])
        z = np.array([r[1] for r in res], dtype=np.float64)
        raw_mean, raw_se = mean_stderr(g)
        zc = z - math.fsum(z) / len(z)
        szz = math.fsum(zc * zc)
        b = math.fsum(zc * (g - raw_mean)) / szz if szz > 0 else 0.0
        adj = g - b * z
        mean, _ = mean_stderr(adj)
        resid = adj - mean
        dof = max(len(g) - 2, 1)
        se = math.sqrt(math.fsum(resid * resid) / dof / len(g))
        pts.append(GapPoint(n, mean, se, 0, {"raw_mean": raw_mean, "raw_stderr": raw_se, "cv_slope": b}))
    return GapSeries("poissonization", template.functional, template.variant, template.d, template.p, pts)


# ------------------------------------------------------------ non-uniform


@dataclass
class NonuniformReport:
    functional: str
    d: int
    p: float
    density: str
    target: float
    alpha_hat: float
    alpha_stderr: float
    series: GapSeries
    fit: SlopeFit
    bound_exponent: float
    allowance: float = 0.1

    @property
    def status(self) -> str:
        if self.fit.status != "ok":
            return "inconclusive"
        return "pass" if self.fit.slope <= self.bound_exponent + self.allowance else "fail"

    def report(self) -> str:
        lines = [
            f"density = {self.density}",
            f"target = {self.target!r}",
            f"alpha_hat = {self.alpha_hat!r} +- {self.alpha_stderr!r}",
            f"bound_exponent = {self.bound_exponent!r}",
            f"slope = {self.fit.slope!r} +- {self.fit.slope_stderr!r}",
            f"used = {self.fit.used} excluded = {self.fit.excluded}",
            f"status = {self.status}",
        ]
        return "\n".join(lines) + "\n" + self.series.table()


def nonuniform_experiment(
    template: Template,
    density: BlockDensity | HolderDensity,
    n_grid: Sequence[int],
    trials: int,
    seed,
    alpha_hat: float,
    alpha_stderr: float = 0.0,
    threads: int = 1,
    sigmas: float = 2.0,
) -> NonuniformReport:
    """Gap |E L / n^((d-p)/d) - alpha_hat * int density^((d-p)/d)| per n.

    Block densities follow the fixed-level bound; Hoelder densities the
    smoothness-dependent one, with the level m = n^(1/(beta(d-p)+d)) and its
    block approximation reported per n as diagnostics.
    """
    d, p = template.d, template.p
    q = (d - p) / d
    if isinstance(density, BlockDensity):
        sampler = Sampler("block", d, density, label=f"block(m={density.m})")
        bound = block_rate_exponent(d, p)
    elif isinstance(density, AffineDensity):
        sampler = Sampler("holder", d, density, label=f"holder(a={density.a:g})")
        bound = holder_rate_exponent(d, p, density.beta)
    else:
        raise UsageError("density must be a BlockDensity or the built-in Hoelder family")
    if density.d != d:
        raise UsageError("density dimension differs from the template")
    integral = density_power_integral(density, q)
    target = alpha_hat * integral
    ss = _seed(seed)
    plain = template.with_(variant="plain")
    pts = []
    for n in n_grid:

        def one(t, n=n):
            return plain.value(trial_points(sampler, n, ss, t))

        vals = _run(one, trials, threads)
        mean, se = mean_stderr(vals)
        scaled = mean / n**q
        gap = scaled - target
        gse = math.sqrt((se / n**q) ** 2 + (alpha_stderr * integral) ** 2)
        extra = {"scaled_mean": scaled}
        if isinstance(density, AffineDensity):
            m = holder_level(n, d, p, density.beta)
            extra.update(m=m, block_l1_gap=l1_gap(density, approximate_block(density, m)))
        pts.append(GapPoint(n, gap, gse, 0, extra))
    series = GapSeries("density-gap", template.functional, "plain", d, p, pts, {"target": target})
    fit = series.slope(sigmas)
    return NonuniformReport(template.functional, d, p, sampler.name, target, alpha_hat, alpha_stderr, series, fit, bound)
