"""
Continuous Type Model for Veritest
Handles type distributions, authentication rates, testing precision and virtual values
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad, trapezoid
from scipy.interpolate import RegularGridInterpolator

import config
from authentication import FiniteAuthRate
from errors import NegativePrecision, QuadratureError

logger = logging.getLogger(__name__)

# Break points placed at anchor ± c/λmax so quad sees the kernel's boundary layer
SPIKE_OFFSETS = (1.0, 10.0, 40.0)

INTEGRABILITY_CAVEAT = (
    "integrability of the diagonal derivatives is only checked for boundedness on the grid")


def _piecewise_linear_integral(points, values, cumulative, x):
    """∫_{points[0]}^x of the linear interpolant of values, exactly."""
    x = np.asarray(x, dtype=float)
    k = np.clip(np.searchsorted(points, x, side="right") - 1, 0, points.size - 2)
    dx = x - points[k]
    slope = (values[k + 1] - values[k]) / (points[k + 1] - points[k])
    return cumulative[k] + values[k] * dx + 0.5 * slope * dx * dx


def _scalar_or_array(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


class TypeDistribution:
    """Distribution F with density f > 0 on [lo, hi]; lo == hi is a point mass."""

    def __init__(self, lo, hi, cdf, pdf, name="custom", breakpoints=(), params=None,
                 validate=True):
        self.lo = float(lo)
        self.hi = float(hi)
        if self.hi < self.lo:
            raise ValueError(f"type interval [{lo}, {hi}] is empty")
        self._cdf = cdf
        self._pdf = pdf
        self.name = name
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.params = dict(params or {})
        if validate:
            self.validate()

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0):
        lo, hi = float(lo), float(hi)
        if hi <= lo:
            raise ValueError("uniform distribution needs lo < hi")
        width = hi - lo

        def cdf(x):
            return np.clip((np.asarray(x, dtype=float) - lo) / width, 0.0, 1.0)

        def pdf(x):
            return np.full(np.shape(x), 1.0 / width)

        return cls(lo, hi, cdf, pdf, name="uniform", params={"lo": lo, "hi": hi})

    @classmethod
    def truncated_exponential(cls, rate=1.0, lo=0.0, hi=1.0):
        rate, lo, hi = float(rate), float(lo), float(hi)
        if rate <= 0.0:
            raise ValueError("truncated exponential needs a positive rate")
        if hi <= lo:
            raise ValueError("truncated exponential needs lo < hi")
        norm = -np.expm1(-rate * (hi - lo))

        def cdf(x):
            x = np.clip(np.asarray(x, dtype=float), lo, hi)
            return -np.expm1(-rate * (x - lo)) / norm

        def pdf(x):
            return rate * np.exp(-rate * (np.asarray(x, dtype=float) - lo)) / norm

        return cls(lo, hi, cdf, pdf, name="truncated_exponential",
                   params={"rate": rate, "lo": lo, "hi": hi})

    @classmethod
    def tabulated(cls, points, density):
        """Piecewise-linear density through (points, density), normalized."""
        x = np.asarray(points, dtype=float)
        d = np.asarray(density, dtype=float)
        if x.ndim != 1 or x.size < 2 or x.shape != d.shape:
            raise ValueError("tabulated density needs matching 1-D points and values")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("tabulated density points must be strictly increasing")
        if np.any(d <= 0.0):
            raise ValueError("tabulated density must be strictly positive")
        d = d / trapezoid(d, x)
        cumulative = cumulative_trapezoid(d, x, initial=0.0)

        def cdf(z):
            z = np.clip(np.asarray(z, dtype=float), x[0], x[-1])
            return np.minimum(_piecewise_linear_integral(x, d, cumulative, z), 1.0)

        def pdf(z):
            return np.interp(z, x, d)

        return cls(x[0], x[-1], cdf, pdf, name="tabulated", breakpoints=x[1:-1],
                   params={"points": x.tolist(), "density": d.tolist()})

    @classmethod
    def point(cls, value):
        value = float(value)

        def cdf(x):
            return (np.asarray(x, dtype=float) >= value).astype(float)

        def pdf(x):
            return np.ones(np.shape(x))

        return cls(value, value, cdf, pdf, name="point", params={"value": value})

    @property
    def is_point(self):
        return self.lo == self.hi

    def cdf(self, x):
        return _scalar_or_array(self._cdf(x))

    def pdf(self, x):
        return _scalar_or_array(self._pdf(x))

    def grid(self, n):
        if self.is_point:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, int(n))

    def validate(self):
        """F(lo) = 0, F(hi) = 1, f > 0 and F' ≈ f on a sample grid."""
        if self.is_point:
            return
        grid = self.grid(config.VIRTUAL_VALUE_GRID_N)
        if abs(self.cdf(self.lo)) > 1e-9 or abs(self.cdf(self.hi) - 1.0) > 1e-9:
            raise ValueError(f"{self.name} distribution must have F(lo) = 0 and F(hi) = 1")
        density = np.asarray(self.pdf(grid), dtype=float)
        if np.any(density <= 0.0):
            raise ValueError(f"{self.name} density must be strictly positive")
        h = 1e-5 * (self.hi - self.lo)
        inner = grid[1:-1]
        # f may kink at a breakpoint; a difference straddling it is not F'
        smooth = np.ones(inner.size, dtype=bool)
        for b in self.breakpoints:
            smooth &= np.abs(inner - b) > 2.0 * h
        inner = inner[smooth]
        slope = (np.asarray(self.cdf(inner + h)) - np.asarray(self.cdf(inner - h))) / (2.0 * h)
        rel = np.abs(slope - density[1:-1][smooth]) / density[1:-1][smooth]
        if rel.size and rel.max() > config.DENSITY_CHECK_RTOL:
            raise ValueError(
                f"{self.name} density disagrees with its CDF (relative error {rel.max():.3g})")

    def to_record(self):
        return {"distribution": self.name, "lo": self.lo, "hi": self.hi, **self.params}


class PrecisionFunction:
    """Nonnegative λ(θ) on [lo, hi], stored piecewise linearly with its running integral."""

    def __init__(self, lo, hi, points, values):
        self.lo, self.hi = float(lo), float(hi)
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.points.shape != self.values.shape or self.points.ndim != 1:
            raise ValueError("precision table needs matching 1-D points and values")
        if np.any(np.diff(self.points) <= 0.0):
            raise ValueError("precision table points must be strictly increasing")
        if np.any(self.values < 0.0):
            raise NegativePrecision("precision must be nonnegative")
        if self.points.size > 1:
            self._cumulative = cumulative_trapezoid(self.values, self.points, initial=0.0)
        else:
            self._cumulative = np.zeros(1)

    @classmethod
    def constant(cls, lam, lo, hi):
        points = [lo] if lo == hi else [lo, hi]
        return cls(lo, hi, points, [float(lam)] * len(points))

    @classmethod
    def from_callable(cls, func, lo, hi, n=config.KERNEL_TABLE_POINTS):
        points = np.array([lo]) if lo == hi else np.linspace(lo, hi, n)
        try:
            values = np.broadcast_to(np.asarray(func(points), dtype=float), points.shape)
        except (TypeError, ValueError):
            values = np.array([float(func(x)) for x in points])
        return cls(lo, hi, points, np.array(values))

    @classmethod
    def build(cls, value, lo, hi):
        """From a constant, a callable or a (points, values) table."""
        if isinstance(value, PrecisionFunction):
            return value
        if callable(value):
            return cls.from_callable(value, lo, hi)
        if isinstance(value, (tuple, list)) and len(value) == 2 and np.ndim(value[0]) == 1:
            return cls(lo, hi, value[0], value[1])
        return cls.constant(float(value), lo, hi)

    @property
    def max(self):
        return float(self.values.max())

    def __call__(self, x):
        if self.points.size == 1:
            return _scalar_or_array(np.full(np.shape(x), self.values[0]))
        return _scalar_or_array(np.interp(x, self.points, self.values))

    def integral(self, x):
        """L(x) = ∫_lo^x λ."""
        if self.points.size == 1:
            return np.zeros(np.shape(x))
        return _piecewise_linear_integral(self.points, self.values, self._cumulative, x)

    def scaled(self, s):
        return PrecisionFunction(self.lo, self.hi, self.points, float(s) * self.values)


class PrecisionKernel:
    """Two-sided discount kernel Λ(θ'|θ) built from λ_plus and λ_minus.

    Λ(θ'|θ) = exp(-∫_θ'^θ λ_plus) for θ' <= θ and exp(-∫_θ^θ' λ_minus) above.
    """

    def __init__(self, lo, hi, lambda_plus, lambda_minus=None):
        self.lo, self.hi = float(lo), float(hi)
        self.plus = PrecisionFunction.build(lambda_plus, self.lo, self.hi)
        self.minus = (self.plus if lambda_minus is None
                      else PrecisionFunction.build(lambda_minus, self.lo, self.hi))

    @classmethod
    def constant(cls, lam, lo=0.0, hi=1.0):
        return cls(lo, hi, PrecisionFunction.constant(lam, float(lo), float(hi)))

    @property
    def lambda_max(self):
        return max(self.plus.max, self.minus.max)

    def lambda_plus(self, theta):
        return self.plus(theta)

    def lambda_minus(self, theta):
        return self.minus(theta)

    def Lambda(self, report, true_type):
        r, t = np.broadcast_arrays(np.asarray(report, dtype=float),
                                   np.asarray(true_type, dtype=float))
        below = np.exp(-np.maximum(self.plus.integral(t) - self.plus.integral(r), 0.0))
        above = np.exp(-np.maximum(self.minus.integral(r) - self.minus.integral(t), 0.0))
        return _scalar_or_array(np.where(t >= r, below, above))

    def matrix(self, reports, types):
        """Λ[i, j] = Λ(reports[i] | types[j])."""
        reports = np.asarray(reports, dtype=float)
        types = np.asarray(types, dtype=float)
        return np.asarray(self.Lambda(reports[:, None], types[None, :]))

    def scaled(self, s):
        return PrecisionKernel(self.lo, self.hi, self.plus.scaled(s), self.minus.scaled(s))

    def as_alpha(self):
        """The exponential authentication rate with this kernel, α = Λ."""
        return ContinuousAuthRate(self.lo, self.hi, self.Lambda, lambda_plus=self.plus,
                                  lambda_minus=self.minus, name="exponential")


class ContinuousAuthRate:
    """α(report | true type) on [lo, hi]² with α(θ|θ) = 1."""

    def __init__(self, lo, hi, func, lambda_plus=None, lambda_minus=None, name="custom",
                 params=None):
        self.lo, self.hi = float(lo), float(hi)
        self._func = func
        self.name = name
        self.params = dict(params or {})
        self.lambda_plus = (None if lambda_plus is None
                            else PrecisionFunction.build(lambda_plus, self.lo, self.hi))
        if lambda_minus is None:
            self.lambda_minus = self.lambda_plus
        else:
            self.lambda_minus = PrecisionFunction.build(lambda_minus, self.lo, self.hi)

    @classmethod
    def exponential(cls, lam, lo=0.0, hi=1.0):
        """α(θ'|θ) = exp(-|∫_θ'^θ λ|) for a constant, callable or tabulated λ."""
        precision = PrecisionFunction.build(lam, float(lo), float(hi))

        def func(report, true_type):
            return np.exp(-np.abs(precision.integral(true_type) - precision.integral(report)))

        params = {"lambda": lam} if np.isscalar(lam) else {}
        return cls(lo, hi, func, lambda_plus=precision, name="exponential", params=params)

    @classmethod
    def power(cls, sigma, lo=0.0, hi=1.0):
        """α(θ'|θ) = 1 - |θ' - θ|^σ, clipped at 0."""
        sigma = float(sigma)
        if sigma < 1.0:
            raise ValueError("power authentication rates need sigma >= 1")

        def func(report, true_type):
            return 1.0 - np.abs(np.asarray(report) - np.asarray(true_type)) ** sigma

        lam = 1.0 if sigma == 1.0 else 0.0
        return cls(lo, hi, func, lambda_plus=lam, name="power", params={"sigma": sigma})

    @classmethod
    def tabulated(cls, points, table):
        """Bilinear interpolation of table[i, j] = α(points[i] | points[j])."""
        x = np.asarray(points, dtype=float)
        values = np.asarray(table, dtype=float)
        if values.shape != (x.size, x.size):
            raise ValueError("alpha table must be square over its points")
        if np.any(values < -config.ALGEBRA_TOL) or np.any(values > 1.0 + config.ALGEBRA_TOL):
            raise ValueError("authentication rates must lie in [0, 1]")
        interpolator = RegularGridInterpolator((x, x), values, method="linear",
                                               bounds_error=False, fill_value=None)

        def func(report, true_type):
            r, t = np.broadcast_arrays(np.asarray(report, dtype=float),
                                       np.asarray(true_type, dtype=float))
            pts = np.stack([r.ravel(), t.ravel()], axis=-1)
            return interpolator(pts).reshape(r.shape)

        # bilinear cells cut the diagonal, so precision comes from node secants
        step = np.diff(x)
        plus = (1.0 - np.diag(values, 1)) / step
        minus = (1.0 - np.diag(values, -1)) / step
        plus = np.append(plus, plus[-1])
        minus = np.insert(minus, 0, minus[0])
        return cls(x[0], x[-1], func, lambda_plus=(x, np.maximum(plus, 0.0)),
                   lambda_minus=(x, np.maximum(minus, 0.0)), name="tabulated")

    def __call__(self, report, true_type):
        r, t = np.broadcast_arrays(np.asarray(report, dtype=float),
                                   np.asarray(true_type, dtype=float))
        values = np.clip(np.asarray(self._func(r, t), dtype=float), 0.0, 1.0)
        return _scalar_or_array(np.where(r == t, 1.0, values))

    def matrix(self, reports, types):
        """α[i, j] = α(reports[i] | types[j])."""
        reports = np.asarray(reports, dtype=float)
        types = np.asarray(types, dtype=float)
        return np.asarray(self(reports[:, None], types[None, :]))

    def to_finite(self, grid):
        grid = np.asarray(grid, dtype=float)
        return FiniteAuthRate(tuple(f"{x:.12g}" for x in grid), self.matrix(grid, grid))


def precision_from_alpha(a, points=config.KERNEL_TABLE_POINTS):
    """λ± from analytic derivatives when the rate has them, else finite differences."""
    if a.lambda_plus is not None:
        return PrecisionKernel(a.lo, a.hi, a.lambda_plus, a.lambda_minus)
    if a.lo == a.hi:
        return PrecisionKernel.constant(0.0, a.lo, a.hi)
    grid = np.linspace(a.lo, a.hi, points)
    plus = _one_sided_precision(a, grid, +1)
    minus = _one_sided_precision(a, grid, -1)
    return PrecisionKernel(a.lo, a.hi, PrecisionFunction(a.lo, a.hi, grid, plus),
                           PrecisionFunction(a.lo, a.hi, grid, minus))


def _one_sided_precision(a, grid, side):
    """(1 - α(θ|θ ± h)) / h with one Richardson step, shifted inside [lo, hi]."""
    h = config.FD_STEP
    if side > 0:
        x = np.minimum(grid, a.hi - h)
    else:
        x = np.maximum(grid, a.lo + h)
    coarse = (1.0 - a(x, x + side * h)) / h
    fine = (1.0 - a(x, x + side * 0.5 * h)) / (0.5 * h)
    values = 2.0 * fine - coarse
    worst = float(values.min())
    if worst < -config.NEGATIVE_PRECISION_TOL:
        where = "right" if side > 0 else "left"
        raise NegativePrecision(
            f"alpha increases to the {where} of the diagonal (precision {worst:.3g})")
    return np.maximum(values, 0.0)


def spike_points(anchor, end, lam_max, extra=()):
    """Interior break points for quad near a kernel boundary layer at `anchor`."""
    lo, hi = min(anchor, end), max(anchor, end)
    points = set()
    if lam_max > 0.0 and np.isfinite(lam_max):
        direction = 1.0 if end >= anchor else -1.0
        points.update(anchor + direction * c / lam_max for c in SPIKE_OFFSETS)
    points.update(float(p) for p in extra)
    return sorted(p for p in points if lo < p < hi)


def integrate(func, a, b, points=()):
    """quad with the configured tolerances; raises QuadratureError when it gives up."""
    if b <= a:
        return 0.0
    inner = [p for p in points if a < p < b]
    result = quad(func, a, b, epsabs=config.QUAD_EPSABS, epsrel=config.QUAD_EPSREL,
                  limit=config.QUAD_LIMIT, points=inner or None, full_output=1)
    value, error = result[0], result[1]
    if len(result) > 3:
        if error <= config.QUAD_ACCEPT_ERR:
            logger.warning("quadrature on [%g, %g] accepted with error %.3g: %s",
                           a, b, error, result[3])
        else:
            raise QuadratureError(f"quadrature on [{a}, {b}] failed: {result[3]}")
    return value


def virtual_value(dist, kernel, theta):
    """φ(θ) = θ - (1/f(θ)) ∫_θ^hi Λ(θ|z) f(z) dz."""
    theta = float(theta)
    if theta < dist.lo - config.ALGEBRA_TOL or theta > dist.hi + config.ALGEBRA_TOL:
        raise ValueError(f"type {theta} outside [{dist.lo}, {dist.hi}]")
    if dist.is_point or theta >= dist.hi:
        return theta
    density = float(dist.pdf(theta))

    def integrand(z):
        return float(kernel.Lambda(theta, z)) * float(dist.pdf(z))

    points = spike_points(theta, dist.hi, kernel.lambda_max, dist.breakpoints)
    mass = integrate(integrand, theta, dist.hi, points)
    logger.debug("virtual value at %g: tail mass %.12g", theta, mass)
    return theta - mass / density


def myerson_virtual_value(dist, theta):
    """φ^M(θ) = θ - (1 - F(θ)) / f(θ)."""
    if dist.is_point:
        return _scalar_or_array(theta)
    theta = np.asarray(theta, dtype=float)
    return _scalar_or_array(theta - (1.0 - dist.cdf(theta)) / dist.pdf(theta))


def virtual_value_curve(dist, kernel, grid=None, threads=1):
    if grid is None:
        grid = dist.grid(config.VIRTUAL_VALUE_GRID_N)
    grid = np.asarray(grid, dtype=float)
    values = _map(lambda theta: virtual_value(dist, kernel, theta), grid, threads)
    return np.array(values, dtype=float)


@dataclass(frozen=True)
class BoundsReport:
    """Sampled lower/upper bound diagnostics for an authentication rate."""

    grid_size: int
    lower_bound_violation: float
    lower_bound_pair: tuple
    upper_bound_violation: float = None
    upper_bound_pair: tuple = None
    myerson_gap_violation: float = None
    efficient_gap_violation: float = None
    max_lambda_plus: float = 0.0
    max_lambda_minus: float = 0.0
    caveat: str = INTEGRABILITY_CAVEAT

    def passes(self, tol=config.IC_TOL):
        if self.lower_bound_violation > config.BOUND_TOL:
            return False
        if self.upper_bound_violation is not None and self.upper_bound_violation > tol:
            return False
        gaps = (self.myerson_gap_violation, self.efficient_gap_violation)
        return all(g is None or g <= config.MONOTONE_TOL for g in gaps)

    def to_record(self):
        return {
            "grid_size": self.grid_size,
            "lower_bound_violation": self.lower_bound_violation,
            "lower_bound_pair": list(self.lower_bound_pair) if self.lower_bound_pair else None,
            "upper_bound_violation": self.upper_bound_violation,
            "upper_bound_pair": list(self.upper_bound_pair) if self.upper_bound_pair else None,
            "myerson_gap_violation": self.myerson_gap_violation,
            "efficient_gap_violation": self.efficient_gap_violation,
            "max_lambda_plus": self.max_lambda_plus,
            "max_lambda_minus": self.max_lambda_minus,
            "caveat": self.caveat,
        }


def check_bounds(dist, a, kernel, qstar=None, grid_n=config.BOUNDS_GRID_N,
                 virtual_values=True, threads=1):
    """Check α >= Λ and, given an allocation q*, α <= Λ A on a grid of (θ', θ) pairs.

    qstar may be a callable or a (grid, values) pair interpolated linearly.
    """
    grid = dist.grid(grid_n)
    alpha = a.matrix(grid, grid)
    discount = kernel.matrix(grid, grid)
    gap = discount - alpha
    j, i = np.unravel_index(np.argmax(gap), gap.shape)
    lower = max(float(gap[j, i]), 0.0)
    lower_pair = (float(grid[j]), float(grid[i])) if lower > 0.0 else None

    upper = upper_pair = None
    if qstar is not None:
        upper, upper_pair = _upper_bound_violation(grid, alpha, discount, kernel, _as_callable(qstar))

    myerson_gap = efficient_gap = None
    if virtual_values:
        phi = virtual_value_curve(dist, kernel, grid, threads)
        phi_m = np.asarray(myerson_virtual_value(dist, grid), dtype=float)
        myerson_gap = max(float(np.max(phi_m - phi)), 0.0)
        efficient_gap = max(float(np.max(phi - grid)), 0.0)

    report = BoundsReport(
        grid_size=int(grid.size),
        lower_bound_violation=lower,
        lower_bound_pair=lower_pair,
        upper_bound_violation=upper,
        upper_bound_pair=upper_pair,
        myerson_gap_violation=myerson_gap,
        efficient_gap_violation=efficient_gap,
        max_lambda_plus=float(np.max(kernel.lambda_plus(grid))),
        max_lambda_minus=float(np.max(kernel.lambda_minus(grid))),
    )
    logger.debug("bounds on %d points: lower %.3g, upper %s", grid.size, lower, upper)
    return report


def _as_callable(qstar):
    if callable(qstar):
        return qstar
    grid, values = qstar
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    return lambda z: np.interp(z, grid, values)


def _upper_bound_violation(grid, alpha, discount, kernel, q):
    """max over θ' <= θ of α(θ'|θ) - Λ(θ'|θ) A(θ'|θ)."""
    top = grid[-1]
    weight_top = np.asarray(kernel.Lambda(grid, top), dtype=float)
    q_grid = np.asarray(q(grid), dtype=float)
    running = np.zeros(grid.size)
    for k in range(1, grid.size):
        cell = integrate(lambda z: float(kernel.Lambda(z, top)) * float(q(z)),
                         grid[k - 1], grid[k],
                         spike_points(top, grid[k - 1], kernel.lambda_max))
        running[k] = running[k - 1] + cell

    numerator = running[None, :]
    denominator = running[:, None] + (grid[None, :] - grid[:, None]) * (weight_top * q_grid)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denominator > config.ALGEBRA_TOL, numerator / denominator, np.inf)
        bound = np.where(np.isinf(ratio), np.inf, discount * ratio)
    excess = np.where(grid[:, None] <= grid[None, :], alpha - bound, -np.inf)
    j, i = np.unravel_index(np.argmax(excess), excess.shape)
    worst = max(float(excess[j, i]), 0.0)
    return worst, ((float(grid[j]), float(grid[i])) if worst > 0.0 else None)


@dataclass(frozen=True)
class PrecisionSweep:
    """Virtual-value gaps as λ is scaled towards 0 and towards ∞."""

    rows: tuple

    @property
    def myerson_gap_shrinks(self):
        gaps = [row["gap_to_myerson"] for row in self.rows]
        return all(b >= a - config.MONOTONE_TOL for a, b in zip(gaps, gaps[1:]))

    @property
    def efficient_gap_shrinks(self):
        gaps = [row["gap_to_efficient"] for row in self.rows]
        return all(b <= a + config.MONOTONE_TOL for a, b in zip(gaps, gaps[1:]))

    def to_record(self):
        return {
            "rows": [dict(row) for row in self.rows],
            "myerson_gap_shrinks": self.myerson_gap_shrinks,
            "efficient_gap_shrinks": self.efficient_gap_shrinks,
        }


def precision_limit_check(dist, base_lambda=1.0, scales=None,
                          grid_n=config.VIRTUAL_VALUE_GRID_N, threads=1):
    """sup |φ_{sλ} - φ^M| and sup |φ_{sλ} - θ| along increasing scales s."""
    scales = sorted(config.PRECISION_SCALES if scales is None else scales)
    base = PrecisionKernel(dist.lo, dist.hi, base_lambda)
    grid = dist.grid(grid_n)
    phi_m = np.asarray(myerson_virtual_value(dist, grid), dtype=float)
    rows = []
    for s in scales:
        phi = virtual_value_curve(dist, base.scaled(s), grid, threads)
        rows.append({
            "scale": float(s),
            "gap_to_myerson": float(np.max(np.abs(phi - phi_m))),
            "gap_to_efficient": float(np.max(np.abs(phi - grid))),
        })
        logger.debug("precision scale %g: %s", s, rows[-1])
    return PrecisionSweep(tuple(rows))


def _map(func, items, threads):
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
