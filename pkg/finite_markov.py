"""
Finite Markov Algebra for Veritest
Handles score sets, measures and Markov transitions on ordered finite scores
"""
import logging
from dataclasses import dataclass

import numpy as np

import config
from errors import InvalidMeasure, ScoreSetMismatch, UnknownLabel

logger = logging.getLogger(__name__)

DISTRIBUTION = "distribution"
QUANTILE = "quantile"


@dataclass(frozen=True)
class ScoreSet:
    """Strictly increasing finite set of real scores."""

    scores: tuple

    def __post_init__(self):
        scores = tuple(float(s) for s in self.scores)
        if not scores:
            raise ValueError("score set must be nonempty")
        if any(b <= a for a, b in zip(scores, scores[1:])):
            raise ValueError(f"scores must be strictly increasing: {scores}")
        object.__setattr__(self, "scores", scores)

    @classmethod
    def binary(cls):
        """The pass/fail score set {0, 1}."""
        return cls((0.0, 1.0))

    @property
    def size(self):
        return len(self.scores)

    @property
    def is_binary(self):
        return self.scores == (0.0, 1.0)

    @property
    def bottom(self):
        return self.scores[0]

    @property
    def top(self):
        return self.scores[-1]

    def index(self, score):
        """Position of a score label."""
        try:
            return self.scores.index(float(score))
        except ValueError:
            raise UnknownLabel(f"score {score!r} not in {self.scores}") from None

    def __len__(self):
        return len(self.scores)

    def __iter__(self):
        return iter(self.scores)


@dataclass(frozen=True)
class Measure:
    """Probability measure on a ScoreSet."""

    scoreset: ScoreSet
    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != self.scoreset.size:
            raise InvalidMeasure(
                f"expected {self.scoreset.size} weights, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise InvalidMeasure(f"weights must be finite: {w}")
        if np.any(w < -config.ALGEBRA_TOL):
            raise InvalidMeasure(f"negative weight in {w}")
        total = w.sum()
        if abs(total - 1.0) > config.ALGEBRA_TOL:
            raise InvalidMeasure(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", tuple(float(x) for x in np.clip(w, 0.0, None)))

    @classmethod
    def point_mass(cls, scoreset, score):
        """Dirac measure at a score."""
        w = np.zeros(scoreset.size)
        w[scoreset.index(score)] = 1.0
        return cls(scoreset, w)

    @classmethod
    def binary(cls, pass_rate):
        """Pass/fail measure with the given passage probability."""
        p = float(pass_rate)
        if not -config.ALGEBRA_TOL <= p <= 1.0 + config.ALGEBRA_TOL:
            raise InvalidMeasure(f"passage rate {p} outside [0, 1]")
        p = min(max(p, 0.0), 1.0)
        return cls(ScoreSet.binary(), (1.0 - p, p))

    @property
    def array(self):
        return np.array(self.weights)

    @property
    def pass_rate(self):
        """Mass on the top score (the passage probability on {0, 1})."""
        return self.weights[-1]

    def cdf(self):
        """F(s) at every score, with the last value pinned to 1."""
        c = np.cumsum(self.weights)
        c = np.minimum(np.maximum.accumulate(c), 1.0)
        c[-1] = 1.0
        return c

    def left_cdf(self):
        """F(s-) at every score."""
        return np.concatenate(([0.0], self.cdf()[:-1]))

    def mass(self, score):
        return self.weights[self.scoreset.index(score)]

    def mean(self):
        return float(np.dot(self.weights, self.scoreset.scores))

    def isclose(self, other, tol=config.ALGEBRA_TOL):
        _require_same(self.scoreset, other.scoreset)
        return bool(np.all(np.abs(self.array - other.array) <= tol))


@dataclass(frozen=True)
class Transition:
    """Markov transition between finite score sets, one row per source score."""

    source: ScoreSet
    target: ScoreSet
    rows: tuple

    def __post_init__(self):
        rows = tuple(self.rows)
        if len(rows) != self.source.size:
            raise ValueError(
                f"transition needs {self.source.size} rows, got {len(rows)}")
        for row in rows:
            if not isinstance(row, Measure):
                raise TypeError("transition rows must be Measure objects")
            _require_same(row.scoreset, self.target)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_matrix(cls, source, target, matrix):
        """Build a transition from a row-stochastic matrix."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (source.size, target.size):
            raise ValueError(
                f"matrix shape {m.shape} does not match {(source.size, target.size)}")
        return cls(source, target, tuple(Measure(target, row) for row in m))

    @classmethod
    def identity(cls, scoreset):
        return cls.from_matrix(scoreset, scoreset, np.eye(scoreset.size))

    @classmethod
    def constant(cls, source, measure):
        """Every source score maps to the same measure."""
        return cls(source, measure.scoreset, (measure,) * source.size)

    @property
    def matrix(self):
        return np.array([row.weights for row in self.rows])

    def row(self, score):
        return self.rows[self.source.index(score)]

    def push(self, mu):
        """The measure mu k."""
        _require_same(mu.scoreset, self.source)
        return Measure(self.target, mu.array @ self.matrix)

    def mix(self, weight, other):
        """weight * self + (1 - weight) * other."""
        _require_same(self.source, other.source)
        _require_same(self.target, other.target)
        lam = float(weight)
        return Transition.from_matrix(
            self.source, self.target, lam * self.matrix + (1.0 - lam) * other.matrix)

    def isclose(self, other, tol=config.ALGEBRA_TOL):
        _require_same(self.source, other.source)
        _require_same(self.target, other.target)
        return bool(np.all(np.abs(self.matrix - other.matrix) <= tol))

    def to_record(self):
        return {
            "source": list(self.source.scores),
            "target": list(self.target.scores),
            "rows": [list(row.weights) for row in self.rows],
        }


@dataclass(frozen=True)
class UnitIntervalTransition:
    """Distribution transition F~ or quantile transition Q~ of a measure.

    Both are stored through the breakpoints 0 = c_0 <= ... <= c_n = 1 with
    c_{j+1} = F(s_j). The distribution transition sends s_j to the uniform
    law on [c_j, c_{j+1}] (a point mass when the interval is degenerate). The
    quantile transition sends p to the point mass at the first score whose
    CDF reaches p, except that p = 1 goes to the top score.
    """

    kind: str
    scoreset: ScoreSet
    breakpoints: tuple

    def __post_init__(self):
        if self.kind not in (DISTRIBUTION, QUANTILE):
            raise ValueError(f"unknown unit-interval transition kind {self.kind!r}")
        c = tuple(float(x) for x in self.breakpoints)
        if len(c) != self.scoreset.size + 1 or c[0] != 0.0 or c[-1] != 1.0:
            raise ValueError("breakpoints must partition [0, 1]")
        if any(b < a for a, b in zip(c, c[1:])):
            raise ValueError("breakpoints must be nondecreasing")
        object.__setattr__(self, "breakpoints", c)

    def interval(self, score):
        """[F(s-), F(s)] for a source score of a distribution transition."""
        j = self.scoreset.index(score)
        return self.breakpoints[j], self.breakpoints[j + 1]

    def quantile_index(self, p):
        p = float(p)
        if not -config.ALGEBRA_TOL <= p <= 1.0 + config.ALGEBRA_TOL:
            raise ValueError(f"quantile level {p} outside [0, 1]")
        if p >= 1.0 - config.ALGEBRA_TOL:
            return self.scoreset.size - 1
        cdf = np.asarray(self.breakpoints[1:])
        return int(np.argmax(cdf >= p - config.ALGEBRA_TOL))

    def quantile(self, p):
        """Score Q(p) = inf{s : F(s) >= p}, with Q(1) = top."""
        return self.scoreset.scores[self.quantile_index(p)]

    def push(self, mu):
        """Image of mu under a distribution transition as (lo, hi, mass) segments."""
        if self.kind != DISTRIBUTION:
            raise ValueError("push is defined for distribution transitions")
        _require_same(mu.scoreset, self.scoreset)
        c = self.breakpoints
        return tuple((c[j], c[j + 1], mu.weights[j]) for j in range(self.scoreset.size))

    def push_uniform(self):
        """Image of the uniform law on [0, 1] under a quantile transition."""
        if self.kind != QUANTILE:
            raise ValueError("push_uniform is defined for quantile transitions")
        return Measure(self.scoreset, np.diff(self.breakpoints))


def segments_are_uniform(segments, tol=config.ALGEBRA_TOL):
    """True iff (lo, hi, mass) segments tile [0, 1] with unit density and no atoms."""
    covered = 0.0
    for lo, hi, mass in sorted(segments):
        width = hi - lo
        if width <= 0.0:
            if mass > tol:
                return False
            continue
        if abs(lo - covered) > tol or abs(mass - width) > tol:
            return False
        covered = hi
    return abs(covered - 1.0) <= tol


def push(mu, k):
    """The measure mu k."""
    return k.push(mu)


def compose(a, b):
    """Transition a followed by b (matrix product)."""
    _require_same(a.target, b.source)
    return Transition.from_matrix(a.source, b.target, a.matrix @ b.matrix)


def fosd_geq(mu, nu):
    """True iff mu first-order stochastically dominates nu."""
    _require_same(mu.scoreset, nu.scoreset)
    return bool(np.all(mu.cdf() <= nu.cdf() + config.ALGEBRA_TOL))


def is_monotone(k):
    """Consecutive rows are FOSD-ordered, so higher scores map to dominant rows."""
    return all(fosd_geq(upper, lower) for lower, upper in zip(k.rows, k.rows[1:]))


def is_downward(d):
    """Every row puts its mass on scores at or below the source score."""
    _require_same(d.source, d.target)
    m = d.matrix
    for j in range(d.source.size):
        if m[j, :j + 1].sum() < 1.0 - config.ALGEBRA_TOL:
            return False
    return True


def distribution_transition(mu):
    """F~_mu: score s to the uniform law on [F(s-), F(s)]."""
    return UnitIntervalTransition(DISTRIBUTION, mu.scoreset, _breakpoints(mu))


def quantile_transition(mu):
    """Q~_mu: level p to the point mass at Q_mu(p)."""
    return UnitIntervalTransition(QUANTILE, mu.scoreset, _breakpoints(mu))


def fq_compose(mu, nu):
    """The finite transition F~_mu Q~_nu.

    Row s spreads the interval [F_mu(s-), F_mu(s)] over the quantile cells of
    nu in proportion to the overlap lengths. A mu-null score is a point
    p = F_mu(s) and maps to the point mass at Q_nu(p). When p = 1 the null
    score lies above the support of mu and maps to the larger of s and the
    top of the support of nu, which on {0, 1} is the point mass at 1.
    """
    _require_same(mu.scoreset, nu.scoreset)
    source = distribution_transition(mu)
    target = quantile_transition(nu)
    a = np.asarray(source.breakpoints)
    c = np.asarray(target.breakpoints)
    n = mu.scoreset.size
    matrix = np.zeros((n, n))
    for j in range(n):
        lo, hi = a[j], a[j + 1]
        overlap = np.clip(np.minimum(hi, c[1:]) - np.maximum(lo, c[:-1]), 0.0, None)
        total = overlap.sum()
        if hi > lo and total > 0.0:
            matrix[j] = overlap / total
            continue
        if lo >= 1.0 - config.ALGEBRA_TOL:
            matrix[j, max(j, _support_top(nu))] = 1.0
        else:
            matrix[j, target.quantile_index(lo)] = 1.0
    return Transition.from_matrix(mu.scoreset, nu.scoreset, matrix)


def _support_top(mu):
    positive = np.nonzero(np.asarray(mu.weights) > 0.0)[0]
    return int(positive[-1]) if positive.size else mu.scoreset.size - 1


def _breakpoints(mu):
    return tuple(np.concatenate(([0.0], mu.cdf())))


def _require_same(left, right):
    if left != right:
        raise ScoreSetMismatch(f"score sets differ: {left.scores} vs {right.scores}")
