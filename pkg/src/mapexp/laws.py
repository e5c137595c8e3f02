"""Jump-size distributions.

Two layers live here:

* scalar marginals (point mass, normal, exponential, Pareto, log-Pareto,
  finite atom lists) with survival functions, integrated tails, and the
  handful of moment functionals the tail machinery needs, and
* bivariate laws for joint (xi, eta) jump sizes: atom lists, independent
  products, and the curve family supported on y = ci - cj * exp(-x).

Closed forms are used where they exist; everything else falls back to
adaptive quadrature against the density.  Means that fail to exist are
reported through ExtReal rather than as nan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .extreal import ExtReal

__all__ = [
    "Marginal",
    "PointMass",
    "NormalLaw",
    "ExponentialLaw",
    "ParetoLaw",
    "LogParetoLaw",
    "DiscreteLaw",
    "CurveImageLaw",
    "BivariateLaw",
    "BivariateAtoms",
    "ProductLaw",
    "CurveLaw",
    "bivariate_atom",
    "ZERO_ATOM",
]

_QUAD_OPTS = dict(limit=200)


class Marginal:
    """Base class for scalar jump-size laws.

    Subclasses implement ``sample``, ``sf`` and either ``atoms`` (discrete
    laws) or ``pdf`` plus ``support`` (continuous laws).  The generic
    moment helpers below are written against that interface.
    """

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sf(self, x):
        """P(X > x), vectorized."""
        raise NotImplementedError

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def pdf(self, x):
        raise NotImplementedError

    def atoms(self) -> list[tuple[float, float]] | None:
        """(probability, location) pairs for discrete laws, else None."""
        return None

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def quad_points(self) -> list[float]:
        """Interior points where the density is kinked, for quadrature."""
        return []

    # -- generic functionals -------------------------------------------

    def expect(self, f, lo: float = -math.inf, hi: float = math.inf) -> float:
        """E[f(X); lo < X <= hi] by atom summation or quadrature."""
        ats = self.atoms()
        if ats is not None:
            return float(sum(p * f(x) for p, x in ats if lo < x <= hi))
        a, b = self.support()
        a, b = max(a, lo), min(b, hi)
        if not a < b:
            return 0.0
        pts = [p for p in self.quad_points() if a < p < b]
        val, _ = integrate.quad(lambda x: f(x) * self.pdf(x), a, b,
                                points=pts or None, **_QUAD_OPTS)
        return float(val)

    def integrated_sf(self, a: float, b: float) -> float:
        """int_a^b P(X > y) dy.  Equals E[(X-a)^+] - E[(X-b)^+] when finite."""
        if not a < b:
            return 0.0
        lo, hi = self.support()
        ats = self.atoms()
        if ats is not None:
            return float(sum(p * max(0.0, min(x, b) - a) for p, x in ats if x > a))
        if b == math.inf:
            tail = self.expect(lambda x: x - a, lo=max(a, lo))
            return float(tail)
        val, _ = integrate.quad(lambda y: self.sf(y), a, b, **_QUAD_OPTS)
        return float(val)

    def mean_pos(self) -> float:
        """E[X^+]; may be +inf."""
        return self.expect(lambda x: x, lo=0.0)

    def mean_neg(self) -> float:
        """E[X^-]; may be +inf."""
        return -self.expect(lambda x: x, hi=0.0)

    def mean(self) -> ExtReal:
        mp, mn = self.mean_pos(), self.mean_neg()
        if math.isinf(mp) and math.isinf(mn):
            return ExtReal.undefined()
        return ExtReal.of(mp - mn)

    def abs_mean(self) -> float:
        return self.mean_pos() + self.mean_neg()

    def mean_small(self) -> float:
        """E[X; |X| < 1], the truncation-convention correction term."""
        return self.expect(lambda x: x if -1.0 < x < 1.0 else 0.0, lo=-1.0, hi=1.0)

    def second_moment_small(self) -> float:
        """E[X^2; |X| < 1]."""
        return self.expect(lambda x: x * x if -1.0 < x < 1.0 else 0.0, lo=-1.0, hi=1.0)

    def exp_neg_mean(self) -> float:
        """E[exp(-X)]; may be +inf."""
        lo, _ = self.support()
        if lo == -math.inf:
            # decide finiteness from the left tail before integrating
            probe = self.expect(lambda x: math.exp(-min(x, 700.0)), hi=0.0)
            if not math.isfinite(probe):
                return math.inf
        return self.expect(lambda x: math.exp(-min(x, 745.0)))

    def log_density(self, u: float) -> float:
        """Density of log X at u, i.e. pdf(e^u) * e^u.

        Tail integrals are computed in log space so that laws whose
        support extends past exp(709) stay integrable; heavy-tailed laws
        override this with closed forms that never form e^u.
        """
        eu = math.exp(min(u, 700.0))
        return float(self.pdf(eu)) * eu

    def neg_log_density(self, u: float) -> float:
        """Density of log(-X) at u, i.e. pdf(-e^u) * e^u."""
        eu = math.exp(min(u, 700.0))
        return float(self.pdf(-eu)) * eu

    def prob_abs_ge(self, c: float) -> float:
        """P(|X| >= c) for c > 0."""
        return float(self.sf(c) + self.cdf(-c) + self._atom_mass_at(c))

    def _atom_mass_at(self, x: float) -> float:
        ats = self.atoms()
        if not ats:
            return 0.0
        return float(sum(p for p, a in ats if a == x))

    def is_zero(self) -> bool:
        ats = self.atoms()
        return ats is not None and all(x == 0.0 for _, x in ats)


@dataclass(frozen=True)
class PointMass(Marginal):
    c: float

    def sample(self, rng, n):
        return np.full(n, self.c)

    def sf(self, x):
        return np.where(np.asarray(x, dtype=float) < self.c, 1.0, 0.0)

    def atoms(self):
        return [(1.0, self.c)]


@dataclass(frozen=True)
class DiscreteLaw(Marginal):
    xs: tuple[float, ...]
    ps: tuple[float, ...]

    def __post_init__(self):
        if len(self.xs) != len(self.ps) or not self.xs:
            raise ValueError("atom list must be non-empty and aligned")
        tot = sum(self.ps)
        if abs(tot - 1.0) > 1e-9 or min(self.ps) < 0:
            raise ValueError("atom weights must be non-negative and sum to 1")

    def sample(self, rng, n):
        idx = rng.choice(len(self.xs), size=n, p=np.asarray(self.ps) / sum(self.ps))
        return np.asarray(self.xs)[idx]

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for p, a in zip(self.ps, self.xs):
            out = out + p * (a > x)
        return out

    def atoms(self):
        return list(zip(self.ps, self.xs))


@dataclass(frozen=True)
class NormalLaw(Marginal):
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def sample(self, rng, n):
        return rng.normal(self.mu, self.sigma, size=n)

    def sf(self, x):
        return stats.norm.sf(x, loc=self.mu, scale=self.sigma)

    def pdf(self, x):
        return stats.norm.pdf(x, loc=self.mu, scale=self.sigma)

    def integrated_sf(self, a, b):
        if not a < b:
            return 0.0
        return self._upper_partial(a) - self._upper_partial(b)

    def _upper_partial(self, t):
        # E[(X - t)^+] for a normal law, in closed form
        if t == math.inf:
            return 0.0
        if t == -math.inf:
            return math.inf
        z = (t - self.mu) / self.sigma
        return (self.mu - t) * stats.norm.sf(z) + self.sigma * stats.norm.pdf(z)

    def mean_pos(self):
        return self._upper_partial(0.0)

    def mean_neg(self):
        return self.mean_pos() - self.mu

    def exp_neg_mean(self):
        return math.exp(-self.mu + 0.5 * self.sigma**2)


@dataclass(frozen=True)
class ExponentialLaw(Marginal):
    """Exponential law on [0, inf) with the given rate."""

    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    def sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, size=n)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)))

    def support(self):
        return (0.0, math.inf)

    def integrated_sf(self, a, b):
        if not a < b:
            return 0.0
        a = max(a, 0.0)
        if b <= 0:
            return 0.0
        hi = 0.0 if b == math.inf else math.exp(-self.rate * b)
        return (math.exp(-self.rate * a) - hi) / self.rate

    def mean_pos(self):
        return 1.0 / self.rate

    def mean_neg(self):
        return 0.0

    def exp_neg_mean(self):
        return self.rate / (self.rate + 1.0)


@dataclass(frozen=True)
class ParetoLaw(Marginal):
    """Pareto law: P(X > x) = (xm / x)^alpha for x >= xm > 0."""

    alpha: float
    xm: float

    def __post_init__(self):
        if self.alpha <= 0 or self.xm <= 0:
            raise ValueError("alpha and xm must be positive")

    def sample(self, rng, n):
        return self.xm * (1.0 + rng.pareto(self.alpha, size=n))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.xm, 1.0, (self.xm / np.maximum(x, self.xm)) ** self.alpha)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        ok = x >= self.xm
        return np.where(ok, self.alpha * self.xm**self.alpha / np.maximum(x, self.xm) ** (self.alpha + 1.0), 0.0)

    def support(self):
        return (self.xm, math.inf)

    def integrated_sf(self, a, b):
        if not a < b:
            return 0.0
        lo = max(a, self.xm)
        out = max(0.0, min(b, self.xm) - a)
        if b <= self.xm:
            return out
        al, m = self.alpha, self.xm
        if al == 1.0:
            piece = m * (math.log(b) - math.log(lo)) if b < math.inf else math.inf
        else:
            hi = 0.0 if b == math.inf and al > 1 else m**al * b ** (1 - al) / (1 - al)
            if b == math.inf and al < 1:
                return math.inf
            piece = hi - m**al * lo ** (1 - al) / (1 - al)
        return out + piece

    def mean_pos(self):
        if self.alpha <= 1.0:
            return math.inf
        return self.alpha * self.xm / (self.alpha - 1.0)

    def mean_neg(self):
        return 0.0

    def log_density(self, u):
        # pdf(e^u) e^u = alpha xm^alpha e^(-alpha u) for e^u >= xm
        if u < math.log(self.xm):
            return 0.0
        return self.alpha * self.xm**self.alpha * math.exp(-self.alpha * u)

    def neg_log_density(self, u):
        return 0.0


@dataclass(frozen=True)
class LogParetoLaw(Marginal):
    """Law of exp(P) for P Pareto(alpha, xm): P(X > x) = (xm / log x)^alpha.

    This is the canonical way to make log X heavy-tailed, e.g. a jump
    tail proportional to 1 / log x, which defeats every log-moment test.
    """

    alpha: float
    xm: float

    def __post_init__(self):
        if self.alpha <= 0 or self.xm <= 0:
            raise ValueError("alpha and xm must be positive")

    def sample(self, rng, n):
        p = self.xm * (1.0 + rng.pareto(self.alpha, size=n))
        # exp overflows just above 709; the true value is then beyond float64
        return np.where(p > 709.0, np.inf, np.exp(np.minimum(p, 709.0)))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        lo = math.exp(self.xm)
        with np.errstate(divide="ignore"):
            lx = np.log(np.maximum(x, lo))
        return np.where(x <= lo, 1.0, (self.xm / lx) ** self.alpha)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        lo = math.exp(self.xm)
        lx = np.log(np.maximum(x, lo))
        val = self.alpha * self.xm**self.alpha / (lx ** (self.alpha + 1.0) * np.maximum(x, lo))
        return np.where(x <= lo, 0.0, val)

    def support(self):
        return (math.exp(self.xm), math.inf)

    def mean_pos(self):
        return math.inf

    def mean_neg(self):
        return 0.0

    def exp_neg_mean(self):
        # support is >= exp(xm) > 1, so this is finite
        return self.expect(lambda x: math.exp(-x))

    def log_mean(self) -> float:
        """E[log X]: alpha*xm/(alpha-1) for alpha > 1, else +inf."""
        if self.alpha <= 1.0:
            return math.inf
        return self.alpha * self.xm / (self.alpha - 1.0)

    def log_density(self, u):
        # log X is Pareto(alpha, xm), so this never touches e^u
        if u <= self.xm:
            return 0.0
        return self.alpha * self.xm**self.alpha * u ** (-self.alpha - 1.0)

    def neg_log_density(self, u):
        return 0.0


@dataclass(frozen=True)
class CurveImageLaw(Marginal):
    """Pushforward of an x-marginal through y = ci - cj * exp(-x)."""

    ci: float
    cj: float
    x_law: Marginal

    def sample(self, rng, n):
        x = self.x_law.sample(rng, n)
        return self.ci - self.cj * np.exp(-x)

    def _y(self, x):
        return self.ci - self.cj * math.exp(-x)

    def sf(self, y):
        y = np.asarray(y, dtype=float)
        if self.cj == 0.0:
            return np.where(y < self.ci, 1.0, 0.0)
        if self.cj > 0.0:
            # y increases with x; y < ci always
            arg = np.where(y < self.ci, (self.ci - y) / self.cj, np.nan)
            out = np.where(y >= self.ci, 0.0, self.x_law.sf(-np.log(np.where(y < self.ci, arg, 1.0))))
            return out
        # cj < 0: y decreases with x; y > ci always
        arg = np.where(y > self.ci, (y - self.ci) / (-self.cj), np.nan)
        out = np.where(y <= self.ci, 1.0, self.x_law.cdf(-np.log(np.where(y > self.ci, arg, 1.0))))
        return out

    def atoms(self):
        ats = self.x_law.atoms()
        if ats is None:
            return None
        return [(p, self._y(x)) for p, x in ats]

    def expect(self, f, lo=-math.inf, hi=math.inf):
        # push the functional back to x-space, where the density lives
        def g(x):
            y = self._y(x)
            return f(y) if lo < y <= hi else 0.0

        return self.x_law.expect(g)

    def mean_pos(self):
        return self.expect(lambda y: max(y, 0.0))

    def mean_neg(self):
        return self.expect(lambda y: max(-y, 0.0))


# ---------------------------------------------------------------------------
# bivariate laws
# ---------------------------------------------------------------------------


class BivariateLaw:
    """Joint law of a (xi, eta) jump."""

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def marginal_x(self) -> Marginal:
        raise NotImplementedError

    def marginal_y(self) -> Marginal:
        raise NotImplementedError

    def is_zero(self) -> bool:
        return self.marginal_x().is_zero() and self.marginal_y().is_zero()


@dataclass(frozen=True)
class BivariateAtoms(BivariateLaw):
    ps: tuple[float, ...]
    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.ps) == len(self.xs) == len(self.ys)) or not self.ps:
            raise ValueError("atom arrays must be non-empty and aligned")
        if abs(sum(self.ps) - 1.0) > 1e-9 or min(self.ps) < 0:
            raise ValueError("atom weights must be non-negative and sum to 1")

    def sample(self, rng, n):
        idx = rng.choice(len(self.ps), size=n, p=np.asarray(self.ps) / sum(self.ps))
        return np.asarray(self.xs)[idx], np.asarray(self.ys)[idx]

    def marginal_x(self):
        return DiscreteLaw(self.xs, self.ps)

    def marginal_y(self):
        return DiscreteLaw(self.ys, self.ps)


def bivariate_atom(x: float, y: float) -> BivariateAtoms:
    return BivariateAtoms((1.0,), (float(x),), (float(y),))


ZERO_ATOM = bivariate_atom(0.0, 0.0)


@dataclass(frozen=True)
class ProductLaw(BivariateLaw):
    """Independent components."""

    x_law: Marginal
    y_law: Marginal

    def sample(self, rng, n):
        return self.x_law.sample(rng, n), self.y_law.sample(rng, n)

    def marginal_x(self):
        return self.x_law

    def marginal_y(self):
        return self.y_law


@dataclass(frozen=True)
class CurveLaw(BivariateLaw):
    """Jumps supported exactly on the curve y = ci - cj * exp(-x)."""

    ci: float
    cj: float
    x_law: Marginal = field(default_factory=lambda: PointMass(0.0))

    def sample(self, rng, n):
        x = self.x_law.sample(rng, n)
        return x, self.ci - self.cj * np.exp(-x)

    def marginal_x(self):
        return self.x_law

    def marginal_y(self):
        return CurveImageLaw(self.ci, self.cj, self.x_law)
