"""Reference activations and their Chebyshev least-squares approximations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import linalg

from .errors import DegenerateInterval, InsufficientSamples, NonFinite

DEFAULT_SAMPLES = 10001


@dataclass(frozen=True)
class ActivationKind:
    """A reference nonlinearity: ``relu`` or ``elu`` (with ``alpha``)."""

    name: str
    alpha: float = 1.0

    def __post_init__(self):
        if self.name not in ("relu", "elu"):
            raise ValueError(f"unknown activation {self.name!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def __call__(self, x):
        return activate(self, x)

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.name == "relu":
            return (x > 0).astype(np.float64)
        # right-branch slope 1 at x == 0
        return np.where(x >= 0, 1.0, self.alpha * np.exp(np.minimum(x, 0.0)))

    def to_dict(self) -> dict:
        d = {"fn": self.name}
        if self.name == "elu":
            d["alpha"] = self.alpha
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActivationKind":
        return cls(d["fn"], float(d.get("alpha", 1.0)))


RELU = ActivationKind("relu")
ELU = ActivationKind("elu")


def activate(kind: ActivationKind, x):
    x = np.asarray(x, dtype=np.float64)
    if kind.name == "relu":
        out = np.maximum(x, 0.0)
    else:
        # expm1 keeps precision near 0; clip avoids overflow warnings on the unused branch
        out = np.where(x > 0, x, kind.alpha * np.expm1(np.minimum(x, 0.0)))
    return out if out.ndim else float(out)


def _chebyshev_basis(t: np.ndarray, degree: int) -> np.ndarray:
    """Columns T_0(t) .. T_degree(t) via the three-term recurrence."""
    basis = np.empty((t.size, degree + 1))
    basis[:, 0] = 1.0
    if degree >= 1:
        basis[:, 1] = t
    for k in range(2, degree + 1):
        basis[:, k] = 2.0 * t * basis[:, k - 1] - basis[:, k - 2]
    return basis


@dataclass(frozen=True)
class ChebyshevSeries:
    """sum_k coeffs[k] * T_k(t) with t = (2x - a - b) / (b - a)."""

    coeffs: tuple
    interval: tuple = (-1.0, 1.0)
    _c: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise DegenerateInterval(f"interval [{a}, {b}] is empty")
        c = np.array(self.coeffs, dtype=np.float64).ravel()
        if c.size == 0:
            raise ValueError("a series needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise NonFinite("series coefficients must be finite")
        object.__setattr__(self, "coeffs", tuple(float(v) for v in c))
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "_c", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def mapped(self, x):
        a, b = self.interval
        return (2.0 * np.asarray(x, dtype=np.float64) - a - b) / (b - a)

    def __call__(self, x):
        return chebyshev_eval(self, x)

    def derivative(self) -> "ChebyshevSeries":
        """Series of d/dx on the same interval."""
        c = self._c
        n = c.size - 1
        if n == 0:
            return ChebyshevSeries((0.0,), self.interval)
        d = np.zeros(n + 1)
        for k in range(n, 0, -1):
            d[k - 1] = d[k + 1] + 2.0 * k * c[k] if k + 1 <= n else 2.0 * k * c[k]
        d[0] *= 0.5
        a, b = self.interval
        return ChebyshevSeries(tuple(d[:n] * (2.0 / (b - a))), self.interval)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "interval": list(self.interval),
                "coeffs": list(self.coeffs)}

    @classmethod
    def from_dict(cls, d: dict) -> "ChebyshevSeries":
        s = cls(tuple(d["coeffs"]), tuple(d["interval"]))
        if "degree" in d and int(d["degree"]) != s.degree:
            raise ValueError(f"degree {d['degree']} disagrees with {len(s.coeffs)} coefficients")
        return s


def chebyshev_eval(series: ChebyshevSeries, x):
    """Clenshaw evaluation. Points outside the interval extrapolate."""
    t = series.mapped(x)
    c = series._c
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for ck in c[:0:-1]:
        b1, b2 = 2.0 * t * b1 - b2 + ck, b1
    out = t * b1 - b2 + c[0]
    return out if np.ndim(out) else float(out)


def to_monomial(series: ChebyshevSeries) -> np.ndarray:
    """Power-basis coefficients c_0..c_n in the original variable x."""
    n = series.degree
    # T_k as power series in t
    tk = [np.array([1.0]), np.array([0.0, 1.0])]
    for k in range(2, n + 1):
        nxt = np.zeros(k + 1)
        nxt[1:] += 2.0 * tk[k - 1]
        nxt[:k - 1] -= tk[k - 2]
        tk.append(nxt)
    in_t = np.zeros(n + 1)
    for k, ck in enumerate(series.coeffs):
        in_t[:k + 1] += ck * tk[k]
    # substitute t = alpha*x + beta, Horner style
    a, b = series.interval
    alpha, beta = 2.0 / (b - a), -(a + b) / (b - a)
    out = np.array([in_t[n]])
    for k in range(n - 1, -1, -1):
        out = np.convolve(out, [beta, alpha])
        out[0] += in_t[k]
    return out


def monomial_eval(coeffs, x):
    x = np.asarray(x, dtype=np.float64)
    acc = np.zeros_like(x)
    for c in reversed(list(coeffs)):
        acc = acc * x + c
    return acc if acc.ndim else float(acc)


def sample_grid(interval, num_samples: int) -> np.ndarray:
    a, b = interval
    return np.linspace(a, b, num_samples)


Target = Union[ActivationKind, Callable]


def fit_chebyshev(kind: Target, degree: int, interval=(-1.0, 1.0),
                  num_samples: int = DEFAULT_SAMPLES) -> ChebyshevSeries:
    """Least-squares Chebyshev fit of ``kind`` on a uniform grid over ``interval``.

    ``kind`` is an :class:`ActivationKind` or any vectorized callable. The
    normal equations are assembled in the Chebyshev basis and solved with a
    Cholesky factorization.
    """
    a, b = (float(v) for v in interval)
    if not a < b:
        raise DegenerateInterval(f"interval [{a}, {b}] is empty")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if num_samples < 10 * (degree + 1):
        raise InsufficientSamples(
            f"need at least {10 * (degree + 1)} samples for degree {degree}, got {num_samples}")
    x = sample_grid((a, b), num_samples)
    y = np.asarray(kind(x), dtype=np.float64) * np.ones_like(x)
    t = (2.0 * x - a - b) / (b - a)
    basis = _chebyshev_basis(t, degree)
    gram = basis.T @ basis
    rhs = basis.T @ y
    coeffs = linalg.solve(gram, rhs, assume_a="pos")
    return ChebyshevSeries(tuple(coeffs), (a, b))


def fit_residual(series: ChebyshevSeries, kind: Target,
                 num_samples: int = DEFAULT_SAMPLES) -> float:
    """Sum of squared residuals on the fitting grid."""
    x = sample_grid(series.interval, num_samples)
    r = np.asarray(series(x)) - np.asarray(kind(x))
    return float(r @ r)


def error_profile(series: ChebyshevSeries, kind: Target, grid) -> np.ndarray:
    """Rows (x, |series(x) - kind(x)|) for ``count`` points on [lo, hi]."""
    lo, hi, count = grid
    count = int(count)
    if count < 2 or not lo < hi:
        raise ValueError("grid needs lo < hi and at least two points")
    x = np.linspace(lo, hi, count)
    err = np.abs(np.asarray(series(x)) - np.asarray(kind(x)))
    return np.column_stack([x, err])


def write_profile_csv(profile: np.ndarray, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", "abs_error"])
    for x, e in profile:
        w.writerow([repr(float(x)), repr(float(e))])


def max_error(series: ChebyshevSeries, kind: Target, lo: float, hi: float,
              count: int = 10001) -> float:
    return float(error_profile(series, kind, (lo, hi, count))[:, 1].max())


def power_ladder_depth(degree: int) -> int:
    """Ciphertext multiplicative depth to evaluate x**degree by repeated squaring."""
    return 0 if degree <= 1 else math.ceil(math.log2(degree))
