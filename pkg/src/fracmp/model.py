"""Nonlinearity family, potential, hypothesis validators, energy and gradient.

The built-in nonlinearity is one parametric family covering f(0) > 0,
= 0 and < 0:

    f(s) = s^q + f0          for s >= 0,
    f(s) = f0 * (1 + s)      for -1 <= s < 0,
    f(s) = 0                 for s <= -1,

with primitive F(s) = integral of f from 0 to s, so F is constant below
-1 and F(0) = 0.  The growth and superlinearity hypotheses are certified
by sampling (the constants in the analysis are existential, so a sampled
certificate is the honest desk-scale check), with the family's known
asymptote f(s)/s^q -> 1 folded into the envelope search.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    ConfigurationError,
    ExponentWindowError,
    HypothesisError,
    OperatorRegimeError,
    UsageError,
)
from .grid import Grid, as_grid_function
from .kernel import Kernel, apply_flap, seminorm_p


def phi_p(s, p: float):
    """The odd power map |s|^(p-2) s, written as sign(s)|s|^(p-1) (p > 1)."""
    if np.isscalar(s):
        return float(np.sign(s) * np.abs(s) ** (p - 1.0))
    s = np.asarray(s, dtype=float)
    return np.sign(s) * np.abs(s) ** (p - 1.0)


@dataclass(frozen=True)
class NonlinearitySpec:
    """The built-in family and its certified hypothesis constants.

    A, B certify the growth envelope A(s^q - 1) <= f(s) <= B(s^q + 1) on
    the validation samples; K certifies the superlinearity deficit
    s f(s) - theta F(s) >= K on the stated range; min_sf records
    min s f(s) separately since the two lower bounds play different roles.
    Constants are None until the validators have run.
    """

    q: float
    f0: float
    theta: float
    A: float | None = None
    B: float | None = None
    K: float | None = None
    min_sf: float | None = None
    ar_range: tuple[float, float] = (-2.0, 50.0)


def default_theta(q: float, p: float) -> float:
    """Default superlinearity exponent, strictly inside (p, q+1)."""
    return q + 1.0 - 0.1 * (q + 1.0 - p)


def f_eval(s, nl: NonlinearitySpec):
    """Evaluate the nonlinearity f at scalar or array s."""
    arr = np.asarray(s, dtype=float)
    out = np.zeros_like(arr)
    pos = arr >= 0.0
    mid = (arr < 0.0) & (arr > -1.0)
    out[pos] = arr[pos] ** nl.q + nl.f0
    out[mid] = nl.f0 * (1.0 + arr[mid])
    return float(out) if np.isscalar(s) else out


def F_eval(s, nl: NonlinearitySpec):
    """Evaluate the primitive F(s) = int_0^s f."""
    arr = np.asarray(s, dtype=float)
    out = np.full_like(arr, -nl.f0 / 2.0)
    pos = arr >= 0.0
    mid = (arr < 0.0) & (arr > -1.0)
    out[pos] = arr[pos] ** (nl.q + 1.0) / (nl.q + 1.0) + nl.f0 * arr[pos]
    out[mid] = nl.f0 * (arr[mid] + arr[mid] ** 2 / 2.0)
    return float(out) if np.isscalar(s) else out


def critical_exponent(p: float, s: float) -> float:
    """Fractional Sobolev critical exponent p*_s = p/(1 - s p) on the line."""
    sp = s * p
    if sp >= 1.0:
        raise OperatorRegimeError("s*p = %g >= 1: no subcritical window" % sp)
    return p / (1.0 - sp)


def exponent_window(p: float, s: float) -> tuple[float, float]:
    """Admissible open interval (p-1, p*_s - 1) for the growth exponent q."""
    return p - 1.0, critical_exponent(p, s) - 1.0


_H1_SAMPLES = np.geomspace(1e-6, 1e6, 4001)


def validate_H1(nl: NonlinearitySpec, p: float, s: float) -> tuple[float, float]:
    """Certify the growth envelope; return the sampled-optimal (A, B).

    B is the smallest and A the largest constant such that
    A(t^q - 1) <= f(t) <= B(t^q + 1) holds on the log sample grid
    [1e-6, 1e6], with the family asymptote ratio 1 included.  Degenerate
    envelopes (the f0 <= -1 regime, which pinches A against its upper
    limit near t = 1) are rejected.
    """
    lo, hi = exponent_window(p, s)
    if not lo < nl.q < hi:
        raise ExponentWindowError(
            "q=%g outside the window (%g, %g) for p=%g, s=%g" % (nl.q, lo, hi, p, s)
        )
    t = _H1_SAMPLES
    ft = f_eval(t, nl)
    if f_eval(1.0, nl) < 0.0:
        raise HypothesisError(
            "envelope fails at s=1: f(1) = %g < 0 needs A(1-1) <= f(1)" % f_eval(1.0, nl)
        )
    B = max(1.0, float(np.max(ft / (t ** nl.q + 1.0))))
    above = t > 1.0
    A_hi = min(1.0, float(np.min(ft[above] / (t[above] ** nl.q - 1.0))))
    neg = (t < 1.0) & (ft < 0.0)
    A_lo = float(np.max(ft[neg] / (t[neg] ** nl.q - 1.0))) if np.any(neg) else 0.0
    if A_hi <= 0.0 or A_lo >= A_hi - 1e-9:
        raise HypothesisError(
            "no admissible A: lower requirement %g meets upper limit %g" % (A_lo, A_hi)
        )
    A = A_hi
    if np.any(A * (t ** nl.q - 1.0) > ft + 1e-12) or np.any(ft > B * (t ** nl.q + 1.0) + 1e-12):
        raise HypothesisError("envelope violated on samples with A=%g, B=%g" % (A, B))
    return A, B


def _ar_sample_grid(lo: float, hi: float, samples: int) -> np.ndarray:
    """Sample points for the superlinearity deficit, denser near the origin."""
    n_lin = samples // 2
    pts = [np.linspace(lo, min(hi, 4.0), n_lin)]
    if hi > 4.0:
        pts.append(np.geomspace(4.0, hi, samples - n_lin))
    pts.append(np.array([-1.0, 0.0]))
    grid = np.unique(np.concatenate(pts))
    return grid[(grid >= lo) & (grid <= hi)]


def _refine_minimum(func, grid: np.ndarray, coarse_min_idx: int) -> float:
    """Polish a sampled minimum with a bounded scalar search."""
    i = coarse_min_idx
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if hi <= lo:
        return float(func(grid[i]))
    res = minimize_scalar(func, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(func(grid[i]), res.fun))


def validate_AR(nl: NonlinearitySpec, p: float,
                ar_range: tuple[float, float] | None = None,
                samples: int = 20001) -> float:
    """Certify superlinearity; return K = min of s f(s) - theta F(s).

    The minimum is taken over the stated range (sampled, then polished
    around the best sample).  A trend probe beyond the range detects a
    deficit that is unbounded below, which happens exactly when theta
    exceeds the family's superlinearity exponent q+1 (and at theta = q+1
    itself when f0 > 0, where the deficit decays linearly).
    """
    if nl.theta <= p:
        raise HypothesisError("theta=%g must exceed p=%g" % (nl.theta, p))
    lo, hi = ar_range if ar_range is not None else nl.ar_range
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi and hi > 0):
        raise ConfigurationError("bad AR range (%g, %g)" % (lo, hi))

    def deficit(t):
        return t * f_eval(t, nl) - nl.theta * F_eval(t, nl)

    probe = deficit(np.array([hi, 10.0 * hi, 100.0 * hi]))
    if probe[2] < probe[1] < probe[0] and probe[2] < 0.0:
        raise HypothesisError(
            "deficit unbounded below (trend %g -> %g -> %g beyond s=%g); "
            "theta=%g exceeds the admissible superlinearity of the family"
            % (probe[0], probe[1], probe[2], hi, nl.theta)
        )
    grid = _ar_sample_grid(lo, hi, samples)
    vals = deficit(grid)
    return _refine_minimum(deficit, grid, int(np.argmin(vals)))


def min_sf(nl: NonlinearitySpec, ar_range: tuple[float, float] | None = None,
           samples: int = 20001) -> float:
    """min of s f(s) over the stated range (bounded below per the analysis)."""
    lo, hi = ar_range if ar_range is not None else nl.ar_range

    def sf(t):
        return t * f_eval(t, nl)

    grid = _ar_sample_grid(lo, hi, samples)
    vals = sf(grid)
    return _refine_minimum(sf, grid, int(np.argmin(vals)))


def make_nonlinearity(q: float, f0: float, p: float, s: float,
                      theta: float | None = None,
                      ar_range: tuple[float, float] = (-2.0, 50.0)) -> NonlinearitySpec:
    """Build and fully certify a NonlinearitySpec for the given (p, s)."""
    q = float(q)
    f0 = float(f0)
    theta = default_theta(q, p) if theta is None else float(theta)
    nl = NonlinearitySpec(q=q, f0=f0, theta=theta, ar_range=tuple(ar_range))
    A, B = validate_H1(nl, p, s)
    nl = replace(nl, A=A, B=B)
    K = validate_AR(nl, p)
    return replace(nl, K=K, min_sf=min_sf(nl))


def primitive_envelope(nl: NonlinearitySpec, inflate: float = 1.05,
                       floor: float = 1e-9) -> tuple[float, float, float]:
    """Constants (A1, C1, B1) boxing the primitive F.

    F(s) >= A1 (s^{q+1} - C1) for s >= 0 with A1 = A/(2(q+1)) (half the
    integrated envelope constant, so C1 stays finite for f0 < 0), and
    F(s) <= B1 (|s|^{q+1} + 1) for all s.  Sampled suprema are inflated a
    little so the certificates err on the safe side; C1 has a small floor
    to keep downstream threshold formulas finite when the true supremum
    is zero.
    """
    if nl.A is None or nl.B is None:
        raise UsageError("nonlinearity must be validated before use")
    q1 = nl.q + 1.0
    A1 = nl.A / (2.0 * q1)
    t_pos = np.geomspace(1e-8, 1e6, 4001)
    t_neg = np.linspace(-2.0, 0.0, 801)
    t_all = np.concatenate([t_neg, t_pos])
    ratio = F_eval(t_all, nl) / (np.abs(t_all) ** q1 + 1.0)
    B1 = inflate * max(1.0 / q1, float(np.max(ratio)))
    gap = t_pos ** q1 - F_eval(t_pos, nl) / A1
    top = float(np.max(gap))
    C1 = max(floor, inflate * top)
    return A1, C1, B1


@dataclass(frozen=True, eq=False)
class Potential:
    """Sampled potential with its negative-part size and sup norm."""

    values: np.ndarray
    cV: float
    Vinf: float


def make_potential(grid: Grid, constant: float | None = None,
                   values=None) -> Potential:
    """Build a Potential from a constant or from sampled node values."""
    if (constant is None) == (values is None):
        raise ConfigurationError("potential needs exactly one of constant/values")
    if constant is not None:
        vals = np.full(grid.n, float(constant))
    else:
        vals = as_grid_function(values, grid.n)
    return Potential(
        values=vals,
        cV=float(max(0.0, -np.min(vals))),
        Vinf=float(np.max(np.abs(vals))) if grid.n else 0.0,
    )


@dataclass(frozen=True, eq=False)
class Problem:
    """One full instance: geometry, operator, potential, lambda, nonlinearity."""

    grid: Grid
    kernel: Kernel
    V: Potential
    lam: float
    nl: NonlinearitySpec

    @property
    def p(self) -> float:
        return self.kernel.p

    @property
    def s(self) -> float:
        return self.kernel.s

    @property
    def q(self) -> float:
        return self.nl.q

    @property
    def r(self) -> float:
        """Scaling exponent r = 1/(q+1-p) of the lambda power laws."""
        return 1.0 / (self.nl.q + 1.0 - self.kernel.p)

    @property
    def h(self) -> float:
        return self.grid.h


def make_problem(grid: Grid, kernel: Kernel, V: Potential, lam: float,
                 nl: NonlinearitySpec) -> Problem:
    """Assemble and sanity-check a Problem."""
    if kernel.n != grid.n:
        raise UsageError("kernel built for n=%d, grid has n=%d" % (kernel.n, grid.n))
    if len(V.values) != grid.n:
        raise UsageError("potential sampled at %d nodes, grid has %d" % (len(V.values), grid.n))
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0.0):
        raise ConfigurationError("lambda must be positive and finite, got %r" % lam)
    if nl.q + 1.0 <= kernel.p:
        raise ExponentWindowError("q+1 = %g <= p = %g: r undefined" % (nl.q + 1.0, kernel.p))
    return Problem(grid=grid, kernel=kernel, V=V, lam=lam, nl=nl)


def energy(u, prob: Problem) -> float:
    """J(u) = S(u)/p + (h/p) sum V |u|^p - lambda h sum F(u)."""
    v = as_grid_function(u, prob.grid.n)
    p = prob.p
    h = prob.h
    S = seminorm_p(v, prob.kernel)
    pot = h * float(np.sum(prob.V.values * np.abs(v) ** p))
    non = h * float(np.sum(F_eval(v, prob.nl)))
    return S / p + pot / p - prob.lam * non


def gradient(u, prob: Problem) -> np.ndarray:
    """Exact Euclidean gradient of energy at u."""
    v = as_grid_function(u, prob.grid.n)
    p = prob.p
    h = prob.h
    g = apply_flap(v, prob.kernel) / p
    g += h * prob.V.values * phi_p(v, p)
    g -= prob.lam * h * f_eval(v, prob.nl)
    return g


def residual_norm(u, prob: Problem) -> float:
    """||gradient||_2 / sqrt(h): the discrete L2 size of the equation defect."""
    return float(np.linalg.norm(gradient(u, prob)) / np.sqrt(prob.h))
