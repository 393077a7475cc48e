"""Critical quantities and tail bounds for r-neighbour bootstrap
percolation on G(n,p).

Everything here is a pure function of its inputs: binomial tails, the
regime slack delta, the scan horizon t0, the critical pair (a_c, t_c),
the giant-component fraction rho, and the Chernoff / martingale /
headline failure-probability bounds.  The asymptotic (1+o(1)) factors in
the headline bounds are set to 1; callers should treat them as reference
values to report next to empirical estimates, not as assertions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass


class DegenerateRegime(Exception):
    """A scanned step has infection probability 1, so the critical-value
    expressions divide by zero."""


class NoConvergence(Exception):
    """An iterative solver failed to reach its tolerance."""


@dataclass(frozen=True)
class ProcessParams:
    """The triple (n, p, r): vertex count, edge probability, infection
    threshold.

    ``regime_ok`` is a finite-n proxy for the interesting parameter range
    (np > 1 and np^r < 1).  No operation refuses to run when it is False,
    but reports carry the flag.
    """

    n: int
    p: float
    r: int

    def __post_init__(self):
        if self.r < 2:
            raise ValueError(f"infection threshold r must be >= 2, got {self.r}")
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"edge probability p must lie in (0,1), got {self.p}")
        if self.n < self.r + 1:
            raise ValueError(f"vertex count n must be >= r+1, got n={self.n}, r={self.r}")
        if not math.isfinite(self.mean_degree):
            raise ValueError("n*p must be finite")

    @property
    def mean_degree(self) -> float:
        """np, the expected degree."""
        return self.n * self.p

    @property
    def npr(self) -> float:
        """n * p^r, the regime diagnostic that must stay below 1."""
        return self.n * self.p**self.r

    @property
    def regime_ok(self) -> bool:
        return self.mean_degree > 1.0 and self.npr < 1.0


@dataclass(frozen=True)
class CriticalValues:
    """Output of the critical-pair scan plus the asymptotic references."""

    delta: float
    t0: float
    t0_int: int
    tc: int
    ac: float
    tc_asym: float
    ac_asym: float
    pi_hat_tc: float


@dataclass(frozen=True)
class BoundInputs:
    """Inputs of the martingale tail bound: deviation lambda, per-step
    difference cap m, and the summed conditional variances."""

    lam: float
    max_step: float
    var_sum: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.max_step > 0:
            raise ValueError(f"max_step must be > 0, got {self.max_step}")
        if self.var_sum < 0:
            raise ValueError(f"var_sum must be >= 0, got {self.var_sum}")


def _binom_lower_sum(t: int, p: float, r: int) -> float:
    """sum_{j<r} C(t,j) p^j (1-p)^(t-j), each term in log space.

    This is 1 - P[Bin(t,p) >= r]; keeping the un-subtracted sum around
    avoids a 1-(1-s) round trip where callers need 1 - pi_hat itself.
    Requires t >= 0 and 0 < p < 1 unless handled by the caller.
    """
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 1.0 if t == 0 else 0.0
    log_p = math.log(p)
    log_q = math.log1p(-p)
    lg_t = math.lgamma(t + 1)
    terms = []
    for j in range(min(r, t + 1)):
        lt = lg_t - math.lgamma(j + 1) - math.lgamma(t - j + 1) + j * log_p + (t - j) * log_q
        terms.append(math.exp(lt))
    return math.fsum(terms)


def binom_tail_geq(t: int, p: float, r: int) -> float:
    """P[Bin(t,p) >= r]: the chance that t examined vertices infect a
    fresh vertex with threshold r.

    Exactly 0 when t < r; clamped to [0,1].  Terms are evaluated in log
    space so large t with small p does not underflow.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0,1], got {p}")
    if t < r:
        return 0.0
    s = _binom_lower_sum(t, p, r)
    return min(1.0, max(0.0, 1.0 - s))


def delta(params: ProcessParams) -> float:
    """Regime slack: max of (np^r)^(1/(2(r-1))) and (np)^(-1/(4(r-1)))."""
    r = params.r
    return max(
        params.npr ** (1.0 / (2 * (r - 1))),
        params.mean_degree ** (-1.0 / (4 * (r - 1))),
    )


def t_zero(params: ProcessParams) -> float:
    """Scan horizon t0 = ((1+delta) (r-1)! / (n p^r))^(1/(r-1))."""
    r = params.r
    return ((1.0 + delta(params)) * math.factorial(r - 1) / params.npr) ** (1.0 / (r - 1))


def t_zero_int(params: ProcessParams) -> int:
    """ceil(t0): integer horizon for the critical scan, so the real-valued
    minimiser always falls inside the scanned range."""
    return math.ceil(t_zero(params))


def _deficit(params: ProcessParams, t: int) -> tuple[float, float]:
    """(n*pi_hat(t) - t) / (1 - pi_hat(t)) and the survival 1 - pi_hat(t).

    The numerator is assembled as (n - t) - n*s with s the lower-tail sum,
    avoiding the cancellation of forming pi_hat first.
    """
    s = _binom_lower_sum(t, params.p, params.r)
    if s <= 0.0:
        raise DegenerateRegime(
            f"pi_hat({t}) = 1 at p={params.p}; critical-value scan undefined"
        )
    return ((params.n - t) - params.n * s) / s, s


def critical_pair(params: ProcessParams) -> CriticalValues:
    """Scan integer steps t in [r, ceil(t0)] for the tightest trajectory
    deficit.

    The scan minimises (n pi_hat(t) - t)/(1 - pi_hat(t)); the critical
    seed count a_c is minus that minimum and t_c is the smallest step
    attaining it.  Also fills the first-order asymptotic references
    tc_asym = ((r-1)!/(np^r))^(1/(r-1)) and ac_asym = (1 - 1/r) tc_asym.
    """
    d = delta(params)
    t0 = t_zero(params)
    t0i = max(math.ceil(t0), params.r)
    best_t = params.r
    best_val = math.inf
    best_s = 1.0
    for t in range(params.r, t0i + 1):
        val, s = _deficit(params, t)
        if val < best_val:
            best_val, best_t, best_s = val, t, s
    ac = -best_val
    if ac <= 0.0:
        warnings.warn(
            f"critical seed count a_c = {ac:.6g} is not positive; parameters "
            "lie outside the analysed regime",
            stacklevel=2,
        )
    tc_asym = (math.factorial(params.r - 1) / params.npr) ** (1.0 / (params.r - 1))
    return CriticalValues(
        delta=d,
        t0=t0,
        t0_int=t0i,
        tc=best_t,
        ac=ac,
        tc_asym=tc_asym,
        ac_asym=(1.0 - 1.0 / params.r) * tc_asym,
        pi_hat_tc=1.0 - best_s,
    )


def rho_fixed_point(eps: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Unique positive solution of 1 - rho = exp(-(1+eps) rho) for eps > 0.

    Bisection on the residual -expm1(-(1+eps) x) - x, which is positive
    below the root and negative above it; expm1 keeps the bracket sound
    even for tiny eps, where the root is close to 2 eps.
    """
    if not (isinstance(eps, (int, float)) and math.isfinite(eps) and eps > 0.0):
        raise NoConvergence(f"fixed point requires eps > 0, got {eps}")

    def resid(x: float) -> float:
        return -math.expm1(-(1.0 + eps) * x) - x

    lo = eps / (1.0 + eps) ** 2  # half the small-eps root 2 eps/(1+eps)^2
    for _ in range(64):
        if resid(lo) > 0.0:
            break
        lo /= 2.0
    else:
        raise NoConvergence(f"could not bracket the root for eps={eps}")
    hi = 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if resid(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    rho = 0.5 * (lo + hi)
    if abs(1.0 - rho - math.exp(-(1.0 + eps) * rho)) >= tol:
        raise NoConvergence(f"residual above {tol} after {max_iter} bisections (eps={eps})")
    return rho


def chernoff_lower(mean: float, lam: float) -> float:
    """Lower-tail bound P[X - E[X] <= -lambda] <= exp(-lambda^2 / (2 E[X]))."""
    if mean < 0 or lam < 0:
        raise ValueError("mean and lambda must be >= 0")
    if lam == 0.0:
        return 1.0
    if mean == 0.0:
        return 0.0  # limit of the bound as the mean vanishes
    return math.exp(-(lam * lam) / (2.0 * mean))


def chernoff_upper(mean: float, lam: float) -> float:
    """Upper-tail bound P[X - E[X] >= lambda] <= exp(-lambda^2 / (2(E[X] + lambda/3)))."""
    if mean < 0 or lam < 0:
        raise ValueError("mean and lambda must be >= 0")
    if lam == 0.0:
        return 1.0
    return math.exp(-(lam * lam) / (2.0 * (mean + lam / 3.0)))


def martingale_tail_bound(b: BoundInputs) -> float:
    """exp(-lambda^2 / (2 (sum sigma_i^2 + m lambda / 3))) for a martingale
    with difference cap m and summed conditional variances."""
    if b.lam == 0.0:
        return 1.0
    return math.exp(-(b.lam * b.lam) / (2.0 * (b.var_sum + b.max_step * b.lam / 3.0)))


def theorem_subcritical_bound(params: ProcessParams, alpha: float) -> float:
    """Failure-probability bound for the subcritical statement:
    exp(-r alpha^2 / (2 (t0 + r alpha / 3))), with (1+o(1)) set to 1."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    r = params.r
    t0 = t_zero(params)
    return min(1.0, math.exp(-r * alpha * alpha / (2.0 * (t0 + r * alpha / 3.0))))


def theorem_supercritical_bound(params: ProcessParams, alpha: float) -> float:
    """Failure-probability bound for the supercritical statement: the sum
    of exp(-r alpha^2 / (8 (t0 + r alpha/3))) and
    exp(-(r-1) alpha^2 / (8 (t0 + (r-1) alpha/2))), with (1+o(1)) set to 1."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    r = params.r
    t0 = t_zero(params)
    first = math.exp(-r * alpha * alpha / (8.0 * (t0 + r * alpha / 3.0)))
    second = math.exp(-(r - 1) * alpha * alpha / (8.0 * (t0 + (r - 1) * alpha / 2.0)))
    return min(1.0, first + second)


# g(x) = 2 sum_{l>=2} x^(l-2)/l!; nine series terms reach full double
# precision on [0, 1e-3], where the direct form cancels.
_G_SERIES = [2.0 / math.factorial(k + 2) for k in range(9)]


def g_function(x: float) -> float:
    """2 (e^x - 1 - x)/x^2, extended by its series limit 1 at x = 0.

    Monotone increasing on the nonnegative axis and below (1 - x/3)^(-1)
    for x < 3, which is what makes the martingale bound close."""
    if x < 0:
        raise ValueError(f"g is defined for x >= 0, got {x}")
    if x < 1e-3:
        acc = 0.0
        for c in reversed(_G_SERIES):
            acc = acc * x + c
        return acc
    return 2.0 * (math.expm1(x) - x) / (x * x)


@dataclass(frozen=True)
class StagePredictions:
    """Predicted sizes for the supercritical stage pipeline, all real
    valued, recomputable from (params, alpha) alone.

    ``witness_target``, ``b1_target`` and ``c1_target`` are the designated
    subset sizes the pipeline carves out of the measured sets; the pred_*
    fields are the lower bounds the measured sets are compared against.
    """

    t1: int
    witness_target: float
    pred_bhat: float
    pred_b: float
    b1_target: float
    pred_c: float
    pred_d_fraction: float


def stage_predictions(params: ProcessParams, alpha: float) -> StagePredictions:
    """Predicted stage sizes at offset alpha above the critical seed count.

    t1 = ceil(t0 + alpha/4).  pi_hat is evaluated at ceil(t0) (the scan
    convention for the real-valued horizon).  The predicted D fraction
    follows the closing count n - |C| - |W| - 1/p of the final expansion
    step, expressed as a fraction of n and clamped to [0,1].
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    r = params.r
    p = params.p
    d = delta(params)
    t0 = t_zero(params)
    t1 = math.ceil(t0 + alpha / 4.0)
    pi_t0 = binom_tail_geq(t_zero_int(params), p, r)
    witness = max(0.0, (1.0 - 2.0 * pi_t0) * alpha / 4.0)
    pred_bhat = (1.0 + 0.75 * d + (r - 1) * alpha / (4.0 * t0)) / p
    pred_b = (d / 4.0 + (r - 1) * alpha / (2.0 * t0 + (r - 1) * alpha)) / p
    b1_target = params.mean_degree ** (-1.0 / (4 * (r - 1))) / (4.0 * p)
    pred_c = params.mean_degree ** (1.0 / (4 * (r - 1))) / p
    pred_d = 1.0 - (t1 + witness + pred_bhat + pred_c + 1.0 / p) / params.n
    return StagePredictions(
        t1=t1,
        witness_target=witness,
        pred_bhat=pred_bhat,
        pred_b=pred_b,
        b1_target=b1_target,
        pred_c=pred_c,
        pred_d_fraction=min(1.0, max(0.0, pred_d)),
    )
