"""Closed-form bounds: the one-level eigenvalue map ``f``, the inductive map
``g``, the renormalisation recursion and the survival lower bounds it
produces, extinction certificates from the branching comparison,
bracketing of the critical recovery rate, and the reduction of general
``N`` to the binary lattice.

Anything raised to a ``2^n`` or ``N^n`` power is handled in the log domain.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .lattice import AlphaSeq, Explicit, alpha_from_json, condition_diagnostics, finite_or_str

LOG2 = math.log(2.0)
_FLOAT_MIN = sys.float_info.min

__all__ = [
    "f",
    "log_f",
    "g",
    "log_g",
    "smallness_constants",
    "RenormTrace",
    "recursion",
    "SurvivalProduct",
    "survival_product",
    "finite_survival_bound",
    "eps_tilde_bounds",
    "F_eta",
    "summability_scan",
    "ExtinctionCertificate",
    "certify_extinction",
    "bracket_delta_c",
    "ComparisonAlpha",
    "ComparisonReduction",
    "compare_reduce",
    "as_alpha",
]


def _exp(v: float) -> float:
    return math.exp(v) if v < 709.78 else math.inf


def as_alpha(alpha) -> AlphaSeq:
    if isinstance(alpha, AlphaSeq):
        return alpha
    if isinstance(alpha, dict):
        return alpha_from_json(alpha)
    return Explicit(tuple(alpha))


# ---------------------------------------------------------------------------
# f and g
# ---------------------------------------------------------------------------


def _gamma_root(gamma):
    # gamma - sqrt(gamma^2 - 1/2) rewritten without cancellation or overflow
    return 0.5 / (gamma * (1.0 + math.sqrt(1.0 - 0.5 / (gamma * gamma))))


def f(r: float) -> float:
    """Decreasing map ``[0, inf) -> (0, 1/2]``, ``f(r) = gamma - sqrt(gamma^2 - 1/2)``
    with ``gamma = (3 + r/2)/4``.  Behaves like ``2/r`` for large ``r``."""
    if r < 0 or math.isnan(r):
        raise ValueError(f"f is defined for r >= 0, got {r}")
    if r == math.inf:
        return 0.0
    return _gamma_root(0.25 * (3.0 + 0.5 * r))


def log_f(log_r: float) -> float:
    """``log f(exp(log_r))``, valid for arbitrarily large or small ``r``."""
    if log_r == -math.inf:
        return math.log(0.5)
    if log_r == math.inf:
        return -math.inf
    log_gamma = float(np.logaddexp(math.log(0.75), log_r - math.log(8.0)))
    inv_g2 = math.exp(-2.0 * log_gamma)
    return math.log(0.5) - log_gamma - math.log1p(math.sqrt(1.0 - 0.5 * inv_g2))


def g(eps: float) -> float:
    """``g(eps) = 4 eps f(1/eps)``; increasing, ``~ 8 eps^2`` near 0."""
    if not eps > 0:
        raise ValueError(f"g is defined for eps > 0, got {eps}")
    return 4.0 * eps * f(1.0 / eps)


def log_g(log_eps: float) -> float:
    return math.log(4.0) + log_eps + log_f(-log_eps)


@lru_cache(maxsize=None)
def smallness_constants(lo: float = 1e-12, hi: float = 1e6, points: int = 4000) -> dict:
    """Thresholds below which ``7 eps^2 <= g(eps)`` resp. ``g(eps) <= 9 eps^2``.

    ``g(eps)/eps^2`` is scanned on a log grid; a crossing with 7 (resp. 9) is
    refined with Brent's method.  If the ratio never reaches the level the
    inequality holds on the whole grid and the constant is ``inf``.
    """
    eps = np.logspace(math.log10(lo), math.log10(hi), points)
    ratio = np.array([g(e) / (e * e) for e in eps])
    out = {"grid": [lo, hi, points], "sup_ratio": float(ratio.max()),
           "ratio_decreasing": bool(np.all(np.diff(ratio) < 0))}
    for level, key, holds in ((7.0, "c7", ratio >= 7.0), (9.0, "c9", ratio <= 9.0)):
        if holds.all():
            out[key] = math.inf
        elif not holds[0]:
            out[key] = 0.0
        else:
            first_bad = int(np.argmin(holds))
            out[key] = brentq(lambda e: g(e) / (e * e) - level, eps[first_bad - 1], eps[first_bad],
                              xtol=1e-15, rtol=1e-13)
    return out


# ---------------------------------------------------------------------------
# recursion
# ---------------------------------------------------------------------------


@dataclass
class RenormTrace:
    """Output of the renormalisation recursion.

    ``alpha_k(m) = 2^-m alpha_{k+m}`` is never stored; ``level_alpha``
    evaluates it on demand.
    """

    delta: float
    alpha: AlphaSeq
    delta_seq: list[float]
    log_delta_seq: list[float]
    xi_seq: list[float]
    product_partial: list[float]
    eps_seq: list[float] | None = None
    log_eps_seq: list[float] | None = None
    xi_eps_route: list[float] | None = None
    route_discrepancy: float | None = None
    verdict: str = "truncated"

    @property
    def n_levels(self) -> int:
        return len(self.xi_seq)

    def level_alpha(self, m: int, k: int) -> float:
        return math.ldexp(self.alpha.value(k + m), -m)

    def level_alphas(self, m: int, count: int) -> list[float]:
        return [self.level_alpha(m, k) for k in range(1, count + 1)]

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "alpha": self.alpha.to_json(),
            "delta_seq": [finite_or_str(v) for v in self.delta_seq],
            "log_delta_seq": [finite_or_str(v) for v in self.log_delta_seq],
            "xi_seq": self.xi_seq,
            "product_partial": self.product_partial,
            "eps_seq": None if self.eps_seq is None else [finite_or_str(v) for v in self.eps_seq],
            "route_discrepancy": self.route_discrepancy,
            "verdict": self.verdict,
        }


def _xi_step(alpha: AlphaSeq, k: int, d: float, log_d: float) -> float:
    """``xi(k) = f(alpha_1(k)/delta(k))`` with ``alpha_1(k) = 2^-k alpha_{k+1}``."""
    la = alpha.log_value(k + 1)
    if la == -math.inf:
        return 0.5
    a1 = math.ldexp(alpha.value(k + 1), -k)
    if d >= _FLOAT_MIN and a1 >= _FLOAT_MIN:
        r = a1 / d
        if math.isfinite(r):
            return f(r)
    return math.exp(log_f(la - k * LOG2 - log_d))


def _log_xi(alpha: AlphaSeq, k: int, log_d: float) -> float:
    la = alpha.log_value(k + 1)
    if la == -math.inf:
        return math.log(0.5)
    return log_f(la - k * LOG2 - log_d)


def recursion(delta: float, alpha, n_levels: int, check_routes: bool = True) -> RenormTrace:
    """Iterate ``delta(k+1) = 2 xi(k) delta(k)``, ``alpha_k(m+1) = alpha_{k+1}(m)/2``.

    When ``alpha_1..alpha_{n+1}`` are all positive, the ratios
    ``eps(k) = delta(k)/alpha_1(k)`` are also produced through the
    independent recurrence ``eps(k+1) = (alpha_{k+1}/alpha_{k+2}) g(eps(k))``
    and the two values of ``xi`` are compared (``route_discrepancy`` is the
    largest relative difference).
    """
    if not delta > 0:
        raise ValueError(f"recovery rate must be positive, got {delta}")
    alpha = as_alpha(alpha)
    ds, lds, xis = [float(delta)], [math.log(delta)], []
    for k in range(n_levels):
        xi = _xi_step(alpha, k, ds[k], lds[k])
        xis.append(xi)
        ds.append(2.0 * xi * ds[k])
        lds.append(LOG2 + _log_xi(alpha, k, lds[k]) + lds[k])
    log_prod = np.concatenate([[0.0], np.cumsum(np.log1p(-np.asarray(xis, dtype=float)))])
    trace = RenormTrace(delta=float(delta), alpha=alpha, delta_seq=ds, log_delta_seq=lds,
                        xi_seq=xis, product_partial=[float(v) for v in np.exp(log_prod)])

    logs = [alpha.log_value(k) for k in range(1, n_levels + 2)]
    if check_routes and all(v > -math.inf for v in logs):
        le = [math.log(delta) - logs[0]]
        for k in range(n_levels - 1):
            le.append(logs[k] - logs[k + 1] + log_g(le[k]))
        xi_eps = [math.exp(log_f(-v)) for v in le]
        trace.log_eps_seq = le
        trace.eps_seq = [_exp(v) for v in le]
        trace.xi_eps_route = xi_eps
        disc = 0.0
        for a, b in zip(xis, xi_eps):
            if a > 0 or b > 0:
                disc = max(disc, abs(a - b) / max(a, b))
        trace.route_discrepancy = disc
        if disc > 1e-9:
            raise AssertionError(f"xi routes disagree (relative {disc:.3e})")
    return trace


def finite_survival_bound(delta: float, alpha, n: int, t: float) -> float:
    """Lower bound ``prod_{k<n} (1 - xi(k)) exp(-delta(n) t)`` on the survival
    probability up to time ``t`` of the process on ``Omega^n`` (``N = 2``)
    started from a single infected site."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    tr = recursion(delta, alpha, n, check_routes=False)
    return tr.product_partial[n] * math.exp(-tr.delta_seq[n] * t)


# ---------------------------------------------------------------------------
# infinite product
# ---------------------------------------------------------------------------


@dataclass
class SurvivalProduct:
    Pi_lower: float
    verdict: str  # positive | zero-indicated | truncated
    levels: int
    reason: str
    log_exact_part: float = 0.0
    tail_sum_bound: float = 0.0
    tail_depth: int = 0
    delta: float = 0.0

    def to_json(self) -> dict:
        return {
            "Pi_lower": self.Pi_lower,
            "verdict": self.verdict,
            "levels": self.levels,
            "reason": self.reason,
            "log_exact_part": finite_or_str(self.log_exact_part),
            "tail_sum_bound": self.tail_sum_bound,
            "tail_depth": self.tail_depth,
            "delta": self.delta,
        }


def _majorant_tail(alpha: AlphaSeq, K: int, log_eps_K: float, c9: float,
                   max_steps: int = 64, floor: float = -1e6):
    """Sum of the factor-9 majorant started at ``eps(K)``.

    Returns ``(sum, steps)`` or ``None`` when the majorant does not collapse
    within ``max_steps`` (it must stay below ``min(c9, 1)`` and reach
    ``log eps < floor``; beyond that point the terms are below double
    precision and are dropped).
    """
    log_c9 = math.log(c9) if math.isfinite(c9) else math.inf
    le = log_eps_K
    total = 0.0
    log9 = math.log(9.0)
    for j in range(K, K + max_steps):
        if le > min(log_c9, 0.0):
            return None
        total += math.exp(le)
        if le < floor:
            return total, j - K + 1
        la, lb = alpha.log_value(j + 1), alpha.log_value(j + 2)
        if la == -math.inf or lb == -math.inf:
            return None
        le = log9 + la - lb + 2.0 * le
    return None


def survival_product(delta: float, alpha, tolerance: float = 1e-8, max_levels: int = 200,
                     diverge_run: int = 10) -> SurvivalProduct:
    """Certified lower value for ``Pi(delta) = prod_k (1 - xi(k))``.

    The recursion is run exactly until ``xi(k) < tolerance``.  From there
    ``xi(j) <= 3 eps(j)`` and ``eps(j)`` is dominated by the factor-9
    majorant (valid wherever ``g(eps) <= 9 eps^2``), so with
    ``-log(1 - x) <= 2x`` on ``[0, 1/2]`` the remaining factors are bounded
    below by ``exp(-6 sum majorant)``.

    Verdicts: ``positive`` (certified value), ``zero-indicated`` (alpha
    vanishes beyond its support, or ``eps`` grew past 1 for ``diverge_run``
    consecutive levels) and ``truncated``.  ``zero-indicated`` is evidence,
    not a proof, except in the vanishing-alpha case.
    """
    if not delta > 0:
        raise ValueError(f"recovery rate must be positive, got {delta}")
    alpha = as_alpha(alpha)
    c9 = smallness_constants()["c9"]
    d, ld = float(delta), math.log(delta)
    log_pi = 0.0
    run, prev_le = 0, -math.inf
    end = alpha.support_end
    for k in range(max_levels):
        if end is not None and k + 1 > end:
            return SurvivalProduct(0.0, "zero-indicated", k,
                                   f"alpha vanishes beyond level {end}: xi pinned at 1/2 forever",
                                   log_exact_part=log_pi, delta=delta)
        la1 = alpha.log_value(k + 1) - k * LOG2
        le = ld - la1  # log eps(k)
        xi = _xi_step(alpha, k, d, ld)
        if xi < tolerance:
            tail = _majorant_tail(alpha, k, le, c9)
            if tail is not None:
                s, steps = tail
                lower = math.exp(log_pi - 6.0 * s)
                return SurvivalProduct(lower, "positive" if lower > 0 else "truncated", k,
                                       "tail bounded by factor-9 majorant",
                                       log_exact_part=log_pi, tail_sum_bound=s,
                                       tail_depth=steps, delta=delta)
        log_pi += math.log1p(-xi)
        run = run + 1 if (le > 0 and le > prev_le) else 0
        prev_le = le
        if run >= diverge_run:
            return SurvivalProduct(0.0, "zero-indicated", k + 1,
                                   f"eps increasing above 1 for {diverge_run} consecutive levels",
                                   log_exact_part=log_pi, delta=delta)
        d, ld = 2.0 * xi * d, LOG2 + _log_xi(alpha, k, ld) + ld
    return SurvivalProduct(0.0, "truncated", max_levels, "max_levels reached without resolution",
                           log_exact_part=log_pi, delta=delta)


# ---------------------------------------------------------------------------
# eps-tilde and F_eta
# ---------------------------------------------------------------------------


def _positive_logs(alpha: AlphaSeq, count: int) -> list[float]:
    logs = [alpha.log_value(k) for k in range(1, count + 1)]
    if any(v == -math.inf for v in logs):
        raise ValueError("a zero alpha was encountered; the log-domain formulas need alpha_k > 0")
    return logs


def eps_tilde_bounds(delta: float, alpha, n: int, factor: float = 9.0) -> dict:
    """Doubling majorant/minorant ``e(k+1) = c (alpha_{k+1}/alpha_{k+2}) e(k)^2``
    with ``e(0) = delta/alpha_1`` and its closed form

        e(n) = (1/c) (c delta)^(2^n) / (alpha_{n+1} prod_{k=1}^n alpha_k^(2^(n-k))),

    both in the log domain, compared against the true ``eps(k)``.  With
    ``c = 9`` the sequence dominates ``eps`` wherever it stays below the
    smallness constant for 9; with ``c = 7`` it is dominated by ``eps`` while
    ``eps`` stays below the constant for 7.
    """
    if factor not in (7, 9, 7.0, 9.0):
        raise ValueError("factor must be 7 or 9")
    alpha = as_alpha(alpha)
    la = _positive_logs(alpha, n + 2)
    lc = math.log(factor)
    it = [math.log(delta) - la[0]]
    for k in range(n):
        it.append(lc + la[k] - la[k + 1] + 2.0 * it[k])
    closed = []
    for m in range(n + 1):
        val = -lc + 2.0 ** m * (lc + math.log(delta)) - la[m]
        val -= sum(2.0 ** (m - k) * la[k - 1] for k in range(1, m + 1))
        closed.append(val)
    rel = max(abs(math.expm1(a - b)) for a, b in zip(it, closed))

    tr = recursion(delta, alpha, n + 1)
    true_le = tr.log_eps_seq[: n + 1]
    consts = smallness_constants()
    if factor == 9:
        c = consts["c9"]
        applicable = all(v <= (math.log(c) if math.isfinite(c) else math.inf) for v in it)
        holds = all(t <= e + 1e-12 * abs(e) for t, e in zip(true_le, it))
    else:
        c = consts["c7"]
        applicable = all(v <= math.log(c) for v in true_le)
        holds = all(e <= t + 1e-12 * abs(t) for t, e in zip(true_le, it))
    return {
        "factor": factor,
        "log_iterated": it,
        "log_closed_form": closed,
        "iterated": [_exp(v) for v in it],
        "closed_form": [_exp(v) for v in closed],
        "max_rel_diff": rel,
        "log_eps_true": true_le,
        "smallness_constant": c,
        "applicable": applicable,
        "domination_holds": holds,
    }


def log_F_eta(alpha, eta: float, n: int) -> float:
    if not eta > 0:
        raise ValueError("eta must be positive")
    la = _positive_logs(as_alpha(alpha), n + 1)
    s = 2.0 ** n * math.log(eta) - la[n]
    s -= math.fsum(2.0 ** (n - k) * la[k - 1] for k in range(1, n + 1))
    return s


def F_eta(alpha, eta: float, n: int) -> float:
    """``eta^(2^n) / (alpha_{n+1} prod_{k=1}^n alpha_k^(2^(n-k)))``, accumulated
    in the log domain and exponentiated at the end (may be ``inf`` or 0)."""
    return _exp(log_F_eta(alpha, eta, n))


def F_eta_direct(alpha, eta: float, n: int) -> float:
    """Plain floating-point evaluation; overflows quickly, used as a check."""
    a = as_alpha(alpha)
    den = a.value(n + 1)
    for k in range(1, n + 1):
        den *= a.value(k) ** (2 ** (n - k))
    return eta ** (2 ** n) / den


def summability_scan(alpha, eta: float, depth: int = 60) -> dict:
    """Is ``F_eta(n)`` eventually below 1?  Uses the equivalent criterion
    ``log eta - sum_k 2^-k log alpha_k < 0`` with the sum truncated at
    ``depth``, alongside the actual ``log F_eta(n)`` values."""
    alpha = as_alpha(alpha)
    la = _positive_logs(alpha, depth + 1)
    series = math.fsum(2.0 ** -k * la[k - 1] for k in range(1, depth + 1))
    crit = math.log(eta) - series
    logs = [log_F_eta(alpha, eta, n) for n in range(0, depth)]
    return {
        "eta": eta,
        "depth": depth,
        "log_alpha_series": series,
        "criterion": crit,
        "eventually_below_one": crit < 0,
        "log_F": logs,
    }


# ---------------------------------------------------------------------------
# extinction certificate
# ---------------------------------------------------------------------------


@dataclass
class ExtinctionCertificate:
    """Depth ``n_witness`` at which the expected number of offspring types,
    ``(1 - 1/N)(1 + 1/delta)^(N^n) beta_{n+1}`` in time units where
    ``|a| = 1``, is below one."""

    n_witness: int
    offspring_value: float
    log_offspring: float
    delta: float
    N: int
    alpha: AlphaSeq

    def recompute_log(self) -> float:
        return _log_offspring(self.delta, self.alpha, self.N, self.n_witness)

    def is_valid(self) -> bool:
        return self.recompute_log() < 0

    def to_json(self) -> dict:
        return {
            "n_witness": self.n_witness,
            "offspring_value": self.offspring_value,
            "log_offspring": finite_or_str(self.log_offspring),
            "delta": self.delta,
            "N": self.N,
            "alpha": self.alpha.to_json(),
        }


def _log_offspring(delta: float, alpha: AlphaSeq, N: int, n: int) -> float:
    log_abs_a = math.log1p(-1.0 / N) + alpha.log_tail(1)
    if log_abs_a == -math.inf:
        return -math.inf  # no infections at all
    log_dhat = math.log(delta) - log_abs_a
    log_beta_hat = alpha.log_tail(n + 1) - log_abs_a
    if log_beta_hat == -math.inf:
        return -math.inf
    # log(1 + 1/dhat) without overflow for tiny dhat
    log_growth = float(np.logaddexp(0.0, -log_dhat))
    return math.log1p(-1.0 / N) + math.exp(n * math.log(N)) * log_growth + log_beta_hat


def certify_extinction(delta: float, alpha, N: int = 2, max_depth: int = 40):
    """First ``n in 1..max_depth`` with offspring bound below 1, or None."""
    if not delta > 0:
        raise ValueError(f"recovery rate must be positive, got {delta}")
    alpha = as_alpha(alpha)
    for n in range(1, max_depth + 1):
        lo = _log_offspring(delta, alpha, N, n)
        if lo < 0:
            return ExtinctionCertificate(n, math.exp(lo), lo, delta, N, alpha)
    return None


# ---------------------------------------------------------------------------
# comparison reduction (general N -> N = 2)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonAlpha(AlphaSeq):
    """Binary-lattice rates ``alpha''_k = gamma''_k 2^k`` obtained from
    ``gamma_k = alpha_k N^-k`` by taking minima over blocks of ``m`` levels
    and repeating each minimum ``n`` times."""

    base: AlphaSeq
    N: int
    m: int
    n: int
    family = "comparison"

    def log_gamma(self, k: int) -> float:
        return self.base.log_value(k) - k * math.log(self.N)

    def block_argmin(self, l: int) -> int:
        """``i_l``: level in ``{lm+1, ..., lm+m}`` with the smallest gamma."""
        cands = range(l * self.m + 1, l * self.m + self.m + 1)
        return min(cands, key=lambda i: (self.log_gamma(i), i))

    def log_gamma_dprime(self, k: int) -> float:
        return self.log_gamma(self.block_argmin((k - 1) // self.n))

    def log_value(self, k):
        if k < 1:
            raise ValueError(f"alpha index must be >= 1, got {k}")
        return self.log_gamma_dprime(k) + k * LOG2

    def log_tail(self, k, max_terms: int = 100_000):
        k = max(k, 1)
        lead = self.log_value(k)
        if lead == -math.inf:
            return -math.inf
        acc, small = 1.0, 0
        for j in range(k + 1, k + max_terms):
            rel = self.log_value(j) - lead
            if rel > 700:
                raise ValueError("divergent tail sum")
            term = math.exp(rel)
            acc += term
            small = small + 1 if term < 1e-18 * acc else 0
            if small >= 2 * self.n + 2:
                break
        return lead + math.log(acc)

    @property
    def support_end(self):
        end = self.base.support_end
        if end is None:
            return None
        # first block whose minimum is zero kills everything from there on
        l = 0
        while l * self.m + self.m <= end:
            l += 1
        return l * self.n

    def to_json(self):
        return {"family": "comparison", "base": self.base.to_json(), "N": self.N,
                "m": self.m, "n": self.n}

    @classmethod
    def from_json(cls, obj):
        return cls(alpha_from_json(obj["base"], obj["N"]), int(obj["N"]), int(obj["m"]), int(obj["n"]))

    def label(self):
        return f"comparison({self.base.label()},N={self.N},m={self.m},n={self.n})"


def _is_power_of_two(N: int) -> bool:
    return N >= 2 and N & (N - 1) == 0


def sandwich(N: int, N_prime: float, max_m: int = 64) -> tuple[int, int]:
    """Smallest ``m`` (and the matching ``n``) with ``N'^m <= 2^n <= N^m``."""
    if _is_power_of_two(N) and N_prime == N:
        return 1, N.bit_length() - 1
    if not 1 < N_prime < N:
        raise ValueError(f"need 1 < N' < N when N' != N, got N={N}, N'={N_prime}")
    for m in range(1, max_m + 1):
        n = max(1, math.ceil(m * math.log2(N_prime) - 1e-12))
        if N_prime ** m <= 2 ** n <= N ** m:
            return m, n
    raise ValueError(f"no (m, n) with m <= {max_m} satisfies N'^m <= 2^n <= N^m")


@dataclass
class ComparisonReduction:
    N: int
    N_prime: float
    m: int
    n: int
    alpha: AlphaSeq
    alpha_dprime: ComparisonAlpha
    hypothesis: dict = field(default_factory=dict)

    def gamma(self, k: int) -> float:
        return math.exp(self.alpha_dprime.log_gamma(k))

    def gamma_prime(self, k: int) -> float:
        l = (k - 1) // self.m
        return math.exp(self.alpha_dprime.log_gamma(self.alpha_dprime.block_argmin(l)))

    def gamma_dprime(self, k: int) -> float:
        return math.exp(self.alpha_dprime.log_gamma_dprime(k))

    def check_domination(self, depth_blocks: int = 8) -> dict:
        """Exhaustive check, over the first ``depth_blocks`` blocks, that every
        binary-lattice rate is at most each original rate it stands in for,
        and that the blockwise-minimum equalities hold."""
        ad = self.alpha_dprime
        dom_ok, eq_ok = True, True
        worst = -math.inf
        for l in range(depth_blocks):
            block = range(l * self.m + 1, l * self.m + self.m + 1)
            lmin = min(ad.log_gamma(i) for i in block)
            i_l = ad.block_argmin(l)
            eq_ok &= ad.log_gamma(i_l) == lmin
            for r in range(1, self.n + 1):
                k = l * self.n + r
                eq_ok &= ad.log_gamma_dprime(k) == ad.log_gamma(i_l)
                for j in block:
                    diff = ad.log_gamma_dprime(k) - ad.log_gamma(j)
                    worst = max(worst, diff)
                    dom_ok &= diff <= 0
        return {"domination": bool(dom_ok), "block_min_equalities": bool(eq_ok),
                "max_log_ratio": worst, "blocks": depth_blocks}

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "N_prime": self.N_prime,
            "m": self.m,
            "n": self.n,
            "sandwich": [self.N_prime ** self.m, 2 ** self.n, self.N ** self.m],
            "alpha": self.alpha.to_json(),
            "alpha_dprime": self.alpha_dprime.to_json(),
            "hypothesis_verdict": self.hypothesis.get("verdict"),
        }


def default_N_prime(N: int) -> float:
    if _is_power_of_two(N):
        return float(N)
    low = 2 ** (N.bit_length() - 1)
    return 0.5 * (low + N)


def compare_reduce(alpha, N: int, N_prime: float | None = None,
                   diagnostics_depth: int = 40) -> ComparisonReduction:
    """Reduce a rate sequence on ``Omega_N`` to one on ``Omega_2`` whose
    survival implies survival of the original."""
    alpha = as_alpha(alpha)
    if N_prime is None:
        N_prime = default_N_prime(N)
    if _is_power_of_two(N) and N_prime != N:
        if not 1 < N_prime < N:
            raise ValueError(f"need 1 < N' < N, got N={N}, N'={N_prime}")
    elif not _is_power_of_two(N) and not 1 < N_prime < N:
        raise ValueError(f"N={N} is not a power of 2: need 1 < N' < N, got N'={N_prime}")
    m, n = sandwich(N, N_prime)
    red = ComparisonReduction(N=N, N_prime=N_prime, m=m, n=n, alpha=alpha,
                              alpha_dprime=ComparisonAlpha(alpha, N, m, n))
    red.hypothesis = condition_diagnostics(alpha, N_prime, diagnostics_depth)
    return red


# ---------------------------------------------------------------------------
# bracketing the critical recovery rate
# ---------------------------------------------------------------------------


def _bisect_log(pred, good: float, bad: float, iterations: int, rtol: float) -> float:
    """Boundary between ``good`` (pred true) and ``bad`` (pred false) on a log
    scale; returns the last value known to satisfy ``pred``."""
    for _ in range(iterations):
        if abs(bad - good) <= rtol * min(good, bad):
            break
        mid = math.sqrt(good * bad)
        if pred(mid):
            good = mid
        else:
            bad = mid
    return good


def bracket_delta_c(alpha, N: int = 2, N_prime: float | None = None, delta_min: float = 1e-12,
                    max_depth: int = 40, max_levels: int = 200, iterations: int = 40,
                    rtol: float = 1e-6, mc: dict | None = None) -> dict:
    """Two-sided bracket on the critical recovery rate.

    ``lower``: largest recovery rate (to ``rtol``) whose survival product is
    certified positive, computed on ``Omega_2`` (directly for ``N = 2``, via
    ``compare_reduce`` otherwise).  ``upper``: smallest recovery rate whose
    extinction is certified by the branching comparison.  Both searches scan
    a decade grid and then bisect in log scale, relying on monotonicity in
    ``delta``.  ``mc`` optionally requests a non-rigorous finite-size point
    estimate (keys ``n``, ``t``, ``replicas``, ``seed``, ``threshold``).
    """
    alpha = as_alpha(alpha)
    red = None
    lower_alpha = alpha
    if N != 2:
        red = compare_reduce(alpha, N, N_prime)
        lower_alpha = red.alpha_dprime

    abs_a = (1.0 - 1.0 / N) * alpha.total()
    top = 10.0 ** math.ceil(math.log10(max(abs_a, 1e-300) * 1e3)) if abs_a > 0 else 1.0
    grid = [top * 10.0 ** -j for j in range(0, 400) if top * 10.0 ** -j >= delta_min]

    def positive(d):
        return survival_product(d, lower_alpha, max_levels=max_levels).verdict == "positive"

    def certified(d):
        return certify_extinction(d, alpha, N, max_depth) is not None

    lower, prev = 0.0, None
    for d in grid:
        if positive(d):
            lower = d if prev is None else _bisect_log(positive, d, prev, iterations, rtol)
            break
        prev = d

    floor_hit = False
    end = alpha.support_end
    if abs_a == 0 or (end is not None and end >= 0 and alpha.log_tail(end + 1) == -math.inf):
        upper = 0.0  # beta vanishes eventually: every delta > 0 is certified
    else:
        upper = math.inf
        last_good = None
        for d in grid:
            if certified(d):
                last_good = d
                continue
            if last_good is not None:
                upper = _bisect_log(certified, last_good, d, iterations, rtol)
            break
        else:
            if last_good is not None:
                upper, floor_hit = last_good, True

    out = {
        "alpha": alpha.to_json(),
        "family": alpha.label(),
        "N": N,
        "lower": lower,
        "upper": upper,
        "upper_at_grid_floor": floor_hit,
        "mc_estimate": None,
        "max_depth": max_depth,
        "max_levels": max_levels,
        "delta_min": delta_min,
    }
    if red is not None:
        out["reduction"] = red.to_json()
    if mc:
        out["mc_estimate"] = _mc_point_estimate(alpha, N, lower, upper, **mc)
    return out


def _mc_point_estimate(alpha, N, lower, upper, n=3, t=5.0, replicas=2000, seed=0,
                       threshold=0.1, points=9):
    """Largest recovery rate on a log grid whose finite-``(n, t)`` survival
    estimate exceeds ``threshold``.  Non-rigorous: finite size and time."""
    from .lattice import RateModel
    from .simulate import estimate_survival, origin_config

    lo = lower if lower > 0 else (upper * 1e-3 if math.isfinite(upper) and upper > 0 else 1e-3)
    hi = upper if math.isfinite(upper) and upper > lo else lo * 1e3
    best = None
    for d in np.geomspace(lo, hi, points):
        est = estimate_survival(RateModel(N, float(d), alpha), n, origin_config(n, N), t, replicas, seed)
        if est["p_hat"] > threshold:
            best = float(d)
    return {"value": best, "n": n, "t": t, "replicas": replicas, "threshold": threshold,
            "rigorous": False}
