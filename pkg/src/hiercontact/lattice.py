"""Hierarchical-group arithmetic, infection-rate families and the
finite-depth diagnostics for the extinction/survival conditions.

Sites of the finite lattice ``Omega^n`` are digit sequences
``(i_0, ..., i_{n-1})`` in base ``N``, stored little-endian (``i_0`` is the
finest level).  The integer encoding ``sum_k i_k N^k`` is used everywhere a
flat index is needed, in particular as the bit position of a site inside a
configuration bitmask.

The infinite group is never materialised; every simulation or exact
computation runs on ``Omega^n``.  The truncated process started inside
``Omega^n`` can be coupled below the infinite one (sites outside the block
are simply never infected), which is what justifies finite-depth work.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Address",
    "AlphaSeq",
    "Explicit",
    "DoubleExp",
    "EffectiveDim",
    "Geometric",
    "RateModel",
    "hdist",
    "add_mod",
    "concat",
    "block_members",
    "site_index",
    "address_from_index",
    "restrict",
    "infection_rate",
    "total_infection_rate",
    "beta_tail",
    "log_beta_tail",
    "condition_diagnostics",
    "alpha_from_json",
    "parse_alpha",
    "finite_or_str",
]


# ---------------------------------------------------------------------------
# addresses
# ---------------------------------------------------------------------------


def _strip(digits: Sequence[int]) -> tuple[int, ...]:
    d = list(digits)
    while d and d[-1] == 0:
        d.pop()
    return tuple(d)


@dataclass(frozen=True)
class Address:
    """A site of the hierarchical group with freedom ``base``.

    Digits are canonicalised by stripping trailing zeros, so two addresses
    compare equal iff they denote the same group element and ``norm`` is
    just the length of the digit tuple.
    """

    digits: tuple[int, ...]
    base: int = 2

    def __post_init__(self):
        if self.base < 2:
            raise ValueError(f"base must be >= 2, got {self.base}")
        for d in self.digits:
            if not 0 <= d < self.base:
                raise ValueError(f"digit {d} out of range for base {self.base}")
        object.__setattr__(self, "digits", _strip(self.digits))

    @classmethod
    def origin(cls, base: int = 2) -> "Address":
        return cls((), base)

    @property
    def norm(self) -> int:
        return len(self.digits)

    def digit(self, k: int) -> int:
        return self.digits[k] if k < len(self.digits) else 0

    def padded(self, n: int) -> tuple[int, ...]:
        """Digits as an ``n``-tuple (element of ``Omega^n``)."""
        if self.norm > n:
            raise ValueError(f"address {self.digits} does not fit in Omega^{n}")
        return self.digits + (0,) * (n - self.norm)

    def __repr__(self):
        return f"Address({self.digits}, base={self.base})"


def _check_base(i: Address, j: Address):
    if i.base != j.base:
        raise ValueError(f"mismatched bases {i.base} and {j.base}")


def hdist(i: Address, j: Address) -> int:
    """Hierarchical distance ``|i - j|``: one plus the highest level at which
    the digits differ (0 when ``i == j``)."""
    _check_base(i, j)
    for k in range(max(i.norm, j.norm) - 1, -1, -1):
        if i.digit(k) != j.digit(k):
            return k + 1
    return 0


def add_mod(i: Address, j: Address) -> Address:
    """Componentwise addition modulo the base (no carries)."""
    _check_base(i, j)
    n = max(i.norm, j.norm)
    return Address(tuple((i.digit(k) + j.digit(k)) % i.base for k in range(n)), i.base)


def neg(i: Address) -> Address:
    return Address(tuple((-d) % i.base for d in i.digits), i.base)


def concat(i: Address, m: int, j: Address, n: int) -> Address:
    """``i o j`` for ``i`` in ``Omega^m`` and ``j`` in ``Omega^n``."""
    _check_base(i, j)
    return Address(i.padded(m) + j.padded(n), i.base)


def block_members(m: int, j: Address, n: int) -> list[Address]:
    """The ``m``-block ``B_m(j) = {i o j : i in Omega^m}`` inside ``Omega^n``.

    Sites are returned in increasing ``site_index`` order, which is a
    contiguous range of length ``N^m``.
    """
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    N = j.base
    j.padded(n - m)  # range check
    start = site_index(j, n - m) * N**m
    return [address_from_index(start + s, n, N) for s in range(N**m)]


def site_index(i: Address, n: int) -> int:
    """Flat index ``sum_k i_k N^k`` of ``i`` in ``Omega^n``."""
    idx = 0
    for d in reversed(i.padded(n)):
        idx = idx * i.base + d
    return idx


def address_from_index(idx: int, n: int, N: int = 2) -> Address:
    if not 0 <= idx < N**n:
        raise ValueError(f"index {idx} out of range for Omega^{n} with N={N}")
    digits = []
    for _ in range(n):
        idx, d = divmod(idx, N)
        digits.append(d)
    return Address(tuple(digits), N)


def restrict(x, i: Address, m: int, n: int):
    """Configuration ``x_i`` on ``Omega^m`` read off the ``m``-block of
    ``Omega^n`` with index ``i``: ``x_i(j) = x(j o i)``.

    ``x`` is any sequence of length ``N^n`` indexed by ``site_index``; the
    block is contiguous so this is a slice.
    """
    N = i.base
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    if len(x) != N**n:
        raise ValueError(f"configuration has {len(x)} sites, expected {N**n}")
    start = site_index(i, n - m) * N**m
    return x[start:start + N**m]


def index_hdist(s: int, t: int, N: int = 2) -> int:
    """Hierarchical distance between flat site indices."""
    if N == 2:
        return (s ^ t).bit_length()
    k = 0
    while s != t:
        s //= N
        t //= N
        k += 1
    return k


# ---------------------------------------------------------------------------
# infection-rate families
# ---------------------------------------------------------------------------

_LOG_TINY = math.log(1e-18)


class AlphaSeq:
    """Nonnegative sequence ``alpha_1, alpha_2, ...`` of level rates.

    Subclasses provide ``log_value``; everything with large exponents is
    evaluated in the log domain.
    """

    family = "abstract"
    #: last index with a possibly nonzero value, None if unbounded
    support_end: int | None = None

    def log_value(self, k: int) -> float:
        raise NotImplementedError

    def value(self, k: int) -> float:
        if k < 1:
            raise ValueError(f"alpha index must be >= 1, got {k}")
        return math.exp(self.log_value(k))

    def __call__(self, k: int) -> float:
        return self.value(k)

    def values(self, n: int) -> list[float]:
        """``[alpha_1, ..., alpha_n]``."""
        return [self.value(k) for k in range(1, n + 1)]

    def log_tail(self, k: int) -> float:
        """``log beta_k = log sum_{m >= k} alpha_m``."""
        raise NotImplementedError

    def total(self) -> float:
        return math.exp(self.log_tail(1))

    def to_json(self) -> dict:
        raise NotImplementedError

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def label(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Explicit(AlphaSeq):
    """Finite list ``alpha_1..alpha_K``; zero beyond ``K``."""

    coeffs: tuple[float, ...]
    family = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(a) for a in self.coeffs))
        if any(a < 0 or not math.isfinite(a) for a in self.coeffs):
            raise ValueError("explicit alpha values must be finite and nonnegative")

    @property
    def support_end(self):
        nz = [k for k, a in enumerate(self.coeffs, 1) if a > 0]
        return nz[-1] if nz else 0

    def value(self, k):
        if k < 1:
            raise ValueError(f"alpha index must be >= 1, got {k}")
        return self.coeffs[k - 1] if k <= len(self.coeffs) else 0.0

    def log_value(self, k):
        a = self.value(k)
        return math.log(a) if a > 0 else -math.inf

    def log_tail(self, k):
        s = math.fsum(self.coeffs[max(k, 1) - 1:])
        return math.log(s) if s > 0 else -math.inf

    def to_json(self):
        return {"family": "explicit", "values": list(self.coeffs)}

    def label(self):
        return "explicit:" + ",".join(repr(a) for a in self.coeffs)


@dataclass(frozen=True)
class Geometric(AlphaSeq):
    """``alpha_k = q^k`` with ``0 < q < 1``."""

    q: float
    family = "geometric"

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError(f"geometric family needs 0 < q < 1, got {self.q}")

    def log_value(self, k):
        return k * math.log(self.q)

    def log_tail(self, k):
        # q^k / (1 - q)
        return self.log_value(k) - math.log1p(-self.q)

    def to_json(self):
        return {"family": "geometric", "q": self.q}

    def label(self):
        return f"geometric:{self.q!r}"


@dataclass(frozen=True)
class EffectiveDim(AlphaSeq):
    """``alpha_k = N^(-2k/d)``: random walk with effective dimension ``d``."""

    d: float
    N: int = 2
    family = "effective_dim"

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"effective dimension must be positive, got {self.d}")
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")

    @property
    def q(self) -> float:
        return self.N ** (-2.0 / self.d)

    def log_value(self, k):
        return -k * (2.0 / self.d) * math.log(self.N)

    def log_tail(self, k):
        return self.log_value(k) - math.log1p(-self.q)

    def to_json(self):
        return {"family": "effective_dim", "d": self.d, "N": self.N}

    def label(self):
        return f"effective_dim:{self.d!r}"


@dataclass(frozen=True)
class DoubleExp(AlphaSeq):
    """``alpha_k = exp(-theta^k)``; summable for ``theta > 1``."""

    theta: float
    family = "double_exp"

    def __post_init__(self):
        if not self.theta > 1:
            raise ValueError(f"double_exp needs theta > 1 for summability, got {self.theta}")

    def log_value(self, k):
        return -(self.theta ** k)

    def log_tail(self, k, max_terms: int = 10_000):
        # terms decay doubly exponentially; stop once the next term is below
        # 1e-18 of the running sum, then the remainder is < next/(1-ratio)
        k = max(k, 1)
        lead = self.log_value(k)
        acc = 1.0  # sum relative to the leading term
        for m in range(1, max_terms):
            rel = self.log_value(k + m) - lead
            if rel < _LOG_TINY + math.log(acc):
                break
            acc += math.exp(rel)
        return lead + math.log(acc)

    def to_json(self):
        return {"family": "double_exp", "theta": self.theta}

    def label(self):
        return f"double_exp:{self.theta!r}"


def alpha_from_json(obj, N: int = 2) -> AlphaSeq:
    """Inverse of ``AlphaSeq.to_json``.  ``effective_dim`` without an explicit
    ``N`` uses the lattice freedom passed in."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    fam = obj.get("family")
    if fam == "explicit":
        return Explicit(tuple(obj["values"]))
    if fam == "double_exp":
        return DoubleExp(float(obj["theta"]))
    if fam == "effective_dim":
        return EffectiveDim(d=float(obj["d"]), N=int(obj.get("N", N)))
    if fam == "geometric":
        return Geometric(float(obj["q"]))
    if fam == "comparison":
        from .bounds import ComparisonAlpha

        return ComparisonAlpha.from_json(obj)
    raise ValueError(f"unknown alpha family {fam!r}")


def parse_alpha(spec: str, N: int = 2) -> AlphaSeq:
    """Parse the inline form ``family:params`` used on the command line,
    e.g. ``geometric:0.5``, ``double_exp:1.5``, ``effective_dim:2``,
    ``explicit:2,1``.  A JSON object is accepted as well."""
    spec = spec.strip()
    if spec.startswith("{"):
        return alpha_from_json(spec, N)
    fam, sep, arg = spec.partition(":")
    if not sep:
        raise ValueError(f"rate family {spec!r} is not of the form family:params")
    try:
        if fam == "geometric":
            return Geometric(float(arg))
        if fam == "double_exp":
            return DoubleExp(float(arg))
        if fam == "effective_dim":
            return EffectiveDim(d=float(arg), N=N)
        if fam == "explicit":
            return Explicit(tuple(float(a) for a in arg.split(",") if a.strip()))
    except ValueError as exc:
        raise ValueError(f"bad rate family {spec!r}: {exc}") from None
    raise ValueError(f"unknown alpha family {fam!r}")


# ---------------------------------------------------------------------------
# rate model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateModel:
    """Contact process on ``Omega_N``: recovery rate ``delta`` and infection
    rates ``a(i,j) = alpha_{|i-j|} N^{-|i-j|}``."""

    N: int
    delta: float
    alpha: AlphaSeq

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if not self.delta >= 0 or not math.isfinite(self.delta):
            raise ValueError(f"recovery rate must be finite and >= 0, got {self.delta}")

    def rate_at_distance(self, k: int) -> float:
        return self.alpha.value(k) * float(self.N) ** (-k)

    def to_json(self) -> dict:
        return {"N": self.N, "delta": self.delta, "alpha": self.alpha.to_json()}


def infection_rate(model: RateModel, i: Address, j: Address) -> float:
    if i.base != model.N or j.base != model.N:
        raise ValueError("address base does not match model N")
    k = hdist(i, j)
    if k == 0:
        raise ValueError("infection rate is only defined for i != j")
    return model.rate_at_distance(k)


def total_infection_rate(model: RateModel, depth: int | None = None) -> float:
    """Outgoing infection rate per site, ``(1 - 1/N) sum_{k<=depth} alpha_k``
    (all levels when ``depth`` is None)."""
    if depth is None:
        s = model.alpha.total()
    else:
        s = math.fsum(model.alpha.values(depth))
    return (1.0 - 1.0 / model.N) * s


def log_beta_tail(alpha: AlphaSeq, k: int) -> float:
    if k < 1:
        raise ValueError(f"tail index must be >= 1, got {k}")
    return alpha.log_tail(k)


def beta_tail(alpha: AlphaSeq, k: int, truncation: int | None = None) -> float:
    """``beta_k = sum_{m >= k} alpha_m``.

    ``truncation`` caps the number of terms for the double-exponential family
    (otherwise the adaptive stopping rule applies); closed forms are used for
    the other families.
    """
    if k < 1:
        raise ValueError(f"tail index must be >= 1, got {k}")
    if truncation is not None and isinstance(alpha, DoubleExp):
        return math.exp(alpha.log_tail(k, max_terms=truncation))
    val = math.exp(alpha.log_tail(k))
    if not math.isfinite(val):
        raise ValueError("divergent tail sum")
    return val


# ---------------------------------------------------------------------------
# condition diagnostics
# ---------------------------------------------------------------------------


def finite_or_str(v: float):
    """JSON-safe float: non-finite values become the strings ``"inf"``,
    ``"-inf"`` or ``"nan"``."""
    if v is None:
        return None
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def condition_diagnostics(alpha: AlphaSeq, N: float, depth: int = 60) -> dict:
    """Finite-depth evidence for the two asymptotic conditions.

    Returns the sequence ``N^-k log(beta_k)`` (its liminf being ``-inf``
    forces extinction at every recovery rate) and the partial sums of
    ``N^-k log(alpha_k)`` (convergence gives a positive critical value),
    together with a verdict that is explicitly a heuristic: it looks only at
    the first ``depth`` levels.  ``N`` may be a real number so the
    non-power-of-two variant (``N' < N``) can be probed.
    """
    if depth < 2:
        raise ValueError("depth must be >= 2")
    logN = math.log(N)
    tail_seq, psums, incs = [], [], []
    s = 0.0
    for k in range(1, depth + 1):
        lb = alpha.log_tail(k)
        tail_seq.append(lb * math.exp(-k * logN) if lb > -math.inf else -math.inf)
        la = alpha.log_value(k)
        inc = la * math.exp(-k * logN) if la > -math.inf else -math.inf
        incs.append(inc)
        s = s + inc
        psums.append(s)

    running_min = list(np.minimum.accumulate(tail_seq))
    half = depth // 2
    late = tail_seq[half:]
    extinction = False
    if any(v == -math.inf for v in tail_seq):
        extinction = True
    elif all(b < a for a, b in zip(late, late[1:])):
        # still strictly decreasing and at least doubled in magnitude
        extinction = abs(tail_seq[-1]) >= 2.0 * abs(tail_seq[half - 1]) and tail_seq[-1] < -1.0

    survival = False
    if math.isfinite(psums[-1]):
        tail_incs = [abs(v) for v in incs[half:]]
        shrinking = all(b <= a for a, b in zip(tail_incs, tail_incs[1:]))
        survival = shrinking and tail_incs[-1] <= 1e-6 * (1.0 + abs(psums[-1]))

    if extinction and not survival:
        verdict = "extinction-condition-indicated"
    elif survival and not extinction:
        verdict = "survival-condition-indicated"
    else:
        verdict = "inconclusive"
    return {
        "alpha": alpha.to_json(),
        "N": N,
        "depth": depth,
        "tail_log_scaled": tail_seq,
        "tail_running_min": running_min,
        "log_alpha_partial_sums": psums,
        "verdict": verdict,
        "heuristic": True,
        "note": f"finite-depth evidence from levels 1..{depth}; not a proof",
    }
