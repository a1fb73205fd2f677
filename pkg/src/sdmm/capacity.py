"""Closed-form capacity values, bounds and rate bookkeeping.

Capacity statements that hold only in a limit (``K/M -> inf`` and the
like) are selected by explicit flags; finite parameters are never
thresholded into a limit regime.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .sharing import EQUIVALENT_VERSIONS, SIDE_INFO, VERSIONS

# asymptotic regime flags
K_OVER_MIN_LM = "K/min(L,M)->inf"
MAX_LM_OVER_K = "max(L,M)/K->inf"
K_OVER_M = "K/M->inf"
L_OVER_M = "L/M->inf"
M_OVER_L = "M/L->inf"
FLAGS = (K_OVER_MIN_LM, MAX_LM_OVER_K, K_OVER_M, L_OVER_M, M_OVER_L)

FLAG_ALIASES = {
    "k_over_min_lm": K_OVER_MIN_LM,
    "max_lm_over_k": MAX_LM_OVER_K,
    "k_over_m": K_OVER_M,
    "l_over_m": L_OVER_M,
    "m_over_l": M_OVER_L,
}

EXACT, UPPER_BOUND_ONLY, ZERO, OPEN = "exact", "upper_bound_only", "zero", "open"


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class CapacityResult:
    value: Optional[Fraction]
    status: str
    regime: str
    assumptions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.status == ZERO and self.value != 0:
            raise ValueError("zero status requires value 0")
        if self.value is not None and not 0 <= self.value <= 1:
            raise ValueError(f"capacity value {self.value} outside [0, 1]")


@dataclass(frozen=True)
class EntropyQuery:
    L: int
    K: int
    M: int
    conditioning: Optional[str] = None  # None, "A" or "B"

    def __post_init__(self):
        if min(self.L, self.K, self.M) < 1:
            raise ValueError("dimensions must be >= 1")
        if self.conditioning not in (None, "A", "B"):
            raise ValueError(f"conditioning must be None, 'A' or 'B', got {self.conditioning!r}")


def _geometric(ratio: Fraction, terms: int) -> Fraction:
    # summed term by term; a closed form would divide by zero at ratio == 1
    return sum((ratio ** i for i in range(terms)), Fraction(0))


def mm_xstpir_upper_bound(N: int, X: int, T: int, K: int, M: int) -> Fraction:
    """Upper bound on the capacity of multi-message X-secure T-private
    information retrieval (N servers, M of K messages)."""
    if min(N, X, T, K, M) < 0:
        raise CapacityError("arguments must be non-negative")
    if M == 0 or M > K:
        raise CapacityError(f"need 1 <= M <= K, got M={M}, K={K}")
    if N < 1:
        raise CapacityError("need N >= 1")
    if N <= X:
        return Fraction(0)
    if N <= X + T:
        return Fraction(M * (N - X), K * N)
    return Fraction(N - X, N) / _geometric(Fraction(T, N - X), K // M)


def product_entropy_formula(query: EntropyQuery) -> int:
    """Limiting entropy (q-ary units, q -> inf) of ``AB`` for uniform ``A``, ``B``."""
    L, K, M = query.L, query.K, query.M
    if query.conditioning == "A":
        return min(L * M, K * M)
    if query.conditioning == "B":
        return min(L * M, L * K)
    if K >= min(L, M):
        return L * M
    return L * K + K * M - K * K


def rate_numerator(config, product: str = "matrix") -> int:
    """``S * H(AB | side info)`` for a batch of ``S`` products."""
    if product == "hadamard":
        return config.S * config.L * config.M
    cond = SIDE_INFO[config.version]
    return config.S * product_entropy_formula(EntropyQuery(config.L, config.K, config.M, cond))


def achieved_rate(ledger, config, product: str = "matrix"):
    """Rate of a session: desired symbols over downloaded symbols.

    Exact ``Fraction`` when every downloaded symbol is q-ary, float when the
    ledger carries log-valued costs.
    """
    total = ledger.total
    if not total or total <= 0:
        raise CapacityError("ledger is empty")
    num = rate_numerator(config, product)
    if isinstance(total, Fraction):
        return Fraction(num) / total
    return num / float(total)


def normalize_version(version: str, L: int, K: int, M: int) -> tuple[str, int, int, int]:
    """Map a version to one of the five canonical ones, transposing the
    problem (swap L and M) when A and B trade roles."""
    if version in VERSIONS:
        return version, L, K, M
    if version in EQUIVALENT_VERSIONS:
        return EQUIVALENT_VERSIONS[version], M, K, L
    raise CapacityError(f"unknown version {version!r}")


def parse_flags(flags: Iterable[str]) -> frozenset[str]:
    out = set()
    for f in flags:
        f = f.strip()
        if not f:
            continue
        f = FLAG_ALIASES.get(f.lower(), f)
        if f not in FLAGS:
            raise CapacityError(f"unknown regime flag {f!r}")
        out.add(f)
    return frozenset(out)


def check_flags(L: int, K: int, M: int, flags: frozenset[str]) -> None:
    """Reject flag sets that cannot describe any sequence passing through
    the given finite dimensions."""
    if L_OVER_M in flags and M_OVER_L in flags:
        raise CapacityError("L/M and M/L cannot both diverge")
    finite = {
        K_OVER_MIN_LM: (K > min(L, M), "K > min(L, M)"),
        MAX_LM_OVER_K: (K < max(L, M), "K < max(L, M)"),
        K_OVER_M: (K > M, "K > M"),
        L_OVER_M: (L > M, "L > M"),
        M_OVER_L: (M > L, "M > L"),
    }
    for flag in flags:
        ok, need = finite[flag]
        if not ok:
            raise CapacityError(f"flag {flag} contradicts finite dimensions (needs {need})")


@dataclass(frozen=True)
class _Case:
    tag: str
    status: str
    value: Fraction
    assumptions: tuple[str, ...] = field(default=())


def _cases(version: str, L: int, K: int, M: int, N: int, X: int, flags: frozenset[str]) -> list[_Case]:
    one_minus = Fraction(N - X, N) if N > 0 else Fraction(0)
    cases: list[_Case] = []

    def add(cond, tag, status, value, *assume):
        # bound values are passed as callables: they are only defined when cond holds
        if cond:
            value = Fraction(value() if callable(value) else value)
            if status == EXACT and value == 0:
                status = ZERO
            cases.append(_Case(f"{version}:{tag}", status, value, tuple(assume)))

    mn = min(L, M)
    if version == "AB_phi":
        add(N <= X, "no-servers-beyond-collusion", ZERO, 0)
        add(N > X and K == 1, "inner-dim-one", EXACT, one_minus)
        add(2 * X >= N > X and K_OVER_MIN_LM in flags, "inner-dominant-low-N", ZERO, 0, K_OVER_MIN_LM)
        add(N > 2 * X and K_OVER_MIN_LM in flags, "inner-dominant", EXACT, Fraction(N - 2 * X, N), K_OVER_MIN_LM)
        add(N > X and K <= mn and MAX_LM_OVER_K in flags, "outer-dominant", EXACT, one_minus, MAX_LM_OVER_K)
        add(N > X and K < mn, "thin-inner-bound", UPPER_BOUND_ONLY, one_minus)
        add(2 * X >= N > X and K >= mn, "wide-inner-bound-low-N", UPPER_BOUND_ONLY, lambda: one_minus * Fraction(mn, K))
        add(N > 2 * X and K >= mn, "wide-inner-bound", UPPER_BOUND_ONLY,
            lambda: one_minus / _geometric(Fraction(X, N - X), K // mn))
    elif version == "B_A":
        add(N <= X, "no-servers-beyond-collusion", ZERO, 0)
        add(N > X, "n-above-x", EXACT, one_minus)
    elif version == "B_B":
        add(K <= M, "k-at-most-m", EXACT, 1)
        add(K > M and N <= X, "k-above-m-low-N", EXACT, Fraction(M, K))
        add(N > X and K_OVER_M in flags, "k-over-m-diverges", EXACT, one_minus, K_OVER_M)
        add(K > M and N > X, "k-above-m-bound", UPPER_BOUND_ONLY,
            lambda: 1 / _geometric(Fraction(X, N), K // M))
    elif version == "B_phi":
        add(N <= X, "no-servers-beyond-collusion", ZERO, 0)
        add(K >= L and N > X, "k-at-least-l", EXACT, one_minus)
        add(K < L and N > X and K_OVER_M in flags, "k-over-m-diverges", EXACT, one_minus, K_OVER_M)
        add(K <= M and N > X and L_OVER_M in flags, "l-over-m-diverges", EXACT, 1, L_OVER_M)
        add(K < L and N > X and M_OVER_L in flags, "m-over-l-diverges", EXACT, one_minus, M_OVER_L)
        add(L > K >= M and N > X, "l-above-k-bound", UPPER_BOUND_ONLY,
            lambda: 1 / _geometric(Fraction(X, N), K // M))
    elif version == "AB_B":
        add(N <= X, "no-servers-beyond-collusion", ZERO, 0)
        add(N > X and K <= M, "k-at-most-m", EXACT, one_minus)
        add(2 * X >= N > X and K > M, "k-above-m-low-N", EXACT, Fraction(M * (N - X), K * N))
        add(N > 2 * X and K > M and K_OVER_M in flags, "k-over-m-diverges", EXACT, Fraction(N - 2 * X, N), K_OVER_M)
        add(N > 2 * X and K > M, "k-above-m-bound", UPPER_BOUND_ONLY,
            lambda: one_minus / _geometric(Fraction(X, N - X), K // M))
    return cases


def matching_cases(version: str, L: int, K: int, M: int, N: int, X: int,
                   flags: Iterable[str] = ()) -> list[CapacityResult]:
    """Every characterization that applies, in precedence order."""
    flags = parse_flags(flags)
    if min(L, K, M, N) < 1 or X < 0:
        raise CapacityError("need L, K, M, N >= 1 and X >= 0")
    version, L, K, M = normalize_version(version, L, K, M)
    check_flags(L, K, M, flags)
    rank = {ZERO: 0, EXACT: 0, UPPER_BOUND_ONLY: 1}
    cases = sorted(_cases(version, L, K, M, N, X, flags), key=lambda c: rank[c.status])
    return [CapacityResult(c.value, c.status, c.tag, c.assumptions) for c in cases]


def sdmm_capacity(version: str, L: int, K: int, M: int, N: int, X: int,
                  flags: Iterable[str] = ()) -> CapacityResult:
    """Capacity (or best known upper bound) of one SDMM version.

    Exact characterizations win over bounds; with several bounds the
    tightest is returned. ``open`` means no characterization applies.
    """
    found = matching_cases(version, L, K, M, N, X, flags)
    if not found:
        return CapacityResult(None, OPEN, f"{normalize_version(version, L, K, M)[0]}:open")
    exact = [c for c in found if c.status in (EXACT, ZERO)]
    if exact:
        return exact[0]
    return min(found, key=lambda c: c.value)


@dataclass(frozen=True)
class Counterexample:
    simple_rate: Fraction
    prior_bound: Fraction
    exceeds: bool


def counterexample_check(L: int, K: int, M: int, N: int, X: int) -> Counterexample:
    """Compare the rate of retrieving A and B separately against the
    previously claimed two-sided capacity ``(1 - 2X/N)^+``."""
    if not (L == K == M and N == X + 1 and X > 1):
        raise CapacityError("requires L = K = M, N = X + 1 and X > 1")
    h = product_entropy_formula(EntropyQuery(L, K, M))
    simple = Fraction(h, L * K + K * M) * Fraction(N - X, N)
    prior = max(Fraction(0), 1 - Fraction(2 * X, N))
    return Counterexample(simple, prior, simple > prior)


def scalar_rate_expression(N: int, X: int, q: int) -> float:
    """Finite-q rate guaranteed by the scalar multiplication scheme,
    charging ``log_q 4(q-1)`` per server and ``2S log_q 2`` for zero flags."""
    S = N - X
    logq = lambda v: math.log(v) / math.log(q)
    return S * (q - 1) / q / (N * logq(4 * (q - 1)) + 2 * S * N * logq(2))
