"""Verification harness: exact security audits, product-entropy
measurement and rate-versus-capacity sweeps."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .capacity import (EXACT, FLAGS, ZERO, CapacityError, EntropyQuery, check_flags, product_entropy_formula,
                       sdmm_capacity)
from .field import is_prime, prime_factors
from .schemes import csa_scheme_session, general_scheme_session
from .sharing import (VERSIONS, ConfigError, NoiseBatch, SdmmConfig, SecretBatch, csa_points, csa_share,
                      general_points, general_share)

ENUMERATION_BUDGET = 10 ** 8
MI_TOLERANCE = 1e-12


class BudgetExceeded(RuntimeError):
    """An exhaustive enumeration would exceed the configured budget."""

    def __init__(self, required: int, budget: int, what: str = "enumeration"):
        super().__init__(f"{what} needs {required} states, budget is {budget}")
        self.required = required
        self.budget = budget


def _entropy_from_counts(counts: Iterable[int], total: int) -> float:
    """Plug-in entropy in nats of a distribution given by integer counts."""
    return math.log(total) - math.fsum(c * math.log(c) for c in counts if c) / total


# ---------------------------------------------------------------------------
# collusion audits


@dataclass(frozen=True)
class SubsetAudit:
    servers: tuple[int, ...]  # 1-indexed
    mi_a: float
    mi_b: float
    mi_joint: float
    independent: bool  # exact: p(secret, view) == p(secret) p(view) everywhere


@dataclass(frozen=True)
class AuditReport:
    scheme: str
    config: SdmmConfig
    subset_size: int
    subsets: tuple[SubsetAudit, ...]
    states: int

    @property
    def max_mi(self) -> float:
        return max(max(s.mi_a, s.mi_b, s.mi_joint) for s in self.subsets)

    @property
    def passed(self) -> bool:
        return self.max_mi <= MI_TOLERANCE

    def summary(self) -> str:
        c = self.config
        return (f"{self.scheme} L={c.L} K={c.K} M={c.M} N={c.N} X_A={c.X_A} X_B={c.X_B} "
                f"S={c.S} q={c.q} subsets={self.subset_size}")


def _share_generator(scheme: str, config: SdmmConfig, f_consts=None, alphas=None):
    """Matrix mapping the vector (A entries, B entries, A-noise, B-noise)
    to every server's share entries.

    Both encoders are linear over F_q, so the matrix is found by encoding
    each unit vector with the real encoder.
    """
    f = config.field
    S, L, K, M = config.S, config.L, config.K, config.M
    X_A, X_B = config.X_A, config.X_B
    a_sz, b_sz = L * K, K * M
    n_a, n_b = S * a_sz, S * b_sz
    n_z, n_zp = S * X_A * a_sz, S * X_B * b_sz
    dim = n_a + n_b + n_z + n_zp
    if scheme == "csa":
        dflt_f, dflt_a = csa_points(config.q, config.N, S)
        f_consts = dflt_f if f_consts is None else f_consts
        alphas = dflt_a if alphas is None else alphas
    else:
        alphas = general_points(config.N) if alphas is None else alphas

    def encode(vec):
        a = vec[:n_a].reshape(S, L, K)
        b = vec[n_a:n_a + n_b].reshape(S, K, M)
        z = vec[n_a + n_b:n_a + n_b + n_z].reshape(S, X_A, L, K)
        zp = vec[n_a + n_b + n_z:].reshape(S, X_B, K, M)
        batch = SecretBatch(tuple(a), tuple(b))
        noise = NoiseBatch(tuple(tuple(z[s]) for s in range(S)), tuple(tuple(zp[s]) for s in range(S)))
        if scheme == "csa":
            sh = csa_share(batch, noise, f_consts, alphas, f)
        elif scheme == "general":
            sh = general_share(batch, noise, alphas, f)
        else:
            raise ConfigError(f"audits cover the general and csa encoders, not {scheme!r}")
        # per server: A-share entries then B-share entries
        return [(np.concatenate([m.reshape(-1) for m in sh.a_shares[n]]),
                 np.concatenate([m.reshape(-1) for m in sh.b_shares[n]])) for n in range(config.N)]

    cols = [encode(np.eye(dim, dtype=np.int64)[i]) for i in range(dim)]
    gen_a = [np.stack([c[n][0] for c in cols], axis=1) for n in range(config.N)]
    gen_b = [np.stack([c[n][1] for c in cols], axis=1) for n in range(config.N)]
    return gen_a, gen_b, n_a, n_b, dim


def _pack(rows: np.ndarray, q: int) -> np.ndarray:
    """Encode each column of a (k, n) digit array as one integer key."""
    if q ** rows.shape[0] >= 1 << 62:
        raise ConfigError(f"{rows.shape[0]} symbols over F_{q} do not fit a 62-bit key")
    key = np.zeros(rows.shape[1], dtype=np.int64)
    for r in rows:
        key = key * q + r
    return key


def _mi_exact(joint: Counter, left: Counter, right: Counter, total: int) -> tuple[float, bool]:
    """Mutual information (nats) from joint/marginal counts; the flag says
    whether the joint factorizes exactly."""
    independent = True
    terms = []
    for (u, v), c in joint.items():
        ratio = Fraction(c * total, left[u] * right[v])
        if ratio != 1:
            independent = False
            terms.append(c * math.log(ratio))
    if independent:
        return 0.0, True
    return math.fsum(terms) / total, False


def audit_collusion(scheme: str, config: SdmmConfig, subset_size: int, *,
                    budget: int = ENUMERATION_BUDGET, f_consts=None, alphas=None,
                    chunk: int = 1 << 18) -> AuditReport:
    """Exhaustive audit of what ``subset_size`` colluding servers learn.

    Every (secret, noise) assignment is enumerated with equal weight; for
    each server subset the exact joint distribution of the secrets and the
    subset's shares yields ``I(A; A~)``, ``I(B; B~)`` and the joint
    ``I(A, B; A~, B~)`` in q-ary units.
    """
    if not 1 <= subset_size <= config.N:
        raise ConfigError(f"subset size must lie in 1..{config.N}")
    q = config.q
    gen_a, gen_b, n_a, n_b, dim = _share_generator(scheme, config, f_consts, alphas)
    states = q ** dim
    if states > budget:
        raise BudgetExceeded(states, budget, f"audit of {dim} symbols over F_{q}")
    subsets = list(itertools.combinations(range(config.N), subset_size))
    counters = {t: [Counter(), Counter(), Counter(), Counter(), Counter(), Counter(), Counter(), Counter(), Counter()]
                for t in subsets}
    # secret digits are the most significant, noise innermost
    for start in range(0, states, chunk):
        idx = np.arange(start, min(states, start + chunk), dtype=np.int64)
        digits = np.empty((dim, idx.size), dtype=np.int64)
        rem = idx.copy()
        for d in range(dim - 1, -1, -1):
            digits[d] = rem % q
            rem //= q
        key_a = _pack(digits[:n_a], q)
        key_b = _pack(digits[n_a:n_a + n_b], q)
        key_ab = _pack(digits[:n_a + n_b], q)
        for t in subsets:
            va = np.concatenate([(gen_a[n] @ digits) % q for n in t])
            vb = np.concatenate([(gen_b[n] @ digits) % q for n in t])
            view_a, view_b = _pack(va, q), _pack(vb, q)
            view_ab = _pack(np.concatenate([va, vb]), q)
            c = counters[t]
            for i, (sec, view) in enumerate(((key_a, view_a), (key_b, view_b), (key_ab, view_ab))):
                pairs = np.stack([sec, view], axis=1)
                uniq, cnt = np.unique(pairs, axis=0, return_counts=True)
                for (u, v), k in zip(uniq.tolist(), cnt.tolist()):
                    c[3 * i][(u, v)] += k
                for arr, slot in ((sec, 3 * i + 1), (view, 3 * i + 2)):
                    u2, k2 = np.unique(arr, return_counts=True)
                    for u, k in zip(u2.tolist(), k2.tolist()):
                        c[slot][u] += k
    logq = math.log(q)
    results = []
    for t in subsets:
        c = counters[t]
        mis, indep = [], True
        for i in range(3):
            mi, ok = _mi_exact(c[3 * i], c[3 * i + 1], c[3 * i + 2], states)
            mis.append(mi / logq)
            indep = indep and ok
        results.append(SubsetAudit(tuple(n + 1 for n in t), *mis, indep))
    return AuditReport(scheme, config, subset_size, tuple(results), states)


def audit_config(scheme: str, N: int, X: int, q: int, *, L: int = 1, K: int = 1, M: int = 1,
                 S: Optional[int] = None) -> SdmmConfig:
    """Config for a symmetric audit (``X_A = X_B = X``).

    ``S`` defaults to the largest batch the encoder supports; the general
    encoder also accepts smaller batches.
    """
    if scheme == "csa":
        limit = N - 2 * X
    elif scheme == "general":
        limit = N - X
    else:
        raise ConfigError(f"audits cover the general and csa encoders, not {scheme!r}")
    S = limit if S is None else S
    if not 1 <= S <= limit:
        raise ConfigError(f"{scheme} encoder needs 1 <= S <= {limit} at N={N}, X={X}")
    config = SdmmConfig(L, K, M, N, X, X, S, q)
    if scheme == "csa":
        csa_points(q, N, S)
        if q < N + S + 1:
            raise ConfigError(f"CSA encoder needs q > N + S, got q={q}")
    elif q <= N:
        raise ConfigError(f"general encoder needs {N} distinct nonzero points, F_{q} has {q - 1}")
    return config


# ---------------------------------------------------------------------------
# product entropy


class SmallField:
    """Table-driven arithmetic for a finite field of order ``p^m``.

    Elements are integers ``0..q-1`` read as base-``p`` coefficient vectors
    of polynomials modulo a monic irreducible of degree ``m``. Only used to
    enumerate products over fields whose order is not prime.
    """

    def __init__(self, q: int):
        factors = prime_factors(q)
        if q < 2 or len(factors) != 1:
            raise ValueError(f"{q} is not a prime power")
        p = factors[0]
        m = round(math.log(q, p))
        if p ** m != q:
            raise ValueError(f"{q} is not a prime power")
        self.q, self.p, self.m = q, p, m
        digits = np.array([[(v // p ** i) % p for i in range(m)] for v in range(q)], dtype=np.int64)
        weights = p ** np.arange(m, dtype=np.int64)
        self.add = ((digits[:, None, :] + digits[None, :, :]) % p) @ weights
        if m == 1:
            self.modulus = None
            self.mul = np.outer(np.arange(q), np.arange(q)) % q
        else:
            self.modulus = self._irreducible(p, m)
            self.mul = np.array([[self._poly_mul(a, b) for b in range(q)] for a in range(q)], dtype=np.int64)

    def _to_poly(self, v: int) -> list[int]:
        return [(v // self.p ** i) % self.p for i in range(self.m)]

    def _from_poly(self, coeffs: Sequence[int]) -> int:
        return sum(c * self.p ** i for i, c in enumerate(coeffs))

    def _poly_mul(self, a: int, b: int) -> int:
        p, m = self.p, self.m
        x, y = self._to_poly(a), self._to_poly(b)
        prod = [0] * (2 * m - 1)
        for i, u in enumerate(x):
            for j, v in enumerate(y):
                prod[i + j] = (prod[i + j] + u * v) % p
        # reduce with the monic modulus (coefficients low to high, length m + 1)
        for d in range(2 * m - 2, m - 1, -1):
            c = prod[d]
            if c:
                for i, mc in enumerate(self.modulus):
                    prod[d - m + i] = (prod[d - m + i] - c * mc) % p
        return self._from_poly(prod[:m])

    @staticmethod
    def _irreducible(p: int, m: int) -> list[int]:
        """Smallest monic irreducible of degree ``m`` over F_p, found by
        checking for roots and factors of every lower degree."""

        def polymod(num, den):
            num = list(num)
            while len(num) >= len(den):
                c = num[-1] * pow(den[-1], p - 2, p) % p
                shift = len(num) - len(den)
                for i, d in enumerate(den):
                    num[shift + i] = (num[shift + i] - c * d) % p
                num.pop()
                while num and num[-1] == 0:
                    num.pop()
            return num

        def monics(deg):
            for tail in itertools.product(range(p), repeat=deg):
                yield list(tail) + [1]

        for cand in monics(m):
            if cand[0] == 0:
                continue
            if all(polymod(cand, f) for d in range(1, m // 2 + 1) for f in monics(d)):
                return cand
        raise ValueError(f"no irreducible polynomial of degree {m} over F_{p}")


@dataclass(frozen=True)
class EntropyReport:
    L: int
    K: int
    M: int
    q: int
    mode: str
    entropy: float  # H(AB), q-ary units
    entropy_given_a: Optional[float]
    entropy_given_b: Optional[float]
    formula: int
    formula_given_a: int
    formula_given_b: int
    samples: int  # pairs enumerated or drawn

    @property
    def gap(self) -> float:
        return abs(self.formula - self.entropy)


def _all_matrices(q: int, rows: int, cols: int) -> np.ndarray:
    n = rows * cols
    idx = np.arange(q ** n, dtype=np.int64)
    digits = np.empty((q ** n, n), dtype=np.int64)
    for d in range(n - 1, -1, -1):
        digits[:, d] = idx % q
        idx //= q
    return digits.reshape(-1, rows, cols)


def _table_products(fld: SmallField, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Keys of ``a[i] @ b[j]`` for every pair, shape ``(len(a), len(b))``."""
    q = fld.q
    L, K = a.shape[1:]
    M = b.shape[2]
    key = np.zeros((a.shape[0], b.shape[0]), dtype=np.int64)
    for i in range(L):
        for j in range(M):
            acc = fld.mul[a[:, i, 0][:, None], b[:, 0, j][None, :]]
            for k in range(1, K):
                acc = fld.add[acc, fld.mul[a[:, i, k][:, None], b[:, k, j][None, :]]]
            key = key * q + acc
    return key


def _row_entropies(keys: np.ndarray) -> float:
    """Mean over rows of the plug-in entropy (nats) of each row's values."""
    srt = np.sort(keys, axis=1)
    n = keys.shape[1]
    total = 0.0
    for row in srt:
        _, counts = np.unique(row, return_counts=True)
        total += _entropy_from_counts(counts.tolist(), n)
    return total / keys.shape[0]


def measure_product_entropy(L: int, K: int, M: int, q: int, mode: str = "exhaustive",
                            budget: int = ENUMERATION_BUDGET, seed: int = 0,
                            conditionals: bool = True) -> EntropyReport:
    """Entropy of ``AB`` (and of ``AB`` given ``A`` or ``B``) for uniform
    ``A`` (``L x K``) and ``B`` (``K x M``) over the field of order ``q``.

    ``exhaustive`` enumerates all ``q^(LK+KM)`` pairs; ``sampled`` draws
    ``budget`` pairs and returns the plug-in estimate (no conditionals).
    """
    fld = SmallField(q)
    logq = math.log(q)
    formulas = [product_entropy_formula(EntropyQuery(L, K, M, c)) for c in (None, "A", "B")]
    if mode == "exhaustive":
        pairs = q ** (L * K + K * M)
        if pairs > budget:
            raise BudgetExceeded(pairs, budget, f"exhaustive entropy at q={q}")
        a_all = _all_matrices(q, L, K)
        b_all = _all_matrices(q, K, M)
        counts: Counter = Counter()
        h_a = 0.0
        rows_per_chunk = max(1, (1 << 22) // b_all.shape[0])
        for start in range(0, a_all.shape[0], rows_per_chunk):
            keys = _table_products(fld, a_all[start:start + rows_per_chunk], b_all)
            uniq, cnt = np.unique(keys, return_counts=True)
            counts.update(dict(zip(uniq.tolist(), cnt.tolist())))
            if conditionals:
                h_a += _row_entropies(keys) * keys.shape[0]
        h = _entropy_from_counts(counts.values(), pairs)
        h_given_a = h_given_b = None
        if conditionals:
            h_given_a = h_a / a_all.shape[0] / logq
            h_b = 0.0
            rows_per_chunk = max(1, (1 << 22) // a_all.shape[0])
            for start in range(0, b_all.shape[0], rows_per_chunk):
                keys = _table_products(fld, a_all, b_all[start:start + rows_per_chunk]).T
                h_b += _row_entropies(keys) * keys.shape[0]
            h_given_b = h_b / b_all.shape[0] / logq
        return EntropyReport(L, K, M, q, mode, h / logq, h_given_a, h_given_b, *formulas, pairs)
    if mode == "sampled":
        if budget < 1:
            raise ValueError("sample budget must be >= 1")
        rng = np.random.default_rng([seed, 0x5E])
        a = rng.integers(0, q, size=(budget, L, K), dtype=np.int64)
        b = rng.integers(0, q, size=(budget, K, M), dtype=np.int64)
        key = np.zeros(budget, dtype=np.int64)
        for i in range(L):
            for j in range(M):
                acc = fld.mul[a[:, i, 0], b[:, 0, j]]
                for k in range(1, K):
                    acc = fld.add[acc, fld.mul[a[:, i, k], b[:, k, j]]]
                key = key * q + acc
        _, cnt = np.unique(key, return_counts=True)
        h = _entropy_from_counts(cnt.tolist(), budget)
        return EntropyReport(L, K, M, q, mode, h / logq, None, None, *formulas, budget)
    raise ValueError(f"mode must be 'exhaustive' or 'sampled', got {mode!r}")


# ---------------------------------------------------------------------------
# rate versus capacity


@dataclass(frozen=True)
class SweepRow:
    version: str
    scheme: str
    L: int
    K: int
    M: int
    N: int
    X: int
    S: int
    download: Fraction
    achieved: Fraction
    capacity: Optional[Fraction]
    status: str
    regime: str
    limit_flags: tuple[str, ...]
    limit_capacity: Optional[Fraction]
    limit_status: str
    limit_regime: str

    @property
    def matched(self) -> bool:
        hits = [(self.capacity, self.status), (self.limit_capacity, self.limit_status)]
        return any(v is not None and s in (EXACT, ZERO) and v == self.achieved for v, s in hits)

    @property
    def exceeds(self) -> bool:
        """Achieved rate above the finite-parameter capacity or bound."""
        return self.capacity is not None and self.achieved > self.capacity


@dataclass(frozen=True)
class SweepGrid:
    versions: tuple[str, ...] = VERSIONS
    schemes: tuple[str, ...] = ("general", "csa")
    dims: tuple[int, ...] = (1, 2, 3)
    servers: tuple[int, ...] = (2, 3, 4, 5, 6)
    collusion: tuple[int, ...] = (0, 1, 2)
    q: int = 101
    seed: int = 0

    def points(self):
        for version, scheme, L, K, M, N, X in itertools.product(
                self.versions, self.schemes, self.dims, self.dims, self.dims, self.servers, self.collusion):
            try:
                cfg = SdmmConfig.for_scheme(scheme, version, L, K, M, N, X, self.q)
            except ConfigError:
                continue
            yield version, scheme, cfg, X


def consistent_flags(L: int, K: int, M: int) -> tuple[str, ...]:
    """Regime flags compatible with the finite dimensions, one per
    coordinate direction in which the sequence could grow."""
    out = []
    for flag in FLAGS:
        try:
            check_flags(L, K, M, frozenset([flag]))
        except CapacityError:
            continue
        out.append(flag)
    return tuple(out)


_RUNNERS = {"general": general_scheme_session, "csa": csa_scheme_session}


def sweep_rate_vs_capacity(grid: SweepGrid = SweepGrid()) -> list[SweepRow]:
    """One row per constructible grid point: the session's exact rate, the
    finite-parameter capacity (or bound) and the capacity under every
    limit flag consistent with the dimensions."""
    rows = []
    for version, scheme, cfg, X in grid.points():
        if scheme not in _RUNNERS:
            raise ConfigError(f"sweeps cover general and csa sessions, not {scheme!r}")
        batch = SecretBatch.random(cfg, grid.seed)
        res = _RUNNERS[scheme](cfg, batch, grid.seed)
        cap = sdmm_capacity(version, cfg.L, cfg.K, cfg.M, cfg.N, X)
        flags = consistent_flags(cfg.L, cfg.K, cfg.M)
        lim = sdmm_capacity(version, cfg.L, cfg.K, cfg.M, cfg.N, X, flags) if flags else cap
        rows.append(SweepRow(version, scheme, cfg.L, cfg.K, cfg.M, cfg.N, X, cfg.S, res.ledger.total,
                             res.achieved_rate, cap.value, cap.status, cap.regime, flags,
                             lim.value, lim.status, lim.regime))
    return rows


SWEEP_HEADER = ("version", "scheme", "L", "K", "M", "N", "X", "S", "metric", "value")


def sweep_csv_rows(rows: Sequence[SweepRow]) -> list[tuple]:
    """Long-format rows: parameters, metric name, metric value."""
    out = []
    for r in rows:
        params = (r.version, r.scheme, r.L, r.K, r.M, r.N, r.X, r.S)
        for metric, value in (("download", r.download), ("achieved_rate", r.achieved),
                              ("capacity", r.capacity), ("capacity_status", r.status),
                              ("capacity_case", r.regime), ("limit_flags", "|".join(r.limit_flags)),
                              ("limit_capacity", r.limit_capacity), ("limit_status", r.limit_status),
                              ("matched", r.matched), ("exceeds", r.exceeds)):
            out.append(params + (metric, value))
    return out


def entropy_gap_ladder(L: int, K: int, M: int, qs: Sequence[int]) -> list[EntropyReport]:
    return [measure_product_entropy(L, K, M, q, conditionals=False) for q in qs]


def is_field_order(q: int) -> bool:
    return is_prime(q) or (q > 1 and len(prime_factors(q)) == 1)
