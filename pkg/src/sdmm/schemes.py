"""End-to-end retrieval sessions: server answers, user decoding and
download accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Optional, Sequence

import numpy as np

from .capacity import achieved_rate
from .field import (PrimeField, build_csa_matrix, build_mult_isomorphism, smallest_prime_above,
                    solve_linear_system, vandermonde_rows)
from .sharing import (ConfigError, NoiseBatch, SdmmConfig, SecretBatch, ShareSet, check_csa, check_general,
                      csa_points, csa_share, general_points, general_share)


# ---------------------------------------------------------------------------
# download accounting


@dataclass(frozen=True)
class LedgerEntry:
    server: int  # 1-indexed
    category: str
    count: int
    alphabet: int


@dataclass
class DownloadLedger:
    """Download cost in q-ary symbols.

    Each entry is ``count`` symbols over an alphabet of size ``alphabet``,
    costing ``count * log_q(alphabet)``. Entries over the q-ary alphabet are
    kept as exact fractions; any other alphabet makes the total a float.
    """

    q: int
    entries: list[LedgerEntry] = field(default_factory=list)

    def add(self, server: int, category: str, count: int, alphabet: Optional[int] = None) -> None:
        if count < 0:
            raise ValueError("symbol counts must be non-negative")
        if count:
            self.entries.append(LedgerEntry(server, category, count, alphabet or self.q))

    def extend(self, other: "DownloadLedger") -> None:
        if other.q != self.q:
            raise ValueError("ledgers over different fields")
        self.entries.extend(other.entries)

    def cost(self, entry: LedgerEntry):
        if entry.alphabet == self.q:
            return Fraction(entry.count)
        return entry.count * math.log(entry.alphabet) / math.log(self.q)

    @property
    def is_exact(self) -> bool:
        return all(e.alphabet == self.q for e in self.entries)

    def _sum(self, entries) -> Fraction | float:
        costs = [self.cost(e) for e in entries]
        if all(isinstance(c, Fraction) for c in costs):
            return sum(costs, Fraction(0))
        return math.fsum(float(c) for c in costs)

    @property
    def total(self) -> Fraction | float:
        return self._sum(self.entries)

    def per_server(self) -> dict[int, Fraction | float]:
        servers = sorted({e.server for e in self.entries})
        return {n: self._sum(e for e in self.entries if e.server == n) for n in servers}

    def by_category(self) -> dict[str, Fraction | float]:
        cats = sorted({e.category for e in self.entries})
        return {c: self._sum(e for e in self.entries if e.category == c) for c in cats}


# ---------------------------------------------------------------------------
# answers and results


@dataclass(frozen=True)
class ServerAnswer:
    server: int  # 1-indexed
    blocks: dict[str, np.ndarray]
    alphabets: dict[str, int]

    def symbols(self) -> int:
        return sum(int(np.size(b)) for b in self.blocks.values())


@dataclass(frozen=True)
class AnswerSet:
    scheme: str
    answers: tuple[ServerAnswer, ...]

    def __getitem__(self, n: int) -> ServerAnswer:
        return self.answers[n]

    def __len__(self) -> int:
        return len(self.answers)


@dataclass
class SessionResult:
    scheme: str
    config: SdmmConfig
    products: list[np.ndarray]
    ledger: DownloadLedger
    answers: AnswerSet
    achieved_rate: Fraction | float
    wire_ledger: Optional[DownloadLedger] = None
    shares: dict[str, ShareSet] = field(default_factory=dict)

    def __post_init__(self):
        if self.wire_ledger is None:
            self.wire_ledger = self.ledger

    def transcript_records(self) -> list[dict]:
        charged = self.ledger.per_server()
        wire = self.wire_ledger.per_server()
        records = []
        for ans in self.answers.answers:
            payload = ";".join(
                f"{name}=" + " ".join(str(int(v)) for v in np.asarray(block).reshape(-1))
                for name, block in ans.blocks.items()
            )
            records.append({
                "server": ans.server,
                "scheme": self.scheme,
                "payload": payload,
                "symbols": ans.symbols(),
                "charged": charged.get(ans.server, Fraction(0)),
                "wire": wire.get(ans.server, Fraction(0)),
            })
        return records


def _sum_mod(mats: Sequence[np.ndarray], q: int) -> np.ndarray:
    out = np.zeros_like(mats[0])
    for m in mats:
        out = out + m
    return out % q


def _rs_decode(field: PrimeField, points: Sequence[int], values: Sequence[np.ndarray], unknowns: int) -> list[np.ndarray]:
    """Interpolate coefficients of ``a^1..a^unknowns`` from the first
    ``unknowns`` evaluations."""
    shape = values[0].shape
    flat = np.array([np.asarray(v).reshape(-1) for v in values[:unknowns]], dtype=np.int64)
    rows = vandermonde_rows(field, points[:unknowns], 1, unknowns)
    coeffs = solve_linear_system(field, rows, flat)
    return [c.reshape(shape) for c in coeffs]


# ---------------------------------------------------------------------------
# general scheme


def general_answer(shares: ShareSet, n: int, blocks: Sequence[str] = ("A", "B")) -> dict[str, np.ndarray]:
    """Server ``n``'s (0-indexed) answer: the sums of its A-shares and B-shares."""
    out = {}
    if "A" in blocks:
        out["A"] = _sum_mod(shares.a_shares[n], shares.q)
    if "B" in blocks:
        out["B"] = _sum_mod(shares.b_shares[n], shares.q)
    return out


def general_download_plan(config: SdmmConfig) -> tuple[int, int]:
    """Number of servers the A-block and B-block are downloaded from.

    Blocks of a matrix held as side information are skipped; otherwise a
    block is fetched from the first ``S + X`` servers, which is all ``N``
    when that matrix is at the top security level.
    """
    psi = config.side_info
    a_servers = 0 if psi == "A" else config.S + config.X_A
    b_servers = 0 if psi == "B" else config.S + config.X_B
    return a_servers, b_servers


def general_scheme_session(config: SdmmConfig, batch: SecretBatch, seed: int) -> SessionResult:
    """Retrieve every ``A_s`` and ``B_s`` via Reed-Solomon decoding and
    multiply locally."""
    check_general(config)
    batch.check_shapes(config)
    f = config.field
    q = config.q
    noise = NoiseBatch.for_config(config, seed)
    points = general_points(config.N)
    shares = general_share(batch, noise, points, f)
    a_servers, b_servers = general_download_plan(config)

    ledger = DownloadLedger(q)
    answers = []
    for n in range(config.N):
        wanted = [b for b, cnt in (("A", a_servers), ("B", b_servers)) if n < cnt]
        blocks = general_answer(shares, n, wanted)
        for name, block in blocks.items():
            ledger.add(n + 1, f"{name}-block", block.size)
        answers.append(ServerAnswer(n + 1, blocks, {k: q for k in blocks}))

    if a_servers:
        a_dec = _rs_decode(f, points, [answers[n].blocks["A"] for n in range(a_servers)], a_servers)[:config.S]
    else:
        a_dec = list(batch.a_mats)
    if b_servers:
        b_dec = _rs_decode(f, points, [answers[n].blocks["B"] for n in range(b_servers)], b_servers)[:config.S]
    else:
        b_dec = list(batch.b_mats)
    products = [f.matmul(a, b) for a, b in zip(a_dec, b_dec)]
    return SessionResult("general", config, products, ledger, AnswerSet("general", tuple(answers)),
                         achieved_rate(ledger, config), shares={"main": shares})


# ---------------------------------------------------------------------------
# cross-subspace alignment scheme


def csa_answer(shares: ShareSet, n: int) -> np.ndarray:
    q = shares.q
    f = PrimeField(q)
    return _sum_mod([f.matmul(a, b) for a, b in zip(shares.a_shares[n], shares.b_shares[n])], q)


def csa_interference(field: PrimeField, batch: SecretBatch, noise: NoiseBatch, f_consts: Sequence[int]) -> list[np.ndarray]:
    """Coefficients of ``a^0..a^(X_A+X_B-1)`` in the interference part of
    every answer, computed from the ground-truth secrets and noise."""
    q = field.q
    X_A, X_B = noise.X_A, noise.X_B
    width = X_A + X_B
    L, M = batch.a_mats[0].shape[0], batch.b_mats[0].shape[1]
    coeffs = [np.zeros((L, M), dtype=np.int64) for _ in range(width)]

    def add_power(fs, k, term):
        # (fs + a)^k = sum_t C(k, t) fs^(k-t) a^t
        for t in range(k + 1):
            coeffs[t] = (coeffs[t] + comb(k, t) % q * pow(fs, k - t, q) * term) % q

    for s, fs in enumerate(f_consts):
        a, b = batch.a_mats[s], batch.b_mats[s]
        for x in range(1, X_A + 1):
            add_power(fs, x - 1, field.matmul(noise.z_mats[s][x - 1], b))
        for xp in range(1, X_B + 1):
            add_power(fs, xp - 1, field.matmul(a, noise.z_prime_mats[s][xp - 1]))
        for x in range(1, X_A + 1):
            for xp in range(1, X_B + 1):
                add_power(fs, x + xp - 1, field.matmul(noise.z_mats[s][x - 1], noise.z_prime_mats[s][xp - 1]))
    return coeffs


def csa_scheme_session(config: SdmmConfig, batch: SecretBatch, seed: int, *, debug: bool = False,
                       f_consts: Optional[Sequence[int]] = None,
                       alphas: Optional[Sequence[int]] = None) -> SessionResult:
    """Download one aligned ``L x M`` answer per server and separate the
    ``S`` products from the interference with the Cauchy-Vandermonde inverse.

    With ``debug=True`` the decoded interference coefficients are checked
    against the ones implied by the true secrets and noise.
    """
    check_csa(config)
    batch.check_shapes(config)
    f = config.field
    q = config.q
    default_f, default_a = csa_points(q, config.N, config.S)
    f_consts = tuple(f_consts) if f_consts is not None else default_f
    alphas = tuple(alphas) if alphas is not None else default_a
    noise = NoiseBatch.for_config(config, seed)
    shares = csa_share(batch, noise, f_consts, alphas, f)

    ledger = DownloadLedger(q)
    answers = []
    for n in range(config.N):
        delta = csa_answer(shares, n)
        ledger.add(n + 1, "aligned", delta.size)
        answers.append(ServerAnswer(n + 1, {"D": delta}, {"D": q}))

    decode = build_csa_matrix(f, f_consts, alphas, config.X_A + config.X_B)
    stacked = np.array([a.blocks["D"].reshape(-1) for a in answers], dtype=np.int64)
    coeffs = (decode.inverse @ stacked) % q
    shape = (config.L, config.M)
    products = [coeffs[s].reshape(shape) for s in range(config.S)]
    if debug:
        expected = csa_interference(f, batch, noise, f_consts)
        got = [coeffs[config.S + t].reshape(shape) for t in range(len(expected))]
        for t, (e, g) in enumerate(zip(expected, got)):
            if not np.array_equal(e, g):
                raise AssertionError(f"interference coefficient {t} inconsistent with shares")
    return SessionResult("csa", config, products, ledger, AnswerSet("csa", tuple(answers)),
                         achieved_rate(ledger, config), shares={"main": shares})


# ---------------------------------------------------------------------------
# scalar multiplication through the discrete-log isomorphism


def auxiliary_prime(q: int) -> int:
    """Smallest prime ``p > 2(q-1)``; sums of two discrete logs fit below it."""
    return smallest_prime_above(2 * (q - 1))


def _field_batch(values_a: Sequence[int], values_b: Sequence[int]) -> SecretBatch:
    a = tuple(np.array([[v]], dtype=np.int64) for v in values_a)
    b = tuple(np.array([[v]], dtype=np.int64) for v in values_b)
    return SecretBatch(a, b)


@dataclass
class _SharedSums:
    sums: list[int]
    answers: list[int]
    shares: ShareSet


def _shared_sums(field: PrimeField, a_vals: Sequence[int], b_vals: Sequence[int], N: int, X: int,
                 seed: int, stream: int) -> _SharedSums:
    """X-securely share both sequences with the general encoder, have each
    server return the sum of all its shares, and decode ``a_s + b_s``."""
    S = len(a_vals)
    if field.q <= N:
        raise ConfigError(f"need more than N={N} nonzero points in F_{field.q}")
    batch = _field_batch(a_vals, b_vals)
    noise = NoiseBatch.generate(field, S, X, X, (1, 1), (1, 1), seed, stream)
    points = general_points(N)
    shares = general_share(batch, noise, points, field)
    answers = []
    for n in range(N):
        total = sum(int(m[0, 0]) for m in shares.a_shares[n]) + sum(int(m[0, 0]) for m in shares.b_shares[n])
        answers.append(total % field.q)
    rows = vandermonde_rows(field, points, 1, N)
    coeffs = solve_linear_system(field, rows, answers)
    return _SharedSums(coeffs[:S], answers, shares)


def _shared_values(field: PrimeField, values: Sequence[int], N: int, X: int, seed: int, stream: int) -> tuple[list[int], list[int]]:
    """Share one sequence, download each server's summed share, decode."""
    S = len(values)
    batch = _field_batch(values, [0] * S)
    noise = NoiseBatch.generate(field, S, X, 0, (1, 1), (1, 1), seed, stream)
    points = general_points(N)
    shares = general_share(batch, noise, points, field)
    answers = [sum(int(m[0, 0]) for m in shares.a_shares[n]) % field.q for n in range(N)]
    rows = vandermonde_rows(field, points, 1, S + X)
    coeffs = solve_linear_system(field, rows[:S + X], answers[:S + X])
    return coeffs[:S], answers


def _check_symmetric(config: SdmmConfig, scheme: str) -> None:
    if config.X_A != config.X_B:
        raise ConfigError(f"{scheme} scheme needs X_A = X_B")
    if config.S != config.N - config.X_A:
        raise ConfigError(f"{scheme} scheme needs S = N - X = {config.N - config.X_A}, got S = {config.S}")
    if config.q < 3:
        raise ConfigError(f"{scheme} scheme needs q >= 3")


def _scalar_core(q: int, a_vals: Sequence[int], b_vals: Sequence[int], N: int, X: int, seed: int,
                 stream: int, with_indicators: bool):
    """Products ``a_s * b_s`` in F_q via sums of discrete logs in F_p.

    Returns ``(products, per-server answers, p)``; answers hold the log-sum
    share and, when requested, the two zero-indicator shares.
    """
    iso = build_mult_isomorphism(q)
    p = auxiliary_prime(q)
    fp = PrimeField(p)
    logs = _shared_sums(fp, [iso.log(a) for a in a_vals], [iso.log(b) for b in b_vals], N, X, seed, stream)
    answers = [{"logsum": np.array([v], dtype=np.int64)} for v in logs.answers]
    zero_a = zero_b = [0] * len(a_vals)
    if with_indicators:
        zero_a, ans_a = _shared_values(fp, [int(a % q == 0) for a in a_vals], N, X, seed, stream + 1)
        zero_b, ans_b = _shared_values(fp, [int(b % q == 0) for b in b_vals], N, X, seed, stream + 2)
        for n in range(N):
            answers[n]["zero_A"] = np.array([ans_a[n]], dtype=np.int64)
            answers[n]["zero_B"] = np.array([ans_b[n]], dtype=np.int64)
    products = []
    for c, za, zb in zip(logs.sums, zero_a, zero_b):
        products.append(0 if (za or zb) else iso.exp(c % (q - 1)))
    return products, answers, p


def _charge_scalar(ledger: DownloadLedger, wire: DownloadLedger, N: int, S: int, p: int, indicators: bool) -> None:
    for n in range(1, N + 1):
        ledger.add(n, "aux-scalar", 1, p)
        wire.add(n, "aux-scalar", 1, p)
        if indicators:
            # two zero flags per batch index, charged at one bit each
            ledger.add(n, "indicator", 2 * S, 2)
            wire.add(n, "indicator", 2, p)


def scalar_mul_session(config: SdmmConfig, batch: SecretBatch, seed: int) -> SessionResult:
    """Scalar products through the multiplicative-to-additive isomorphism.

    Secrets are mapped to discrete logs, shared over the auxiliary prime
    field and summed by the servers; zero-valued factors are flagged by
    separately shared indicator bits.
    """
    if (config.L, config.K, config.M) != (1, 1, 1):
        raise ConfigError("scalar scheme needs L = K = M = 1")
    _check_symmetric(config, "scalar")
    batch.check_shapes(config)
    q, N, X, S = config.q, config.N, config.X_A, config.S
    a_vals = [int(a[0, 0]) for a in batch.a_mats]
    b_vals = [int(b[0, 0]) for b in batch.b_mats]
    prods, raw, p = _scalar_core(q, a_vals, b_vals, N, X, seed, 0, True)
    ledger, wire = DownloadLedger(q), DownloadLedger(q)
    _charge_scalar(ledger, wire, N, S, p, True)
    answers = tuple(ServerAnswer(n + 1, raw[n], {k: p for k in raw[n]}) for n in range(N))
    products = [np.array([[v]], dtype=np.int64) for v in prods]
    return SessionResult("scalar", config, products, ledger, AnswerSet("scalar", answers),
                         achieved_rate(ledger, config), wire_ledger=wire)


# ---------------------------------------------------------------------------
# outer products (K = 1)


def normalize_vector(field: PrimeField, vec: Sequence[int]) -> tuple[int, int, list[int]]:
    """Split ``vec`` into ``(index, leading value, normalized vector)``.

    ``index`` is the 1-based position of the first nonzero entry and the
    normalized vector has a 1 there. The zero vector maps to
    ``(0, 1, zeros)``.
    """
    vals = [int(v) % field.q for v in vec]
    for i, v in enumerate(vals):
        if v:
            inv = field.inv(v)
            return i + 1, v, [x * inv % field.q for x in vals]
    return 0, 1, [0] * len(vals)


def _tail(index: int, normed: list[int]) -> list[int]:
    drop = index - 1 if index else 0
    return normed[:drop] + normed[drop + 1:]


def _untail(index: int, tail: list[int]) -> list[int]:
    if index == 0:
        return [0] * (len(tail) + 1)
    return tail[:index - 1] + [1] + tail[index - 1:]


def outer_product_session(config: SdmmConfig, batch: SecretBatch, seed: int) -> SessionResult:
    """Outer products ``A_s B_s`` of an ``L x 1`` and a ``1 x M`` vector.

    Each vector is reduced to (first-nonzero index, leading value, tail of
    the normalized vector). Tails and indices go through the general
    scheme; the product of leading values (never zero) goes through the
    scalar scheme without indicators.
    """
    if config.K != 1:
        raise ConfigError("outer product scheme needs K = 1")
    _check_symmetric(config, "outer product")
    if config.q <= max(config.L, config.M, config.N):
        raise ConfigError("outer product scheme needs q > max(L, M, N) for indices and evaluation points")
    batch.check_shapes(config)
    f = config.field
    q, N, X, S, L, M = config.q, config.N, config.X_A, config.S, config.L, config.M

    a_parts = [normalize_vector(f, a[:, 0]) for a in batch.a_mats]
    b_parts = [normalize_vector(f, b[0, :]) for b in batch.b_mats]
    points = general_points(N)
    answers = [dict() for _ in range(N)]
    shares = {}
    ledger, wire = DownloadLedger(q), DownloadLedger(q)

    # normalized tails, general scheme over F_q
    tails_a = tuple(np.array(_tail(i, v), dtype=np.int64).reshape(L - 1, 1) for i, _, v in a_parts)
    tails_b = tuple(np.array(_tail(j, v), dtype=np.int64).reshape(1, M - 1) for j, _, v in b_parts)
    tail_batch = SecretBatch(tails_a, tails_b)
    noise = NoiseBatch.generate(f, S, X, X, (L - 1, 1), (1, M - 1), seed, 0)
    shares["tails"] = general_share(tail_batch, noise, points, f)
    for n in range(N):
        blocks = general_answer(shares["tails"], n)
        for name, block in blocks.items():
            if block.size:
                answers[n][f"tail_{name}"] = block
                ledger.add(n + 1, "field-data", block.size)
                wire.add(n + 1, "field-data", block.size)
    dec_a = _rs_decode(f, points, [answers[n].get("tail_A", np.zeros((L - 1, 1), np.int64)) for n in range(N)], N)[:S]
    dec_b = _rs_decode(f, points, [answers[n].get("tail_B", np.zeros((1, M - 1), np.int64)) for n in range(N)], N)[:S]

    # first-nonzero indices, general scheme over F_q
    idx_a = [i for i, _, _ in a_parts]
    idx_b = [j for j, _, _ in b_parts]
    got_i, ans_i = _shared_values(f, idx_a, N, X, seed, 10)
    got_j, ans_j = _shared_values(f, idx_b, N, X, seed, 11)
    for n in range(N):
        answers[n]["index_A"] = np.array([ans_i[n]], dtype=np.int64)
        answers[n]["index_B"] = np.array([ans_j[n]], dtype=np.int64)
        ledger.add(n + 1, "index", 1, L + 1)
        ledger.add(n + 1, "index", 1, M + 1)
        wire.add(n + 1, "index", 2)

    # product of the leading values
    leads, raw, p = _scalar_core(q, [v for _, v, _ in a_parts], [v for _, v, _ in b_parts], N, X, seed, 20, False)
    for n in range(N):
        answers[n].update(raw[n])
    _charge_scalar(ledger, wire, N, S, p, False)

    products = []
    for s in range(S):
        a_vec = np.array(_untail(got_i[s], [int(v) for v in dec_a[s][:, 0]]), dtype=np.int64)
        b_vec = np.array(_untail(got_j[s], [int(v) for v in dec_b[s][0, :]]), dtype=np.int64)
        products.append((leads[s] * np.outer(a_vec, b_vec)) % q)
    answer_set = AnswerSet("outer", tuple(
        ServerAnswer(n + 1, answers[n], {k: (p if k == "logsum" else q) for k in answers[n]}) for n in range(N)))
    return SessionResult("outer", config, products, ledger, answer_set, achieved_rate(ledger, config),
                         wire_ledger=wire, shares=shares)


# ---------------------------------------------------------------------------
# Hadamard products


def hadamard_session(config: SdmmConfig, batch: SecretBatch, seed: int) -> SessionResult:
    """Entrywise products ``A_s o B_s`` of ``L x M`` matrices: one scalar
    scheme instance per entry, each covering the whole batch. ``config.K``
    is not used."""
    _check_symmetric(config, "hadamard")
    if batch.S != config.S:
        raise ConfigError(f"batch has {batch.S} pairs, config expects S={config.S}")
    shape = (config.L, config.M)
    for a, b in zip(batch.a_mats, batch.b_mats):
        if a.shape != shape or b.shape != shape:
            raise ConfigError(f"hadamard scheme needs both factors {shape}, got {a.shape} and {b.shape}")
    q, N, X, S = config.q, config.N, config.X_A, config.S
    products = [np.zeros(shape, dtype=np.int64) for _ in range(S)]
    answers = [dict() for _ in range(N)]
    ledger, wire = DownloadLedger(q), DownloadLedger(q)
    p = auxiliary_prime(q)
    for i in range(config.L):
        for j in range(config.M):
            stream = 3 * (i * config.M + j)
            prods, raw, p = _scalar_core(q, [int(a[i, j]) for a in batch.a_mats],
                                         [int(b[i, j]) for b in batch.b_mats], N, X, seed, stream, True)
            for s in range(S):
                products[s][i, j] = prods[s]
            for n in range(N):
                answers[n].update({f"{k}[{i},{j}]": v for k, v in raw[n].items()})
            _charge_scalar(ledger, wire, N, S, p, True)
    answer_set = AnswerSet("hadamard", tuple(
        ServerAnswer(n + 1, answers[n], {k: p for k in answers[n]}) for n in range(N)))
    return SessionResult("hadamard", config, products, ledger, answer_set,
                         achieved_rate(ledger, config, product="hadamard"), wire_ledger=wire)


# ---------------------------------------------------------------------------
# one-shot multiplication by partitioning


@dataclass
class PartitionResult:
    product: np.ndarray
    ledger: DownloadLedger
    block_rows: int
    main_blocks: int
    remainder_rows: int
    overhead_ratio: Fraction
    sessions: list[SessionResult]


def oneshot_partition_session(A, B, config: SdmmConfig, seed: int = 0) -> PartitionResult:
    """Compute a single ``A @ B`` with the CSA scheme by splitting A by rows.

    The first ``floor(L/S') * S'`` rows form ``S'`` equal blocks of one
    batch; the ``L mod S'`` leftover rows each become a one-row block of a
    second batch padded with zero rows. ``config`` carries the full ``L, K,
    M`` and ``S = S' = N - X_A - X_B``.
    """
    f = config.field
    q = config.q
    A = f.array(A)
    B = f.array(B)
    Sp = config.N - config.X_A - config.X_B
    if Sp < 1:
        raise ConfigError(f"need N - X_A - X_B >= 1, got {Sp}")
    if config.S != Sp:
        raise ConfigError(f"config S must equal N - X_A - X_B = {Sp}")
    L, K = A.shape
    if B.shape[0] != K or (L, K, B.shape[1]) != (config.L, config.K, config.M):
        raise ConfigError("A, B shapes do not match config")
    M = B.shape[1]
    rows = L // Sp
    rem = L % Sp
    ledger = DownloadLedger(q)
    sessions = []
    pieces = []
    if rows:
        sub = SdmmConfig(rows, K, M, config.N, config.X_A, config.X_B, Sp, q, config.version)
        blocks = SecretBatch(tuple(A[s * rows:(s + 1) * rows] for s in range(Sp)), tuple(B for _ in range(Sp)))
        res = csa_scheme_session(sub, blocks, seed)
        sessions.append(res)
        ledger.extend(res.ledger)
        pieces.extend(res.products)
    if rem:
        sub = SdmmConfig(1, K, M, config.N, config.X_A, config.X_B, Sp, q, config.version)
        zero = np.zeros((1, K), dtype=np.int64)
        a_rows = tuple(A[rows * Sp + s:rows * Sp + s + 1] if s < rem else zero for s in range(Sp))
        res = csa_scheme_session(sub, SecretBatch(a_rows, tuple(B for _ in range(Sp))), seed + 1)
        sessions.append(res)
        ledger.extend(res.ledger)
        pieces.extend(res.products[:rem])
    product = np.vstack(pieces) % q
    # padding cost beyond the ideal N*M/S' per leftover row, relative to the
    # ideal cost N*L*M/S' of the whole product
    overhead = Fraction(Sp - rem, L) if rem else Fraction(0)
    return PartitionResult(product, ledger, rows, Sp if rows else 0, rem, overhead, sessions)


# ---------------------------------------------------------------------------
# SDMM as multi-message PIR


SESSIONS = {
    "general": general_scheme_session,
    "csa": csa_scheme_session,
    "scalar": scalar_mul_session,
    "outer": outer_product_session,
    "hadamard": hadamard_session,
}


def run_session(scheme: str, config: SdmmConfig, batch: SecretBatch, seed: int) -> SessionResult:
    try:
        fn = SESSIONS[scheme]
    except KeyError:
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {sorted(SESSIONS)}") from None
    return fn(config, batch, seed)


@dataclass
class PirDemoResult:
    retrieved: list[np.ndarray]
    expected: list[np.ndarray]
    ledger: DownloadLedger
    generic_ledger: DownloadLedger
    session: SessionResult

    @property
    def correct(self) -> bool:
        return all(np.array_equal(r, e) for r, e in zip(self.retrieved, self.expected))

    @property
    def ledger_unchanged(self) -> bool:
        return self.ledger.total == self.generic_ledger.total and \
            self.ledger.per_server() == self.generic_ledger.per_server()


def pir_reduction_demo(config: SdmmConfig, desired: Sequence[int], seed: int, scheme: str = "csa",
                       a_mats: Optional[Sequence[np.ndarray]] = None) -> PirDemoResult:
    """Use an SDMM session as a multi-message retrieval: the columns of
    ``A_s`` are the messages and ``B_s`` holds the identity columns picking
    the ``desired`` (1-based) ones."""
    if config.side_info == "A":
        raise ConfigError("A must not be side information when it plays the stored data")
    if config.X_B <= 0:
        raise ConfigError("the query matrix B must be secured (X_B > 0)")
    desired = [int(k) for k in desired]
    if len(set(desired)) != len(desired):
        raise ConfigError("duplicate message indices")
    if any(not 1 <= k <= config.K for k in desired):
        raise ConfigError(f"message indices must lie in 1..{config.K}")
    if len(desired) != config.M:
        raise ConfigError(f"config M={config.M} must equal the number of desired messages {len(desired)}")
    f = config.field
    base = SecretBatch.random(config, seed)
    a = tuple(f.array(m) for m in a_mats) if a_mats is not None else base.a_mats
    query = np.eye(config.K, dtype=np.int64)[:, [k - 1 for k in desired]]
    batch = SecretBatch(a, tuple(query.copy() for _ in range(config.S)))
    res = run_session(scheme, config, batch, seed)
    generic = run_session(scheme, config, SecretBatch(a, base.b_mats), seed)
    expected = [m[:, [k - 1 for k in desired]] for m in a]
    return PirDemoResult(res.products, expected, res.ledger, generic.ledger, res)
