"""Secret-sharing encoders for the two scheme families.

The *general* encoder is a Reed-Solomon style sharing with evaluation
points ``alpha_n`` (powers ``1..S`` carry data, ``S+1..S+X`` carry noise).
The *CSA* encoder (cross-subspace alignment) offsets each batch index by a
constant ``f_s`` so that products of A- and B-shares align their
interference into a common low-degree polynomial in ``alpha_n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .field import PrimeField, solve_linear_system, vandermonde_rows

VERSIONS = ("AB_phi", "AB_B", "B_phi", "B_A", "B_B")

# side information held by the user for each version
SIDE_INFO = {"AB_phi": None, "AB_B": "B", "B_phi": None, "B_A": "A", "B_B": "B"}

# versions reachable by symmetry: (AB)^T = B^T A^T swaps the roles of A and B
EQUIVALENT_VERSIONS = {"AB_A": "AB_B", "A_phi": "B_phi", "A_A": "B_B", "A_B": "B_A"}

SCHEMES = ("general", "csa")


class ConfigError(ValueError):
    """Parameters violate a scheme precondition."""


@dataclass(frozen=True)
class SdmmConfig:
    """Parameters of one SDMM instance.

    ``A_s`` is ``L x K`` and ``B_s`` is ``K x M``; ``X_A``/``X_B`` are the
    collusion thresholds; ``S`` is the batch size. For the ``B_*`` versions A
    is not secured, so ``X_A`` must be 0. ``AB_*`` versions allow any
    ``X_A, X_B >= 0``.
    """

    L: int
    K: int
    M: int
    N: int
    X_A: int
    X_B: int
    S: int
    q: int
    version: str = "AB_phi"

    def __post_init__(self):
        for name in ("L", "K", "M", "N", "S"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.X_A < 0 or self.X_B < 0:
            raise ConfigError("security levels must be >= 0")
        if self.version not in VERSIONS:
            raise ConfigError(f"unknown version {self.version!r}; expected one of {VERSIONS}")
        if self.version.startswith("B_") and self.X_A != 0:
            raise ConfigError(f"version {self.version} leaves A unsecured, so X_A must be 0")
        try:
            PrimeField(self.q)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def field(self) -> PrimeField:
        return PrimeField(self.q)

    @property
    def side_info(self) -> Optional[str]:
        return SIDE_INFO[self.version]

    @property
    def X(self) -> int:
        return max(self.X_A, self.X_B)

    @classmethod
    def for_scheme(cls, scheme: str, version: str, L: int, K: int, M: int, N: int, X: int, q: int,
                   X_A: Optional[int] = None, X_B: Optional[int] = None) -> "SdmmConfig":
        """Build a config with security levels from the version table and
        the batch size the scheme dictates."""
        if version not in VERSIONS:
            raise ConfigError(f"unknown version {version!r}")
        if X_A is None:
            X_A = 0 if version.startswith("B_") else X
        if X_B is None:
            X_B = X
        if scheme == "csa":
            S = N - X_A - X_B
        elif scheme in ("general", "scalar", "outer", "hadamard"):
            S = N - max(X_A, X_B)
        else:
            raise ConfigError(f"unknown scheme {scheme!r}")
        if S < 1:
            raise ConfigError(f"{scheme} scheme needs S >= 1, got S = {S} (N={N}, X_A={X_A}, X_B={X_B})")
        return cls(L, K, M, N, X_A, X_B, S, q, version)


def min_field_size(scheme: str, N: int, S: int) -> int:
    """Smallest prime q for which the default evaluation points exist."""
    from .field import smallest_prime_above

    if scheme == "csa":
        # N points outside {0, -f_1, ..., -f_S}
        return smallest_prime_above(N + S)
    return smallest_prime_above(N)


def check_general(config: SdmmConfig, exact: bool = True) -> None:
    limit = config.N - config.X
    if config.S > limit or (exact and config.S != limit):
        rel = "=" if exact else "<="
        raise ConfigError(f"general scheme needs S {rel} N - max(X_A, X_B) = {limit}, got S = {config.S}")
    if config.q <= config.N:
        raise ConfigError(f"general scheme needs q > N for distinct nonzero points (q={config.q}, N={config.N})")


def check_csa(config: SdmmConfig) -> None:
    expect = config.N - config.X_A - config.X_B
    if config.S != expect:
        raise ConfigError(f"CSA scheme needs S = N - X_A - X_B = {expect}, got S = {config.S}")
    if config.q < config.N + config.S + 1:
        raise ConfigError(
            f"CSA scheme needs q > N + S (q={config.q}, N={config.N}, S={config.S}); "
            f"smallest valid q is {min_field_size('csa', config.N, config.S)}"
        )


def general_points(N: int) -> tuple[int, ...]:
    return tuple(range(1, N + 1))


def csa_points(q: int, N: int, S: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Default ``(f_consts, alphas)``: ``f_s = s`` and the ``N`` smallest
    nonzero elements avoiding every ``-f_s``."""
    f = tuple(range(1, S + 1))
    forbidden = {(-fs) % q for fs in f}
    alphas = tuple(a for a in range(1, q) if a not in forbidden)[:N]
    if len(alphas) < N:
        raise ConfigError(f"F_{q} has fewer than {N} admissible evaluation points for S={S}")
    return f, alphas


@dataclass(frozen=True)
class SecretBatch:
    a_mats: tuple[np.ndarray, ...]
    b_mats: tuple[np.ndarray, ...]

    @property
    def S(self) -> int:
        return len(self.a_mats)

    @classmethod
    def from_lists(cls, field: PrimeField, a_mats, b_mats) -> "SecretBatch":
        a = tuple(field.array(m).reshape(np.shape(m) if np.ndim(m) == 2 else (1, -1)) for m in a_mats)
        b = tuple(field.array(m).reshape(np.shape(m) if np.ndim(m) == 2 else (1, -1)) for m in b_mats)
        if len(a) != len(b):
            raise ConfigError("A and B batches differ in length")
        return cls(a, b)

    @classmethod
    def random(cls, config: SdmmConfig, seed: int) -> "SecretBatch":
        rng = np.random.default_rng([_u64(seed), 0xA5])
        f = config.field
        a = tuple(f.random_matrix(rng, config.L, config.K) for _ in range(config.S))
        b = tuple(f.random_matrix(rng, config.K, config.M) for _ in range(config.S))
        return cls(a, b)

    def check_shapes(self, config: SdmmConfig) -> None:
        if self.S != config.S:
            raise ConfigError(f"batch has {self.S} pairs, config expects S={config.S}")
        for a, b in zip(self.a_mats, self.b_mats):
            if a.shape != (config.L, config.K) or b.shape != (config.K, config.M):
                raise ConfigError(
                    f"batch matrices {a.shape} x {b.shape} do not match "
                    f"({config.L}x{config.K}) x ({config.K}x{config.M})"
                )

    def products(self, field: PrimeField) -> list[np.ndarray]:
        return [field.matmul(a, b) for a, b in zip(self.a_mats, self.b_mats)]


def _u64(seed: int) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class NoiseBatch:
    """Uniform noise matrices ``z[s][x]`` (A side) and ``z_prime[s][x]`` (B side).

    Each matrix is drawn from its own stream keyed by ``(seed, stream, side,
    s, x)``, so any single matrix can be regenerated without replaying the
    others.
    """

    z_mats: tuple[tuple[np.ndarray, ...], ...]
    z_prime_mats: tuple[tuple[np.ndarray, ...], ...]
    rng_seed: Optional[int] = None

    @classmethod
    def generate(cls, field: PrimeField, S: int, X_A: int, X_B: int,
                 a_shape: tuple[int, int], b_shape: tuple[int, int], seed: int, stream: int = 0) -> "NoiseBatch":
        seed = _u64(seed)

        def draw(side, s, x, shape):
            rng = np.random.default_rng([seed, stream, side, s, x])
            return field.random_matrix(rng, *shape)

        z = tuple(tuple(draw(0, s, x, a_shape) for x in range(X_A)) for s in range(S))
        zp = tuple(tuple(draw(1, s, x, b_shape) for x in range(X_B)) for s in range(S))
        return cls(z, zp, seed)

    @classmethod
    def for_config(cls, config: SdmmConfig, seed: int, stream: int = 0) -> "NoiseBatch":
        return cls.generate(config.field, config.S, config.X_A, config.X_B,
                            (config.L, config.K), (config.K, config.M), seed, stream)

    @classmethod
    def zeros(cls, field: PrimeField, S: int, X_A: int, X_B: int, a_shape, b_shape) -> "NoiseBatch":
        z = tuple(tuple(field.zeros(*a_shape) for _ in range(X_A)) for _ in range(S))
        zp = tuple(tuple(field.zeros(*b_shape) for _ in range(X_B)) for _ in range(S))
        return cls(z, zp, None)

    @property
    def X_A(self) -> int:
        return len(self.z_mats[0]) if self.z_mats else 0

    @property
    def X_B(self) -> int:
        return len(self.z_prime_mats[0]) if self.z_prime_mats else 0


@dataclass(frozen=True)
class ShareSet:
    """Shares held by each server: ``a_shares[n][s]`` and ``b_shares[n][s]``
    (0-indexed)."""

    scheme: str
    q: int
    a_shares: tuple[tuple[np.ndarray, ...], ...]
    b_shares: tuple[tuple[np.ndarray, ...], ...]
    alphas: tuple[int, ...]
    S: int
    X_A: int
    X_B: int
    f_consts: tuple[int, ...] = ()

    @property
    def N(self) -> int:
        return len(self.alphas)

    def reconstruct(self, s: int, which: str) -> np.ndarray:
        """Recover ``A_s`` (``which="A"``) or ``B_s`` from all servers' shares (``s`` 0-indexed)."""
        shares = [(self.a_shares if which == "A" else self.b_shares)[n][s] for n in range(self.N)]
        x_level = self.X_A if which == "A" else self.X_B
        f_s = self.f_consts[s] if self.scheme == "csa" else None
        return reconstruct_from_shares(PrimeField(self.q), shares, self.alphas, self.scheme,
                                       s=s + 1, S=self.S, x_level=x_level, f_s=f_s, b_side=(which == "B"))


def _check_points(field: PrimeField, alphas: Sequence[int], N: Optional[int] = None) -> tuple[int, ...]:
    pts = tuple(int(a) % field.q for a in alphas)
    if len(set(pts)) != len(pts):
        raise ConfigError("evaluation points must be distinct")
    if N is not None and len(pts) != N:
        raise ConfigError(f"need {N} evaluation points, got {len(pts)}")
    return pts


def _batch_dims(batch: SecretBatch, noise: NoiseBatch) -> tuple[int, int, int]:
    if noise.z_mats and len(noise.z_mats) != batch.S:
        raise ConfigError("noise batch size does not match secrets")
    if noise.z_prime_mats and len(noise.z_prime_mats) != batch.S:
        raise ConfigError("noise batch size does not match secrets")
    for s in range(batch.S):
        a, b = batch.a_mats[s], batch.b_mats[s]
        for z in (noise.z_mats[s] if noise.z_mats else ()):
            if z.shape != a.shape:
                raise ConfigError(f"A-noise shape {z.shape} != secret shape {a.shape}")
        for z in (noise.z_prime_mats[s] if noise.z_prime_mats else ()):
            if z.shape != b.shape:
                raise ConfigError(f"B-noise shape {z.shape} != secret shape {b.shape}")
    return batch.S, noise.X_A, noise.X_B


def general_share(batch: SecretBatch, noise: NoiseBatch, alphas: Sequence[int], field: PrimeField) -> ShareSet:
    """Share ``A_s`` as ``a^s A_s + sum_x a^(S+x) Z_sx`` at each point ``a``
    (likewise for B). Requires distinct nonzero points and ``S + X <= N``."""
    pts = _check_points(field, alphas)
    if 0 in pts:
        raise ConfigError("general scheme points must be nonzero")
    S, X_A, X_B = _batch_dims(batch, noise)
    N = len(pts)
    if S + max(X_A, X_B) > N:
        raise ConfigError(f"general scheme needs S + X <= N (S={S}, X={max(X_A, X_B)}, N={N})")
    q = field.q

    def encode(secrets, noises, x_level):
        out = []
        for a in pts:
            row = []
            for s in range(S):
                acc = pow(a, s + 1, q) * secrets[s]
                for x in range(x_level):
                    acc = acc + pow(a, S + x + 1, q) * noises[s][x]
                row.append(acc % q)
            out.append(tuple(row))
        return tuple(out)

    a_sh = encode(batch.a_mats, noise.z_mats, X_A)
    b_sh = encode(batch.b_mats, noise.z_prime_mats, X_B)
    return ShareSet("general", q, a_sh, b_sh, pts, S, X_A, X_B)


def csa_share(batch: SecretBatch, noise: NoiseBatch, f_consts: Sequence[int], alphas: Sequence[int],
              field: PrimeField) -> ShareSet:
    """Cross-subspace alignment shares.

    ``A~ = A_s + sum_x (f_s+a)^x Z_sx`` and
    ``B~ = (f_s+a)^-1 (B_s + sum_x (f_s+a)^x Z'_sx)``. The B prefactor is kept
    even when ``X_B = 0``; the decoder's Cauchy columns depend on it.
    """
    from .field import build_csa_matrix

    q = field.q
    S, X_A, X_B = _batch_dims(batch, noise)
    pts = _check_points(field, alphas)
    f = tuple(int(v) % q for v in f_consts)
    if len(f) != S:
        raise ConfigError(f"need {S} f constants, got {len(f)}")
    if S + X_A + X_B != len(pts):
        raise ConfigError(f"CSA scheme needs S = N - X_A - X_B (S={S}, X_A={X_A}, X_B={X_B}, N={len(pts)})")
    try:
        build_csa_matrix(field, f, pts, X_A + X_B)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    a_sh, b_sh = [], []
    for a in pts:
        a_row, b_row = [], []
        for s in range(S):
            beta = (f[s] + a) % q
            acc = batch.a_mats[s].copy()
            for x in range(X_A):
                acc = acc + pow(beta, x + 1, q) * noise.z_mats[s][x]
            a_row.append(acc % q)
            acc = batch.b_mats[s].copy()
            for x in range(X_B):
                acc = acc + pow(beta, x + 1, q) * noise.z_prime_mats[s][x]
            b_row.append((acc % q) * field.inv(beta) % q)
        a_sh.append(tuple(a_row))
        b_sh.append(tuple(b_row))
    return ShareSet("csa", q, tuple(a_sh), tuple(b_sh), pts, S, X_A, X_B, f)


def reconstruct_from_shares(field: PrimeField, shares: Sequence[np.ndarray], alphas: Sequence[int], scheme: str,
                            *, s: int, S: int, x_level: int, f_s: Optional[int] = None,
                            b_side: bool = False) -> np.ndarray:
    """Recover one secret from its per-server shares.

    ``s`` is 1-indexed. General shares live in the span of ``a^1..a^(S+X)``
    and are interpolated on the first ``S + x_level`` servers; CSA shares are
    a degree-``x_level`` polynomial in ``f_s + a`` (after undoing the B-side
    prefactor) whose constant term is the secret.
    """
    q = field.q
    pts = [int(a) % q for a in alphas]
    shape = np.shape(shares[0])
    flat = np.array([np.asarray(sh, dtype=np.int64).reshape(-1) for sh in shares])
    if scheme == "general":
        need = S + x_level
        if len(pts) < need:
            raise ConfigError(f"need {need} shares, have {len(pts)}")
        rows = vandermonde_rows(field, pts[:need], 1, need)
        coeffs = solve_linear_system(field, rows, flat[:need])
        return coeffs[s - 1].reshape(shape)
    if scheme == "csa":
        if f_s is None:
            raise ConfigError("CSA reconstruction needs f_s")
        need = x_level + 1
        if len(pts) < need:
            raise ConfigError(f"need {need} shares, have {len(pts)}")
        betas = [(f_s + a) % q for a in pts[:need]]
        vals = flat[:need]
        if b_side:
            vals = (vals * np.array(betas, dtype=np.int64)[:, None]) % q
        rows = vandermonde_rows(field, betas, 0, need)
        coeffs = solve_linear_system(field, rows, vals)
        return coeffs[0].reshape(shape)
    raise ConfigError(f"unknown scheme {scheme!r}")
