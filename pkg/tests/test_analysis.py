import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from sdmm.analysis import (BudgetExceeded, SmallField, SweepGrid, audit_collusion, audit_config,
                           consistent_flags, measure_product_entropy, sweep_csv_rows, sweep_rate_vs_capacity)
from sdmm.capacity import EXACT, UPPER_BOUND_ONLY
from sdmm.field import PrimeField
from sdmm.sharing import ConfigError, NoiseBatch, SecretBatch, csa_points, csa_share, general_share


# ---------------------------------------------------------------------------
# independent oracles


def rank_mod(rows, q):
    m = [list(map(lambda v: int(v) % q, r)) for r in rows]
    rank, col = 0, 0
    width = len(m[0]) if m else 0
    while rank < len(m) and col < width:
        piv = next((r for r in range(rank, len(m)) if m[r][col]), None)
        if piv is None:
            col += 1
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = pow(m[rank][col], q - 2, q)
        m[rank] = [v * inv % q for v in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col]:
                f = m[r][col]
                m[r] = [(a - f * b) % q for a, b in zip(m[r], m[rank])]
        rank += 1
        col += 1
    return rank


def scalar_view_matrix(scheme, q, N, X, subset):
    """Columns: (a, b, z, z'); rows: A- and B-shares of the subset."""
    f = PrimeField(q)
    cols = []
    for unit in np.eye(4, dtype=np.int64):
        batch = SecretBatch.from_lists(f, [[[unit[0]]]], [[[unit[1]]]])
        noise = NoiseBatch(((np.array([[unit[2]]]),),), ((np.array([[unit[3]]]),),))
        if scheme == "csa":
            fc, al = csa_points(q, N, 1)
            sh = csa_share(batch, noise, fc, al, f)
        else:
            sh = general_share(batch, noise, range(1, N + 1), f)
        cols.append([int(sh.a_shares[n][0][0, 0]) for n in subset] + [int(sh.b_shares[n][0][0, 0]) for n in subset])
    return [list(r) for r in zip(*cols)]


def linear_mi(view, secret_cols, q):
    """I(secret; view) for a uniform linear map: rank(all) - rank(other columns)."""
    other = [[r[j] for j in range(len(r)) if j not in secret_cols] for r in view]
    return rank_mod(view, q) - rank_mod(other, q)


# ---------------------------------------------------------------------------
# audits


@pytest.mark.parametrize("scheme,N,q", [("general", 2, 3), ("general", 2, 5), ("general", 3, 5), ("csa", 3, 5)])
def test_audit_matches_rank_oracle(scheme, N, q):
    cfg = audit_config(scheme, N, 1, q, S=1)
    for size in range(1, N + 1):
        rep = audit_collusion(scheme, cfg, size)
        for sub in rep.subsets:
            view = scalar_view_matrix(scheme, q, N, 1, [n - 1 for n in sub.servers])
            assert sub.mi_a == pytest.approx(linear_mi(view, {0}, q), abs=1e-12)
            assert sub.mi_b == pytest.approx(linear_mi(view, {1}, q), abs=1e-12)
            assert sub.mi_joint == pytest.approx(linear_mi(view, {0, 1}, q), abs=1e-12)


def test_audit_size_x_is_exactly_zero():
    rep = audit_collusion("general", audit_config("general", 2, 1, 3), 1)
    assert rep.passed and rep.max_mi == 0.0
    assert all(s.independent for s in rep.subsets)
    assert rep.states == 3 ** 4


def test_audit_all_servers_reveals_secrets():
    rep = audit_collusion("general", audit_config("general", 2, 1, 3), 2)
    assert not rep.passed
    assert rep.subsets[0].mi_joint == pytest.approx(2.0)


def test_audit_csa_matrix_config():
    # 1x2 times 2x1 with N=3, X=1: still exact zero for single servers
    cfg = audit_config("csa", 3, 1, 5, L=1, K=2, M=1)
    rep = audit_collusion("csa", cfg, 1, budget=10 ** 6)
    assert rep.passed


def test_audit_budget_refusal():
    cfg = audit_config("general", 3, 1, 5, L=2, K=2, M=2)
    with pytest.raises(BudgetExceeded) as exc:
        audit_collusion("general", cfg, 1)
    assert exc.value.required > exc.value.budget


@pytest.mark.parametrize("scheme,N,q", [("general", 3, 3), ("csa", 3, 3), ("csa", 2, 5)])
def test_audit_config_rejects_unconstructible(scheme, N, q):
    with pytest.raises(ConfigError):
        audit_config(scheme, N, 1, q)


# ---------------------------------------------------------------------------
# entropy


def brute_entropy(L, K, M, q):
    counts = Counter()
    for a in itertools.product(range(q), repeat=L * K):
        for b in itertools.product(range(q), repeat=K * M):
            prod = tuple(sum(a[i * K + k] * b[k * M + j] for k in range(K)) % q for i in range(L) for j in range(M))
            counts[prod] += 1
    total = sum(counts.values())
    return -sum(c / total * math.log(c / total, q) for c in counts.values())


def rank_one_entropy(L, M, q):
    """H(ab^T) in q-ary units: the zero matrix has q^L + q^M - 1 preimages,
    each of the (q^L-1)(q^M-1)/(q-1) rank-one matrices has q-1."""
    total = q ** (L + M)
    p0 = Fraction(q ** L + q ** M - 1, total)
    count = (q ** L - 1) * (q ** M - 1) // (q - 1)
    p1 = Fraction(q - 1, total)
    h = -float(p0) * math.log(p0) - count * float(p1) * math.log(p1)
    return h / math.log(q)


@pytest.mark.parametrize("dims,q", [((1, 1, 1), 5), ((2, 1, 2), 3), ((2, 2, 1), 3), ((1, 2, 2), 2), ((2, 2, 2), 2)])
def test_entropy_matches_brute_force(dims, q):
    rep = measure_product_entropy(*dims, q)
    assert rep.entropy == pytest.approx(brute_entropy(*dims, q), abs=1e-12)


@pytest.mark.parametrize("q", [4, 8, 9, 16])
def test_entropy_matches_rank_one_formula_extension_fields(q):
    rep = measure_product_entropy(2, 1, 2, q, conditionals=False)
    assert rep.entropy == pytest.approx(rank_one_entropy(2, 2, q), abs=1e-12)


def test_entropy_conditionals_scalar():
    # given a, ab is uniform when a != 0 and constant when a = 0
    rep = measure_product_entropy(1, 1, 1, 7)
    assert rep.entropy_given_a == pytest.approx(6 / 7, abs=1e-12)
    assert rep.entropy_given_b == pytest.approx(6 / 7, abs=1e-12)


def test_entropy_q5_gap():
    rep = measure_product_entropy(1, 1, 1, 5)
    assert rep.samples == 25 and rep.formula == 1
    assert rep.gap < 0.15


def test_entropy_deterministic_and_sampled():
    a = measure_product_entropy(1, 2, 1, 5)
    b = measure_product_entropy(1, 2, 1, 5)
    assert a == b
    s = measure_product_entropy(1, 1, 1, 5, mode="sampled", budget=20000, seed=1)
    assert s.samples == 20000
    assert abs(s.entropy - measure_product_entropy(1, 1, 1, 5).entropy) < 0.02


def test_entropy_budget():
    with pytest.raises(BudgetExceeded):
        measure_product_entropy(2, 2, 2, 11)
    with pytest.raises(ValueError):
        measure_product_entropy(1, 1, 1, 5, mode="guess")


def test_small_field_tables():
    gf = SmallField(8)
    # every nonzero element has an inverse and multiplication is associative
    for a in range(1, 8):
        assert sum(gf.mul[a] == 1) == 1
    for a, b, c in itertools.product(range(8), repeat=3):
        assert gf.mul[gf.mul[a, b], c] == gf.mul[a, gf.mul[b, c]]
        assert gf.mul[a, gf.add[b, c]] == gf.add[gf.mul[a, b], gf.mul[a, c]]
    with pytest.raises(ValueError):
        SmallField(12)


# ---------------------------------------------------------------------------
# sweep


def test_consistent_flags():
    assert consistent_flags(1, 1, 1) == ()
    assert "K/min(L,M)->inf" in consistent_flags(1, 2, 3)


def test_sweep_small_grid():
    grid = SweepGrid(versions=("B_A", "AB_B", "AB_phi"), dims=(1, 2), servers=(3, 4), collusion=(1,))
    rows = sweep_rate_vs_capacity(grid)
    assert rows and not any(r.exceeds for r in rows)
    ba = [r for r in rows if r.version == "B_A" and r.N == 4
          and ((r.scheme == "csa" and r.K >= r.L) or (r.scheme == "general" and r.K <= r.L))]
    assert ba and all(r.matched and r.achieved == Fraction(3, 4) for r in ba)
    abb = [r for r in rows if r.version == "AB_B" and r.scheme == "general" and r.K <= r.M]
    assert abb and all(r.matched and r.achieved == 1 - Fraction(1, r.N) for r in abb)
    square = [r for r in rows if r.version == "AB_phi" and r.K == min(r.L, r.M) > 1]
    assert square and all(not r.matched and r.status == UPPER_BOUND_ONLY for r in square)
    csv_rows = sweep_csv_rows(rows[:1])
    assert [r[8] for r in csv_rows][:2] == ["download", "achieved_rate"]


def test_sweep_csa_inner_dominant_matches_limit():
    grid = SweepGrid(versions=("AB_phi",), schemes=("csa",), dims=(1, 2), servers=(5,), collusion=(1, 2))
    rows = [r for r in sweep_rate_vs_capacity(grid) if r.K > min(r.L, r.M)]
    assert rows
    for r in rows:
        assert r.achieved == Fraction(r.N - 2 * r.X, r.N)
        assert r.limit_status == EXACT and r.matched
