"""
Tests for the discovery-signal codec: digits, GFT encoding, validity,
offset recovery and multi-user decoding.
"""

import itertools

import numpy as np
import pytest

from codec import (DecodeResult, capacity_ok, codebook, correction_capability, decode_multi,
                   decode_with_offset_search, default_tau, estimate_offset, gft_encode, igft,
                   is_valid_codeword, message_to_symbols, perfect_detection, shift_codeword,
                   symbols_to_message)
from errors import KTooLargeError, OutOfRangeError
from gfield import field_new

GF7_3 = field_new(7, 3)
GF521_8 = field_new(521, 8)


def encode(tnid, params, k=1):
    return gft_encode(message_to_symbols(tnid, params, k), params)


def test_message_digits():
    assert message_to_symbols(9, GF7_3, 2) == (2, 1)
    assert message_to_symbols(5, GF7_3, 1) == (5,)
    assert message_to_symbols(520, GF521_8, 1) == (520,)
    assert symbols_to_message((2, 1), GF7_3) == 9
    assert symbols_to_message((0,), GF7_3) == 0
    with pytest.raises(OutOfRangeError):
        message_to_symbols(49, GF7_3, 2)


def test_message_roundtrip_exhaustive():
    for m in range(49):
        assert symbols_to_message(message_to_symbols(m, GF7_3, 2), GF7_3) == m


def test_gft_encode_small_fields():
    assert gft_encode((5,), GF7_3) == (5, 3, 6)
    assert gft_encode((1,), field_new(7, 6)) == (1, 3, 2, 6, 4, 5)
    assert gft_encode((0,), GF521_8) == (0,) * 8
    with pytest.raises(KTooLargeError):
        gft_encode((1, 2, 3), GF7_3)


def test_igft_inverts_encoding_exhaustively():
    assert igft((5, 3, 6), GF7_3) == (0, 5, 0)
    assert igft((0, 0, 0), GF7_3) == (0, 0, 0)
    for u in range(7):
        assert igft(gft_encode((u,), GF7_3), GF7_3) == (0, u, 0)
    params = field_new(7, 6)
    for u in itertools.product(range(7), repeat=2):
        assert igft(gft_encode(u, params), params) == (0,) + u + (0, 0, 0)


def test_validity_and_offset_estimate():
    assert is_valid_codeword((5, 3, 6), GF7_3)
    assert not is_valid_codeword((6, 4, 0), GF7_3)
    assert is_valid_codeword((0, 0, 0), GF7_3)
    assert estimate_offset((6, 4, 0), GF7_3) == 1
    assert estimate_offset((5, 3, 6), GF7_3) == 0


def test_offset_recovery_exhaustive_gf7():
    for u in range(7):
        c = encode(u, GF7_3)
        for delta in range(7):
            shifted = shift_codeword(c, delta, GF7_3)
            assert estimate_offset(shifted, GF7_3) == delta
            assert is_valid_codeword(shifted, GF7_3) == (delta == 0)
            corrected = shift_codeword(shifted, -estimate_offset(shifted, GF7_3), GF7_3)
            assert corrected == c


@pytest.mark.parametrize("cases", [2000, pytest.param(10_000, marks=pytest.mark.slow)])
def test_offset_recovery_randomized_gf521(cases):
    rng = np.random.default_rng(3)
    for _ in range(cases):
        u = int(rng.integers(521))
        delta = int(rng.integers(521))
        shifted = shift_codeword(encode(u, GF521_8), delta, GF521_8)
        assert estimate_offset(shifted, GF521_8) == delta
        assert is_valid_codeword(shifted, GF521_8) == (delta == 0)


def test_capacity_and_capability():
    assert capacity_ok(16, 2, 15)
    assert not capacity_ok(16, 2, 16)
    assert all(capacity_ok(8, 1, d) for d in range(1, 600))
    assert correction_capability(8, 1) == (3, 7)
    assert correction_capability(16, 2) == (7, 14)
    assert correction_capability(5, 5) == (0, 0)
    assert default_tau(8, 1) == 4


def test_decode_multi_scores_candidates():
    det = ({5, 1}, {3, 2}, {6, 4})
    det = tuple(frozenset(s) for s in det)
    assert decode_multi(det, GF7_3, 1, 1) == [DecodeResult(1, 3), DecodeResult(5, 3)]
    det = (frozenset({5}), frozenset({0}), frozenset({6}))
    assert decode_multi(det, GF7_3, 1, 2) == [DecodeResult(5, 2)]
    assert decode_multi((frozenset(),) * 3, GF7_3, 1, 1) == []


def test_other_candidates_score_zero_gf7():
    table = codebook(GF7_3)
    det = perfect_detection([table[5], table[1]], GF7_3)
    for u in range(7):
        score = sum(int(table[u][n]) in det[n] for n in range(3))
        assert score == (3 if u in (5, 1) else 0)


def test_per_symbol_disjointness():
    table = codebook(GF521_8)
    for n in range(8):
        assert len(set(table[:, n].tolist())) == 521


def test_mds_agreement_exhaustive_gf7():
    params = field_new(7, 6)
    for k in (1, 2):
        words = [gft_encode(u, params) for u in itertools.product(range(7), repeat=k)]
        for a, b in itertools.combinations(words, 2):
            assert sum(x == y for x, y in zip(a, b)) <= k - 1


def test_superposed_pairs_decode_exactly_gf7():
    for pair in itertools.combinations(range(7), 2):
        det = perfect_detection([encode(u, GF7_3) for u in pair], GF7_3)
        results = decode_multi(det, GF7_3, 1, 3)
        assert sorted(r.tnid for r in results) == list(pair)
        assert all(r.matches == 3 for r in results)


@pytest.mark.parametrize("d", [1, 5, 15, 30])
def test_superposed_sets_decode_exactly_gf521(d):
    rng = np.random.default_rng(d)
    table = codebook(GF521_8)
    for _ in range(300):
        sent = sorted(int(x) for x in rng.choice(521, size=d, replace=False))
        det = perfect_detection([table[u] for u in sent], GF521_8)
        results = decode_multi(det, GF521_8, 1, default_tau(8, 1))
        assert [r.tnid for r in sorted(results, key=lambda r: r.tnid)] == sent
        assert all(r.matches == 8 for r in results)


@pytest.mark.slow
@pytest.mark.parametrize("d", [1, 5, 15, 30])
def test_superposed_sets_decode_exactly_at_scale(d):
    rng = np.random.default_rng(100 + d)
    table = codebook(GF521_8)
    for _ in range(10_000):
        sent = set(int(x) for x in rng.choice(521, size=d, replace=False))
        det = perfect_detection([table[u] for u in sent], GF521_8)
        assert {r.tnid for r in decode_multi(det, GF521_8, 1, 4)} == sent


@pytest.mark.parametrize("cases", [500, pytest.param(10_000, marks=pytest.mark.slow)])
def test_erasures_and_errors_within_capability(cases):
    rng = np.random.default_rng(11)
    t, rho = correction_capability(8, 1)
    for _ in range(cases):
        u = int(rng.integers(521))
        c = encode(u, GF521_8)
        erased = set(rng.choice(8, size=rho, replace=False).tolist())
        det = tuple(frozenset() if n in erased else frozenset({c[n]}) for n in range(8))
        assert [r.tnid for r in decode_multi(det, GF521_8, 1, 8 - rho)] == [u]

        wrong = set(rng.choice(8, size=t, replace=False).tolist())
        corrupted = []
        for n in range(8):
            tone = c[n]
            if n in wrong:
                tone = (tone + int(rng.integers(1, 521))) % 521
            corrupted.append(frozenset({tone}))
        assert [r.tnid for r in decode_multi(tuple(corrupted), GF521_8, 1, 1 + t)] == [u]


def test_k2_decoding_roundtrip():
    params = field_new(17, 16)
    rng = np.random.default_rng(5)
    for _ in range(30):
        sent = set(int(x) for x in rng.choice(17 ** 2, size=3, replace=False))
        det = perfect_detection([encode(m, params, 2) for m in sent], params)
        results = decode_multi(det, params, 2, 16)
        assert {r.tnid for r in results} == sent


@pytest.mark.parametrize("trials", [20, pytest.param(1000, marks=pytest.mark.slow)])
def test_k2_capacity_boundary_no_ambiguity_at_15(trials):
    params = field_new(17, 16)
    rng = np.random.default_rng(7)
    for _ in range(trials):
        sent = set(int(x) for x in rng.choice(17 ** 2, size=15, replace=False))
        det = perfect_detection([encode(m, params, 2) for m in sent], params)
        assert {r.tnid for r in decode_multi(det, params, 2, 16)} == sent


def test_k2_erasure_decoding():
    params = field_new(17, 16)
    m = 200
    c = encode(m, params, 2)
    det = tuple(frozenset() if n % 2 else frozenset({c[n]}) for n in range(16))
    assert [r.tnid for r in decode_multi(det, params, 2, 8)] == [m]


def test_offset_search_recovers_shift():
    det = tuple(frozenset({x}) for x in shift_codeword((5, 3, 6), 1, GF7_3))
    assert decode_with_offset_search(det, GF7_3, 1, 3, 2) == [DecodeResult(5, 3, 1)]
    clean = tuple(frozenset({x}) for x in (5, 3, 6))
    assert decode_with_offset_search(clean, GF7_3, 1, 3, 2) == [DecodeResult(5, 3, 0)]
    assert decode_with_offset_search(clean, GF7_3, 1, 2, 0) == decode_multi(clean, GF7_3, 1, 2)


def test_offset_search_negative_shift_gf521():
    c = encode(77, GF521_8)
    det = tuple(frozenset({x}) for x in shift_codeword(c, -2, GF521_8))
    assert decode_with_offset_search(det, GF521_8, 1, 4, 3) == [DecodeResult(77, 8, -2)]


def test_decode_rejects_bad_threshold():
    with pytest.raises(OutOfRangeError):
        decode_multi((frozenset({1}),) * 3, GF7_3, 1, 0)
    with pytest.raises(OutOfRangeError):
        decode_with_offset_search((frozenset({1}),) * 3, GF7_3, 1, 1, 7)
