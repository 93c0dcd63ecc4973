"""
Codec Module
TNID <-> discovery-signal transforms: base-D message digits, Galois Fourier
Transform encoding, validity checking, frequency-offset estimation, and
multi-user decoding by tone-score thresholding.

Notation: K information symbols u_1..u_K are padded to [0, u, 0, ..., 0] and
transformed with the n x n Vandermonde matrix of beta, so coordinate n of a
codeword is sum_k u_k * beta^(n*k). Each coordinate is the subcarrier index
of the single energized tone in OFDM symbol n.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from errors import KTooLargeError, OutOfRangeError
from gfield import FieldParams

logger = logging.getLogger(__name__)

Tnid = int
InfoSymbols = Tuple[int, ...]
Codeword = Tuple[int, ...]
DetectedTones = Tuple[FrozenSet[int], ...]


@dataclass(frozen=True)
class DecodeResult:
    tnid: Tnid
    matches: int
    offset: int = 0


def _sort_results(results: Iterable[DecodeResult]) -> List[DecodeResult]:
    return sorted(results, key=lambda r: (-r.matches, r.tnid))


def message_to_symbols(m: Tnid, params: FieldParams, k: int) -> InfoSymbols:
    """Split m into K base-D digits, least significant first (u_1 first)."""
    if k < 1:
        raise KTooLargeError(f"K must be >= 1, got {k}")
    if not 0 <= m < params.d ** k:
        raise OutOfRangeError(f"TNID {m} outside 0..{params.d ** k - 1}")
    digits = []
    for _ in range(k):
        m, digit = divmod(m, params.d)
        digits.append(digit)
    return tuple(digits)


def symbols_to_message(u: Sequence[int], params: FieldParams) -> Tnid:
    m = 0
    for digit in reversed(u):
        m = m * params.d + int(digit)
    return m


def generator_matrix(params: FieldParams, k: int) -> np.ndarray:
    """n x K matrix G with G[n, j] = beta^(n*(j+1)); codeword = G @ u mod d."""
    rows = np.arange(params.n)[:, None]
    cols = np.arange(1, k + 1)[None, :]
    return params.beta_powers[(rows * cols) % params.n]


def gft_encode(u: Sequence[int], params: FieldParams) -> Codeword:
    k = len(u)
    if k > params.n - 1:
        raise KTooLargeError(f"K={k} exceeds n-1={params.n - 1}")
    for digit in u:
        params.check_element(int(digit))
    if k == 0:
        return tuple([0] * params.n)
    c = generator_matrix(params, k) @ np.asarray(u, dtype=np.int64) % params.d
    return tuple(int(x) for x in c)


def igft(c: Sequence[int], params: FieldParams) -> Tuple[int, ...]:
    """Inverse transform: element j = n^-1 * sum_n c_n * beta^(-n*j)."""
    _check_length(c, params)
    rows = np.arange(params.n)[None, :]
    cols = np.arange(params.n)[:, None]
    # beta^(-x) == beta^(n - x mod n)
    inverse = params.beta_powers[(-(rows * cols)) % params.n]
    total = inverse @ np.asarray(c, dtype=np.int64) % params.d
    return tuple(int(x) * params.n_inv % params.d for x in total)


def is_valid_codeword(c: Sequence[int], params: FieldParams, k: int = 1) -> bool:
    """Full code-membership test: igft is zero outside positions 1..K."""
    spectrum = igft(c, params)
    return spectrum[0] == 0 and all(x == 0 for x in spectrum[k + 1:])


def estimate_offset(c_prime: Sequence[int], params: FieldParams) -> int:
    """First igft coefficient of a received word, i.e. its frequency offset."""
    _check_length(c_prime, params)
    return sum(int(x) for x in c_prime) % params.d * params.n_inv % params.d


def shift_codeword(c: Sequence[int], delta: int, params: FieldParams) -> Codeword:
    return tuple((int(x) + delta) % params.d for x in c)


def capacity_ok(n: int, k: int, d: int) -> bool:
    """d signals of an (n, k) code coexist unambiguously iff k <= ceil(n/d)."""
    return k <= -(-n // d)


def correction_capability(n: int, k: int) -> Tuple[int, int]:
    """(t, rho): correctable errors and erasures of an (n, k) MDS code."""
    return (n - k) // 2, n - k


def default_tau(n: int, k: int) -> int:
    return k + (n - k) // 2


def codebook(params: FieldParams) -> np.ndarray:
    """D x n lookup table of tone indices for every K=1 TNID."""
    u = np.arange(params.d, dtype=np.int64)[:, None]
    return u * params.beta_powers[None, :] % params.d


def perfect_detection(codewords: Iterable[Sequence[int]], params: FieldParams) -> DetectedTones:
    """Per-symbol union of the given codewords' tones, as an ideal detector would report."""
    symbols = [set() for _ in range(params.n)]
    for c in codewords:
        _check_length(c, params)
        for n, tone in enumerate(c):
            symbols[n].add(int(tone))
    return tuple(frozenset(s) for s in symbols)


def decode_multi(det: DetectedTones, params: FieldParams, k: int = 1, tau: int = None) -> List[DecodeResult]:
    """
    Recover every TNID whose codeword has at least tau tones among the detected sets.

    K=1 scores all D candidates through the codebook. K>=2 solves the K x K
    Vandermonde system for each K-tuple of detected tones taken from K distinct
    symbols, then verifies the re-encoded codeword's score.
    """
    if tau is None:
        tau = default_tau(params.n, k)
    _check_length(det, params)
    if k > params.n - 1:
        raise KTooLargeError(f"K={k} exceeds n-1={params.n - 1}")
    if not k <= tau <= params.n:
        raise OutOfRangeError(f"threshold tau={tau} must lie in {k}..{params.n}")
    if not any(det):
        return []

    mask = _tone_mask(det, params)
    if k == 1:
        scores = mask[np.arange(params.n)[None, :], codebook(params)].sum(axis=1)
        accepted = np.flatnonzero(scores >= tau)
        return _sort_results(DecodeResult(int(u), int(scores[u])) for u in accepted)
    return _sort_results(_decode_vandermonde(det, mask, params, k, tau))


def decode_with_offset_search(det: DetectedTones, params: FieldParams, k: int = 1,
                              tau: int = None, delta_max: int = 3) -> List[DecodeResult]:
    """Sweep offset hypotheses -delta_max..delta_max; keep each TNID at its best-scoring offset."""
    if not 0 <= delta_max < params.d:
        raise OutOfRangeError(f"delta_max={delta_max} must lie in 0..{params.d - 1}")
    best: Dict[int, DecodeResult] = {}
    # 0, +1, -1, +2, -2, ...: the first maximal score wins, so ties go to the smallest |delta|
    for delta in _offset_order(delta_max):
        shifted = tuple(frozenset((x - delta) % params.d for x in s) for s in det)
        for result in decode_multi(shifted, params, k, tau):
            current = best.get(result.tnid)
            if current is None or result.matches > current.matches:
                best[result.tnid] = DecodeResult(result.tnid, result.matches, delta)
    return _sort_results(best.values())


def _offset_order(delta_max: int) -> List[int]:
    order = [0]
    for step in range(1, delta_max + 1):
        order.extend([step, -step])
    return order


def _check_length(seq: Sequence, params: FieldParams) -> None:
    if len(seq) != params.n:
        raise OutOfRangeError(f"expected {params.n} symbols, got {len(seq)}")


def _tone_mask(det: DetectedTones, params: FieldParams) -> np.ndarray:
    mask = np.zeros((params.n, params.d), dtype=bool)
    for n, tones in enumerate(det):
        for tone in tones:
            if not 0 <= tone < params.d:
                raise OutOfRangeError(f"tone index {tone} outside 0..{params.d - 1}")
            mask[n, tone] = True
    return mask


def _solve_matrix_inverse(matrix: np.ndarray, d: int) -> np.ndarray:
    """Gauss-Jordan inverse over GF(d); the Vandermonde blocks used here are always invertible."""
    size = matrix.shape[0]
    work = np.concatenate([matrix % d, np.eye(size, dtype=np.int64)], axis=1)
    for col in range(size):
        pivot = next(r for r in range(col, size) if work[r, col] != 0)
        work[[col, pivot]] = work[[pivot, col]]
        work[col] = work[col] * pow(int(work[col, col]), d - 2, d) % d
        for r in range(size):
            if r != col and work[r, col] != 0:
                work[r] = (work[r] - work[r, col] * work[col]) % d
    return work[:, size:]


def _decode_vandermonde(det: DetectedTones, mask: np.ndarray, params: FieldParams,
                        k: int, tau: int) -> List[DecodeResult]:
    # A codeword scoring >= tau is present in at least k of the first n - tau + k symbols.
    window = range(params.n - tau + k)
    generator = generator_matrix(params, k)
    found: Dict[Tuple[int, ...], int] = {}
    for chosen in itertools.combinations(window, k):
        if not all(det[s] for s in chosen):
            continue
        inverse = _solve_matrix_inverse(generator[list(chosen)], params.d)
        tuples = np.array(list(itertools.product(*(sorted(det[s]) for s in chosen))), dtype=np.int64)
        u = tuples @ inverse.T % params.d
        codewords = u @ generator.T % params.d
        scores = mask[np.arange(params.n)[None, :], codewords].sum(axis=1)
        for row in np.flatnonzero(scores >= tau):
            found[tuple(int(x) for x in u[row])] = int(scores[row])
    logger.debug("Vandermonde decode kept %d candidate(s)", len(found))
    return [DecodeResult(symbols_to_message(u, params), score) for u, score in found.items()]
