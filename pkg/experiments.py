"""
Experiments Module
Seeded experiment orchestration: codec round trip, SNR sweep of the
erasure/error rates, density sweep of the discovery delay against the
baseline, and the closed-form baseline table. Every experiment returns a
pandas DataFrame; writing it out is the harness's job.
"""

import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import baseline
from channel import Transmission, db_to_ratio, detect_tones, link_gain, snr_to_noise, synthesize_slot
from codec import (DecodeResult, decode_multi, decode_with_offset_search, default_tau, estimate_offset,
                   gft_encode, is_valid_codeword, message_to_symbols, perfect_detection, shift_codeword)
from config import ExperimentConfig
from errors import ConfigError, OutOfRangeError
from gfield import FieldParams
from protocol import Topology, run_discovery

logger = logging.getLogger(__name__)

SNR_COLUMNS = ["snr_db", "trials", "erasure_rate", "error_rate"]
DENSITY_COLUMNS = ["density", "nodes", "median_proposed", "median_baseline"]
CURVE_COLUMNS = ["L", "t", "p", "p_discover", "p_discover_opt"]


def trial_rng(seed: int, experiment: str, *indices: int) -> np.random.Generator:
    """Independent stream for (seed, experiment, indices...), stable under reordering."""
    key = (zlib.crc32(experiment.encode("utf-8")),) + tuple(int(i) for i in indices)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


# --- codec round trip -------------------------------------------------------

@dataclass
class CodecReport:
    tnid: int
    codeword: Tuple[int, ...]
    received: Tuple[Tuple[int, ...], ...]
    valid: bool
    offset_estimate: Optional[int]
    decoded: List[DecodeResult] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return [r.tnid for r in self.decoded] == [self.tnid]

    def lines(self) -> List[str]:
        rows = [
            f"tnid: {self.tnid}",
            "codeword: " + ",".join(str(c) for c in self.codeword),
            "received: " + ",".join("-" if not s else "/".join(str(x) for x in s) for s in self.received),
            f"valid: {str(self.valid).lower()}",
            "offset: " + ("n/a" if self.offset_estimate is None else str(self.offset_estimate)),
        ]
        if self.decoded:
            rows.extend(f"decoded: {r.tnid} (matches={r.matches}, offset={r.offset})" for r in self.decoded)
        else:
            rows.append("decoded: none")
        rows.append("round trip: " + ("ok" if self.success else "FAILED"))
        return rows


def parse_corruption(spec: Optional[str], n: int) -> Dict[int, Optional[int]]:
    """`idx:value` replaces a symbol's tone, `idx:-` erases it; comma separated."""
    corruption: Dict[int, Optional[int]] = {}
    if not spec:
        return corruption
    for item in spec.split(","):
        index, sep, value = item.strip().partition(":")
        if not sep:
            raise OutOfRangeError(f"bad corruption item {item!r}, expected index:value or index:-")
        try:
            idx = int(index)
            corruption[idx] = None if value.strip() == "-" else int(value)
        except ValueError:
            raise OutOfRangeError(f"bad corruption item {item!r}") from None
        if not 0 <= idx < n:
            raise OutOfRangeError(f"corrupted symbol index {idx} outside 0..{n - 1}")
    return corruption


def codec_roundtrip(tnid: int, params: FieldParams, k: int, offset: int = 0, corrupt: str = None,
                    tau: int = None, delta_max: int = None) -> CodecReport:
    """Encode, shift, corrupt and decode one TNID, reporting every intermediate."""
    codeword = gft_encode(message_to_symbols(tnid, params, k), params)
    received = shift_codeword(codeword, offset, params)
    corruption = parse_corruption(corrupt, params.n)
    tones: List[Tuple[int, ...]] = []
    for n, tone in enumerate(received):
        if n in corruption:
            replacement = corruption[n]
            if replacement is not None:
                params.check_element(replacement)
            tones.append(() if replacement is None else (replacement,))
        else:
            tones.append((tone,))

    complete = all(len(s) == 1 for s in tones)
    word = tuple(s[0] for s in tones) if complete else None
    valid = complete and is_valid_codeword(word, params, k)
    estimate = estimate_offset(word, params) if complete else None

    if tau is None:
        # shrink the threshold by the erasures the caller injected
        erased = sum(1 for s in tones if not s)
        tau = max(k, default_tau(params.n, k) - erased)
    if delta_max is None:
        delta_max = abs(offset)
    det = tuple(frozenset(s) for s in tones)
    decoded = decode_with_offset_search(det, params, k, tau, delta_max)
    return CodecReport(tnid, codeword, tuple(tones), valid, estimate, decoded)


# --- SNR sweep ----------------------------------------------------------------

def snr_trial(params: FieldParams, k: int, transmitters: int, model, receiver, rng) -> Tuple[int, int]:
    """One slot with `transmitters` distinct random TNIDs; returns (misses, false accepts)."""
    pool = params.d ** k
    tnids = rng.choice(pool, size=transmitters, replace=False)
    txs = [Transmission(gft_encode(message_to_symbols(int(t), params, k), params),
                        link_gain(model, 1.0, rng, params.d), receiver.tone_energy)
           for t in tnids]
    grid = synthesize_slot(txs, model, rng, params)
    det = detect_tones(grid, receiver.gamma)
    tau = receiver.tau if receiver.tau is not None else default_tau(params.n, k)
    decoded = {r.tnid for r in decode_multi(det, params, k, tau)}
    sent = {int(t) for t in tnids}
    return len(sent - decoded), len(decoded - sent)


def run_snr_sweep(cfg: ExperimentConfig) -> pd.DataFrame:
    params = cfg.field_params()
    k = cfg.k
    transmitters = cfg.get_int("sweep.transmitters")
    receiver = cfg.receiver_config(delta_max=0)
    rows = []
    for point, snr_db in enumerate(cfg.get_float_list("sweep.snr_db")):
        start = time.time()
        model = cfg.channel_model(noise_var=snr_to_noise(db_to_ratio(snr_db), params.d))
        misses = errors = 0
        for trial in range(cfg.trials):
            rng = trial_rng(cfg.seed, "sweep-snr", point, trial)
            trial_misses, trial_errors = snr_trial(params, k, transmitters, model, receiver, rng)
            misses += trial_misses
            errors += trial_errors
        signals = max(cfg.trials * transmitters, 1)
        rows.append({"snr_db": snr_db, "trials": cfg.trials,
                     "erasure_rate": misses / signals, "error_rate": errors / signals})
        logger.info("SNR %.1f dB: erasure %.4f, error %.4f (%.1fs)", snr_db, misses / signals,
                    errors / signals, time.time() - start)
    return pd.DataFrame(rows, columns=SNR_COLUMNS)


# --- density sweep ------------------------------------------------------------

def density_trial(cfg: ExperimentConfig, point: int, nodes: int,
                  trial: int) -> Tuple[List[int], List[int], float, List[int]]:
    """
    Proposed and baseline runs on the same topology. Returns both completion
    lists, the mean transmissions per node of the proposed run and its
    completions in elapsed slots (one discovery slot every protocol.T).
    """
    params = cfg.field_params()
    protocol = cfg.protocol_config()
    topology = Topology.drop(nodes, cfg.get_float("sim.area"), cfg.get_float("sim.range"),
                             trial_rng(cfg.seed, "density-topology", point, trial))
    max_offset = cfg.get_int("channel.max_offset")
    receiver = cfg.receiver_config(delta_max=2 * max_offset)
    proposed = run_discovery(topology, protocol, params, cfg.channel_model(),
                             trial_rng(cfg.seed, "density-proposed", point, trial),
                             receiver=receiver, max_offset=max_offset, stop_when_complete=True)
    p = cfg.get_optional_float("baseline.p")
    if p is None:
        p = baseline.auto_probability(topology.mean_degree)
    reference = baseline.simulate_baseline(topology, p, protocol.max_slots,
                                           trial_rng(cfg.seed, "density-baseline", point, trial),
                                           stop_when_complete=True)
    return (proposed.completion, reference.completion, float(np.mean(proposed.transmissions)),
            proposed.elapsed_slots(protocol.T))


def _density_trial_args(args):
    return density_trial(*args)


def run_density_sweep(cfg: ExperimentConfig) -> pd.DataFrame:
    if cfg.k != 1:
        raise ConfigError(f"density-sweep simulates K=1 codebooks only, got code.k={cfg.k}")
    area = cfg.get_float("sim.area")
    workers = cfg.get_int("sim.workers")
    rows = []
    for point, density in enumerate(cfg.get_float_list("sweep.density")):
        nodes = int(round(density * area))
        if nodes == 0:
            logger.info("density %.4g drops no nodes; skipped", density)
            continue
        start = time.time()
        jobs = [(cfg, point, nodes, trial) for trial in range(cfg.trials)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_density_trial_args, jobs))
        else:
            results = [density_trial(*job) for job in jobs]
        proposed = [c for r in results for c in r[0]]
        reference = [c for r in results for c in r[1]]
        rows.append({"density": density, "nodes": nodes,
                     "median_proposed": float(np.median(proposed)),
                     "median_baseline": float(np.median(reference))})
        elapsed = [e for r in results for e in r[3]]
        logger.info("density %.4g (%d nodes): median proposed %.1f (%.0f elapsed slots), baseline %.1f, "
                    "mean transmissions %.1f (%.1fs)", density, nodes, rows[-1]["median_proposed"],
                    float(np.median(elapsed)), rows[-1]["median_baseline"],
                    float(np.mean([r[2] for r in results])), time.time() - start)
    return pd.DataFrame(rows, columns=DENSITY_COLUMNS)


# --- baseline table -----------------------------------------------------------

def baseline_curve(L_values: Sequence[int], t_values: Sequence[int], p_values: Sequence[float]) -> pd.DataFrame:
    rows = []
    for L in L_values:
        for t in t_values:
            for p in p_values:
                rows.append({"L": L, "t": t, "p": p,
                             "p_discover": baseline.p_discover(p, L, t),
                             "p_discover_opt": baseline.p_discover_opt(L, t)})
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def run_baseline_curve(cfg: ExperimentConfig) -> pd.DataFrame:
    return baseline_curve(cfg.get_int_list("curve.L"), cfg.get_int_list("curve.t"),
                          cfg.get_float_list("curve.p"))


def spearman(series_x: Sequence[float], series_y: Sequence[float]) -> float:
    """Rank correlation, used to check that erasure falls as SNR rises."""
    return float(pd.Series(series_x).corr(pd.Series(series_y), method="spearman"))


def perfect_decode(tnids: Sequence[int], params: FieldParams, k: int = 1, tau: int = None) -> List[int]:
    """Decode the union of the given TNIDs' codewords under ideal tone detection."""
    codewords = [gft_encode(message_to_symbols(int(t), params, k), params) for t in tnids]
    tau = params.n if tau is None else tau
    return [r.tnid for r in decode_multi(perfect_detection(codewords, params), params, k, tau)]
