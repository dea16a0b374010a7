"""Synthetic reads labelled by closed-form oracles, for desk-scale experiments.

Each oracle scores a read with a simple formula over its bases/qualities;
scores are turned into labels either by rank-mapping into the label's legal
range (regression targets, so the training bin structure is exercised) or by
thresholding (classification).  Every mapping parameter lands in the dataset
manifest so a dataset is reproducible from (seed, manifest) alone.

Oracles:

* ``e_value``  - (sum of i*qual_i) * (sum of i/qual_i), protected division;
  the product is minimal for uniform quality, so it measures position-
  weighted quality wobble.  Rank-mapped to log10(E) over 12 integer decades
  plus a worst-tail no-match sentinel.
* ``length``   - sum of (i if qual_i > 1 else -i); rank-mapped to match
  lengths 18..36 with a worst-tail zero-length group.
* ``match``    - sum over i of (qual_{i+1} - G_{i+1})/qual_i, 35 terms with
  G_j = +/-1 for a G base; positive class iff the sum exceeds 72.0.
* ``repeat``   - total identical-base run length (low-complexity reads repeat
  in a genome); top scores by a configurable fraction form the positive
  class.  This oracle has no published closed form and is this package's own
  stand-in, chosen so the class imbalance matches the real training split.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .seqdata import BlastLabel, DnaRecord, NO_MATCH_LOG10_E

READ_LEN = 36
MATCH_THRESHOLD = 72.0
ORACLES = ("e_value", "length", "match", "repeat")

# Defaults mirroring the real training split: 137 of 2357 reads had no
# match, 324 of 2357 repeated, and the 13-bin E plan had one 11-example bin.
DEFAULT_SENTINEL_FRAC = 137 / 2357
DEFAULT_REPEAT_FRAC = 324 / 2357
DEFAULT_SMALL_BIN = 11


@dataclass
class OracleSpec:
    """Which oracle labels the dataset, plus generator knobs.

    ``noise_sd`` is relative: the oracle score is jittered with gaussian
    noise of ``noise_sd * std(score)`` before mapping.  ``qual_dist`` picks
    the per-base quality model ("auto" chooses per oracle: the match task
    uses the noisy/clean scan mixture so its classes balance).
    """

    name: str
    noise_sd: float = 0.0
    qual_dist: str = "auto"
    n_rate: float = 0.01
    mixed_frac: float = 0.65
    sentinel_frac: float = DEFAULT_SENTINEL_FRAC
    positive_frac: float = DEFAULT_REPEAT_FRAC
    small_bin: int = DEFAULT_SMALL_BIN

    def __post_init__(self):
        if self.name not in ORACLES:
            raise ValueError(f"unknown oracle {self.name!r}; expected one of {ORACLES}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")

    def resolved_qual_dist(self) -> str:
        if self.qual_dist != "auto":
            return self.qual_dist
        return "mixed" if self.name in ("match", "repeat") else "uniform"


def _protected_div(num, den):
    return np.where(den == 0.0, 1.0, num / np.where(den == 0.0, 1.0, den))


def e_value_score(qual: np.ndarray) -> np.ndarray:
    """(sum i*qual_i) * (sum i/qual_i) over positions 1..36, protected division."""
    i = np.arange(1, READ_LEN + 1, dtype=np.float64)
    s_iq = (i * qual).sum(axis=1)
    s_idq = _protected_div(np.broadcast_to(i, qual.shape), qual).sum(axis=1)
    return s_iq * s_idq


def length_score(qual: np.ndarray) -> np.ndarray:
    """sum of (i if qual_i > 1 else -i) over positions 1..36."""
    i = np.arange(1, READ_LEN + 1, dtype=np.float64)
    return np.where(qual > 1.0, i, -i).sum(axis=1)


def match_score(bases: np.ndarray, qual: np.ndarray) -> np.ndarray:
    """sum over i=1..35 of (qual_{i+1} - G_{i+1}) / qual_i, protected division."""
    g = np.where(bases == 2, 1.0, -1.0)
    return _protected_div(qual[:, 1:] - g[:, 1:], qual[:, :-1]).sum(axis=1)


def repeat_score(bases: np.ndarray) -> np.ndarray:
    """Total identical-base run length (36 when every base differs from its left
    neighbour, 666 for a mononucleotide read)."""
    n = bases.shape[0]
    score = np.zeros(n, dtype=np.float64)
    run = np.ones(n, dtype=np.float64)
    score += run
    for i in range(1, READ_LEN):
        same = bases[:, i] == bases[:, i - 1]
        run = np.where(same, run + 1.0, 1.0)
        score += run
    return score


def _draw_quality(spec: OracleSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    dist = spec.resolved_qual_dist()
    uniform = rng.integers(0, 41, size=(n, READ_LEN)).astype(np.float64)
    if dist == "uniform":
        tenths = uniform
    elif dist == "high":
        tenths = np.clip(np.rint(rng.normal(34.0, 3.0, size=(n, READ_LEN))), 0, 40)
    elif dist == "mixed":
        noisy = rng.random(n) < spec.mixed_frac
        clean = np.clip(np.rint(rng.normal(34.0, 3.0, size=(n, READ_LEN))), 0, 40)
        tenths = np.where(noisy[:, None], uniform, clean)
    else:
        raise ValueError(f"unknown quality distribution {dist!r}")
    return tenths / 10.0


def _midrank(score: np.ndarray) -> np.ndarray:
    return rankdata(score, method="average")


def _rel(rank: np.ndarray, count: int) -> np.ndarray:
    if count <= 1:
        return np.zeros_like(rank)
    return (rank - 1.0) / (count - 1.0)


def _labels_e_value(score, spec):
    n = score.size
    mr = _midrank(score)
    n_sent = int(round(n * spec.sentinel_frac))
    sentinel = mr > n - n_sent
    mapped = ~sentinel
    m = int(mapped.sum())
    if m < spec.small_bin + 12:
        raise ValueError("dataset too small for the 13-bin E-value plan")
    mmr = _midrank(score[mapped])
    small = mmr > m - spec.small_bin          # thin decade just under no-match
    body = m - spec.small_bin
    t = np.where(small,
                 (mmr - (m - spec.small_bin) - 1.0) / spec.small_bin,  # decade [0, 1)
                 -11.0 + 11.0 * (mmr - 1.0) / body)                    # decades [-11, 0)
    rel = _rel(mmr, m)
    lens = 18 + np.minimum(18, np.floor((1.0 - rel) * 19.0)).astype(int)
    log10_e = np.full(n, NO_MATCH_LOG10_E)
    log10_e[mapped] = np.minimum(t, 0.999999)
    best_len = np.zeros(n, dtype=int)
    best_len[mapped] = lens
    return log10_e, best_len, log10_e < -5.0, np.zeros(n, dtype=bool)


def _labels_length(score, spec):
    n = score.size
    mr = _midrank(score)
    n_sent = int(round(n * spec.sentinel_frac))
    sentinel = mr <= n_sent                   # worst scores never match
    mapped = ~sentinel
    m = int(mapped.sum())
    rel = _rel(_midrank(score[mapped]), m)
    lens = 18 + np.minimum(18, np.floor(rel * 19.0)).astype(int)
    log10_e = np.full(n, NO_MATCH_LOG10_E)
    log10_e[mapped] = 0.999999 - 12.0 * rel   # longer match, better E
    best_len = np.zeros(n, dtype=int)
    best_len[mapped] = lens
    return log10_e, best_len, log10_e < -5.0, np.zeros(n, dtype=bool)


def _labels_match(score, spec):
    n = score.size
    positive = score > MATCH_THRESHOLD
    log10_e = np.empty(n)
    for cls in (True, False):
        sel = positive == cls
        k = int(sel.sum())
        if k == 0:
            continue
        rel = _rel(_midrank(score[sel]), k)
        if cls:
            log10_e[sel] = -5.0001 - 4.999 * rel
        else:
            log10_e[sel] = 0.9999 - 5.999 * rel
    rel_all = _rel(_midrank(score), n)
    best_len = 18 + np.minimum(18, np.floor(rel_all * 19.0)).astype(int)
    return log10_e, best_len, positive, np.zeros(n, dtype=bool)


def _labels_repeat(score, spec):
    n = score.size
    k = int(round(n * spec.positive_frac))
    order = np.argsort(score, kind="stable")  # ties resolved by read index
    positive = np.zeros(n, dtype=bool)
    positive[order[n - k:]] = True
    log10_e = np.empty(n)
    rel_pos = _rel(_midrank(score[positive]), k)
    log10_e[positive] = -5.0001 - 4.999 * rel_pos
    n_neg = n - k
    rel_neg = _rel(_midrank(score[~positive]), n_neg)
    log10_e[~positive] = 1.0 - 8.0 * rel_neg  # some negatives still match well
    rel_all = _rel(_midrank(score), n)
    best_len = 18 + np.minimum(18, np.floor(rel_all * 19.0)).astype(int)
    return log10_e, best_len, log10_e < -5.0, positive


_MAPPERS = {
    "e_value": _labels_e_value,
    "length": _labels_length,
    "match": _labels_match,
    "repeat": _labels_repeat,
}


def oracle_scores(name: str, bases: np.ndarray, qual: np.ndarray) -> np.ndarray:
    if name == "e_value":
        return e_value_score(qual)
    if name == "length":
        return length_score(qual)
    if name == "match":
        return match_score(bases, qual)
    if name == "repeat":
        return repeat_score(bases)
    raise ValueError(f"unknown oracle {name!r}")


def generate_synthetic(n: int, oracle: OracleSpec, rng: np.random.Generator):
    """Generate ``n`` labelled reads; returns (records, labels, manifest)."""
    if n < 2:
        raise ValueError("need at least two records")
    bases = rng.integers(0, 4, size=(n, READ_LEN)).astype(np.uint8)
    if oracle.n_rate > 0:
        bases[rng.random((n, READ_LEN)) < oracle.n_rate] = 4
    qual = _draw_quality(oracle, n, rng)
    x = rng.random(n)
    y = rng.random(n)

    score = oracle_scores(oracle.name, bases, qual)
    if oracle.noise_sd > 0:
        score = score + rng.normal(0.0, 1.0, n) * (oracle.noise_sd * score.std())
    log10_e, best_len, hq, multi = _MAPPERS[oracle.name](score, oracle)

    from .interpreter import BASE_LETTERS
    records = []
    labels = []
    for i in range(n):
        seq = "".join(BASE_LETTERS[b] for b in bases[i])
        records.append(DnaRecord(f"syn-{oracle.name}.{i:06d}", seq,
                                 tuple(round(q, 1) for q in qual[i]),
                                 float(x[i]), float(y[i])))
        lab = BlastLabel(float(log10_e[i]), int(best_len[i]), bool(hq[i]), bool(multi[i]))
        lab.check()
        labels.append(lab)

    manifest = {
        "oracle": oracle.name,
        "n": str(n),
        "noise_sd": repr(oracle.noise_sd),
        "qual_dist": oracle.resolved_qual_dist(),
        "n_rate": repr(oracle.n_rate),
        "mixed_frac": repr(oracle.mixed_frac),
        "mapping": _mapping_note(oracle),
        "positives": str(int(np.sum(multi if oracle.name == "repeat" else hq))),
        "no_match": str(int(np.sum(best_len == 0))),
    }
    if oracle.name == "match":
        manifest["threshold"] = repr(MATCH_THRESHOLD)
    if oracle.name == "repeat":
        manifest["positive_frac"] = repr(oracle.positive_frac)
    if oracle.name in ("e_value", "length"):
        manifest["sentinel_frac"] = repr(oracle.sentinel_frac)
    if oracle.name == "e_value":
        manifest["small_bin"] = str(oracle.small_bin)
    return records, labels, manifest


def _mapping_note(oracle: OracleSpec) -> str:
    return {
        "e_value": "score rank-mapped to log10(E) decades -11..0, small top decade, worst tail = no-match",
        "length": "score rank-mapped to lengths 18..36, worst tail = length 0",
        "match": f"positive iff score > {MATCH_THRESHOLD}",
        "repeat": "top positive_frac of scores positive (stable sort)",
    }[oracle.name]
