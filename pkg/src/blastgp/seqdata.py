"""Domain records and file ingestion: FASTQ reads, alignment hit tables, labels.

Quality scores are rescaled from phred to the 0.0..4.0 step-0.1 range the
terminals expect (min(phred, 40)/10); tile coordinates are normalised to
[0, 1] by the configured tile extent.  Reads containing symbols outside
{A,C,G,T,N} or with the wrong length are skipped and counted rather than
raising, so a single bad record cannot abort an ingest run.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

READ_LEN = 36
NO_MATCH_LOG10_E = 2.0  # "E value of 100" sentinel for reads with no hit
HQ_E_THRESHOLD = 1e-5
ALPHABET = set("ACGTN")


@dataclass(frozen=True)
class DnaRecord:
    """One fixed-length read: bases, per-base quality and tile position."""

    id: str
    bases: str
    qual: tuple[float, ...]
    x: float
    y: float

    def check(self, read_len: int = READ_LEN) -> None:
        if len(self.bases) != read_len or len(self.qual) != read_len:
            raise ValueError(f"{self.id}: expected {read_len} bases+quals, "
                             f"got {len(self.bases)}/{len(self.qual)}")
        if any(b not in ALPHABET for b in self.bases):
            raise ValueError(f"{self.id}: bases outside A/C/G/T/N")
        for q in self.qual:
            if not (0.0 <= q <= 4.0) or abs(q * 10 - round(q * 10)) > 1e-9:
                raise ValueError(f"{self.id}: quality {q} not a multiple of 0.1 in [0, 4]")
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"{self.id}: tile position outside [0, 1]")


@dataclass(frozen=True)
class BlastLabel:
    """Per-read targets: log10 of the best E value, best match length, flags."""

    log10_e: float
    best_len: int
    has_hq_match: bool
    has_multi_hq: bool

    def check(self) -> None:
        if self.has_hq_match and not self.log10_e < math.log10(HQ_E_THRESHOLD):
            raise ValueError("high-quality match requires log10(E) < -5")
        if (self.best_len == 0) != (self.log10_e == NO_MATCH_LOG10_E):
            raise ValueError("zero length and the no-match sentinel must coincide")
        if self.has_multi_hq and not self.has_hq_match:
            raise ValueError("multiple high-quality matches imply at least one")


@dataclass(frozen=True)
class HitSummary:
    """Alignment hits for one query, best (lowest E) first."""

    query_id: str
    hits: tuple[tuple[str, float, int], ...]  # (subject_id, e_value, match_len)


@dataclass
class QualityConfig:
    """FASTQ decoding settings: phred offset, tile pixel extent, read length."""

    offset: int = 33
    tile_extent: float = 2048.0
    read_len: int = READ_LEN
    max_phred: int = 40


@dataclass
class ParseStats:
    records: int = 0
    skipped_length: int = 0
    skipped_alphabet: int = 0
    skipped_malformed: int = 0
    coord_warnings: int = 0

    def total_skipped(self) -> int:
        return self.skipped_length + self.skipped_alphabet + self.skipped_malformed


def _decode_qual(qline: str, cfg: QualityConfig) -> tuple[float, ...]:
    out = []
    for ch in qline:
        phred = ord(ch) - cfg.offset
        out.append(min(max(phred, 0), cfg.max_phred) / 10.0)
    return tuple(out)


def _parse_coords(header: str, cfg: QualityConfig) -> tuple[float, float] | None:
    """Pull tile x/y out of an Illumina-style colon-separated header token."""
    for token in header.split():
        parts = token.split(":")
        if len(parts) >= 4:
            try:
                px, py = int(parts[-2]), int(parts[-1])
            except ValueError:
                continue
            return (min(max(px / cfg.tile_extent, 0.0), 1.0),
                    min(max(py / cfg.tile_extent, 0.0), 1.0))
    return None


def iter_fastq(lines, cfg: QualityConfig | None = None, stats: ParseStats | None = None):
    """Yield DnaRecord from 4-line FASTQ records, skipping bad ones with counts."""
    cfg = cfg or QualityConfig()
    stats = stats if stats is not None else ParseStats()
    it = iter(lines)
    lineno = 0

    def take():
        nonlocal lineno
        line = next(it)
        lineno += 1
        if isinstance(line, bytes):
            line = line.decode("ascii")
        return line

    while True:
        try:
            header = take()
        except StopIteration:
            return
        header = header.rstrip("\r\n")
        if not header:
            continue
        at = lineno
        try:
            seq = take()
            plus = take()
            qline = take()
        except StopIteration:
            stats.skipped_malformed += 1
            log.warning("line %d: truncated FASTQ record at %r", at, header[:40])
            return
        seq = seq.rstrip("\r\n").upper()
        qline = qline.rstrip("\r\n")
        if not header.startswith("@") or not plus.startswith("+"):
            stats.skipped_malformed += 1
            log.warning("line %d: malformed FASTQ record at %r", at, header[:40])
            continue
        if len(seq) != len(qline):
            stats.skipped_malformed += 1
            log.warning("line %d: sequence/quality length mismatch for %r", at, header[:40])
            continue
        if len(seq) != cfg.read_len:
            stats.skipped_length += 1
            continue
        if any(b not in ALPHABET for b in seq):
            stats.skipped_alphabet += 1
            continue
        rid = header[1:]
        coords = _parse_coords(rid, cfg)
        if coords is None:
            stats.coord_warnings += 1
            coords = (0.0, 0.0)
        stats.records += 1
        yield DnaRecord(rid, seq, _decode_qual(qline, cfg), *coords)


def read_fastq(path, cfg: QualityConfig | None = None):
    """Parse a FASTQ file; returns (records, stats)."""
    stats = ParseStats()
    with open(path, "r", encoding="ascii") as fh:
        records = list(iter_fastq(fh, cfg, stats))
    return records, stats


def write_fastq(records, path, cfg: QualityConfig | None = None) -> None:
    cfg = cfg or QualityConfig()
    with open(path, "w", encoding="ascii") as fh:
        for r in records:
            qline = "".join(chr(cfg.offset + int(round(q * 10))) for q in r.qual)
            fh.write(f"@{r.id}\n{r.bases}\n+\n{qline}\n")


@dataclass
class HitColumns:
    """Column positions in the tab-separated hit table (default: 12-column tabular)."""

    query: int = 0
    subject: int = 1
    length: int = 3
    e_value: int = 10

    def min_fields(self) -> int:
        return max(self.query, self.subject, self.length, self.e_value) + 1


@dataclass
class HitParseStats:
    rows: int = 0
    kept: int = 0
    filtered_subject: int = 0
    skipped_rows: int = 0


def parse_hits(lines, restrict=None, columns: HitColumns | None = None,
               stats: HitParseStats | None = None) -> dict[str, HitSummary]:
    """Summarise a tab-separated alignment table per query.

    ``restrict`` is a subject-id allowlist (empty or None accepts all
    subjects).  Hits are sorted ascending by E value; rows that fail to
    parse or carry E <= 0 are skipped and counted.  Queries whose hits were
    all filtered still appear, with an empty hit list.
    """
    columns = columns or HitColumns()
    stats = stats if stats is not None else HitParseStats()
    allow = set(restrict) if restrict else None
    per_query: dict[str, list[tuple[str, float, int]]] = {}
    for line in lines:
        if isinstance(line, bytes):
            line = line.decode("ascii")
        line = line.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        stats.rows += 1
        fields = line.split("\t")
        if len(fields) < columns.min_fields():
            stats.skipped_rows += 1
            continue
        try:
            qid = fields[columns.query]
            sid = fields[columns.subject]
            mlen = int(fields[columns.length])
            ev = float(fields[columns.e_value])
        except ValueError:
            stats.skipped_rows += 1
            continue
        if ev <= 0.0 or mlen < 0:
            stats.skipped_rows += 1
            continue
        bucket = per_query.setdefault(qid, [])
        if allow is not None and sid not in allow:
            stats.filtered_subject += 1
            continue
        stats.kept += 1
        bucket.append((sid, ev, mlen))
    return {
        qid: HitSummary(qid, tuple(sorted(hits, key=lambda h: h[1])))
        for qid, hits in per_query.items()
    }


def build_label(h: HitSummary) -> BlastLabel:
    """Collapse a sorted hit summary into the four training targets."""
    if not h.hits:
        return BlastLabel(NO_MATCH_LOG10_E, 0, False, False)
    _, best_e, best_len = h.hits[0]
    n_hq = sum(1 for _, e, _ in h.hits if e < HQ_E_THRESHOLD)
    return BlastLabel(math.log10(best_e), best_len, best_e < HQ_E_THRESHOLD, n_hq >= 2)


EMPTY_HITS = HitSummary("", ())


@dataclass
class ReadMatrix:
    """Column-packed reads ready for the interpreter."""

    ids: list[str]
    bases: np.ndarray  # uint8 [n, 36], A=0 C=1 G=2 T=3 N=4
    qual: np.ndarray   # float64 [n, 36]
    x: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ids)

    @classmethod
    def from_records(cls, records) -> "ReadMatrix":
        from .interpreter import BASE_CODES
        ids = [r.id for r in records]
        bases = np.array([[BASE_CODES[b] for b in r.bases] for r in records], dtype=np.uint8)
        qual = np.array([r.qual for r in records], dtype=np.float64)
        x = np.array([r.x for r in records], dtype=np.float64)
        y = np.array([r.y for r in records], dtype=np.float64)
        return cls(ids, bases, qual, x, y)

    def to_records(self) -> list[DnaRecord]:
        from .interpreter import BASE_LETTERS
        out = []
        for i, rid in enumerate(self.ids):
            seq = "".join(BASE_LETTERS[b] for b in self.bases[i])
            out.append(DnaRecord(rid, seq, tuple(round(q, 1) for q in self.qual[i]),
                                 float(self.x[i]), float(self.y[i])))
        return out


@dataclass
class LabelArrays:
    """Column-packed labels aligned with a ReadMatrix."""

    log10_e: np.ndarray
    best_len: np.ndarray
    hq: np.ndarray
    multi: np.ndarray

    @property
    def n(self) -> int:
        return int(self.log10_e.shape[0])

    @classmethod
    def from_labels(cls, labels) -> "LabelArrays":
        return cls(
            np.array([l.log10_e for l in labels], dtype=np.float64),
            np.array([l.best_len for l in labels], dtype=np.int32),
            np.array([l.has_hq_match for l in labels], dtype=bool),
            np.array([l.has_multi_hq for l in labels], dtype=bool),
        )

    def label(self, i: int) -> BlastLabel:
        return BlastLabel(float(self.log10_e[i]), int(self.best_len[i]),
                          bool(self.hq[i]), bool(self.multi[i]))


RECORDS_FILE = "records.tsv"
LABELS_FILE = "labels.tsv"
MANIFEST_FILE = "manifest.txt"

_RECORD_HEADER = "read_id\tbases\tqual\tx\ty"
_LABEL_HEADER = "read_id\tlog10_e\tbest_len\thq\tmulti"


def save_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_RECORD_HEADER + "\n")
        for r in records:
            quals = ",".join(f"{q:.1f}" for q in r.qual)
            fh.write(f"{r.id}\t{r.bases}\t{quals}\t{r.x!r}\t{r.y!r}\n")


def load_records(path) -> list[DnaRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line == _RECORD_HEADER:
                continue
            try:
                rid, bases, quals, x, y = line.split("\t")
                rec = DnaRecord(rid, bases, tuple(float(q) for q in quals.split(",")),
                                float(x), float(y))
                rec.check(read_len=len(rec.bases))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad record row: {exc}") from None
            records.append(rec)
    return records


def save_labels(ids, labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_LABEL_HEADER + "\n")
        for rid, lab in zip(ids, labels):
            fh.write(f"{rid}\t{lab.log10_e!r}\t{lab.best_len}\t"
                     f"{int(lab.has_hq_match)}\t{int(lab.has_multi_hq)}\n")


def load_labels(path) -> tuple[list[str], list[BlastLabel]]:
    ids, labels = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line == _LABEL_HEADER:
                continue
            try:
                rid, loge, blen, hq, multi = line.split("\t")
                labels.append(BlastLabel(float(loge), int(blen), hq == "1", multi == "1"))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad label row: {exc}") from None
            ids.append(rid)
    return ids, labels


def save_manifest(entries: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in entries.items():
            fh.write(f"{k}={v}\n")


def load_manifest(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


@dataclass
class Dataset:
    """A records+labels pair as stored in a dataset directory."""

    matrix: ReadMatrix
    labels: LabelArrays
    manifest: dict[str, str] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.n


def save_dataset(records, labels, out_dir, manifest=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_records(records, out / RECORDS_FILE)
    save_labels([r.id for r in records], labels, out / LABELS_FILE)
    save_manifest(manifest or {}, out / MANIFEST_FILE)


def load_dataset(data_dir) -> Dataset:
    data = Path(data_dir)
    records = load_records(data / RECORDS_FILE)
    ids, labels = load_labels(data / LABELS_FILE)
    rec_ids = [r.id for r in records]
    if ids != rec_ids:
        by_id = dict(zip(ids, labels))
        try:
            labels = [by_id[r] for r in rec_ids]
        except KeyError as exc:
            raise ValueError(f"label file does not cover read {exc}") from None
    manifest = {}
    mpath = data / MANIFEST_FILE
    if mpath.exists():
        manifest = load_manifest(mpath)
    return Dataset(ReadMatrix.from_records(records), LabelArrays.from_labels(labels), manifest)
