"""Evaluation of three-tree teams over 36-base reads.

The semantics in one place:

* a team is evaluated per read: the prepass0 tree runs once per base in
  5'-3' order (its value is stored in M and accumulated into Sum0), then
  prepass1 runs once per base (accumulated into Sum1), then the result tree
  runs once and yields the prediction;
* Aux1/Aux2 persist across all 73 calls and everything is zeroed per read;
* LOOK shifts the effective position one base ahead (clamped at the last
  base) for every position-dependent terminal, including pos itself;
* DIV returns 1 on a zero divisor; ORN skips its second argument when the
  first is positive; IFLTE evaluates only the taken branch.  Skipped
  branches produce no side effects and are not counted as visited.

The hot path is a stack-machine kernel compiled with numba; the
:func:`eval_node` / :func:`eval_individual` wrappers expose the same
semantics one call at a time for instrumentation and tests.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .primitives import Op, Role
from .trees import ConstantTable, Individual, Tree

READ_LEN = 36

# The kernels below dispatch on literal opcode values; pin the enum layout.
assert (int(Op.ADD), int(Op.LOOK), int(Op.A), int(Op.N), int(Op.SELF),
        int(Op.QUAL), int(Op.POS), int(Op.SUM1), int(Op.CONST)) == \
    (0, 6, 11, 15, 16, 20, 26, 32, 33)

# Base codes: A=0 C=1 G=2 T=3 N=4.  A+T and C+G are the complementary pairs
# (code sum 3); ring counts are 2 for purines A/G, 1 for pyrimidines C/T and
# 0 for N.
BASE_CODES = {"A": 0, "C": 1, "G": 2, "T": 3, "N": 4}
BASE_LETTERS = "ACGTN"
_RINGS = np.array([2, 1, 2, 1, 0], dtype=np.int8)

_STACK = 1024  # deepest possible tree is a 1022-node chain


@njit(cache=True, nogil=True)
def _eval_tree(code, cidx, ends, consts, bases, qual, run, spre, countn, x, y,
               base_pos, look0, state, m, fop, fhave, fflag, fargs):
    """Evaluate one prefix tree for one read position; returns (value, ops).

    ``base_pos`` is 0-based here.  ``state`` is [aux1, aux2, sum0, sum1];
    only the aux cells are ever written.  Frame arrays are caller-provided
    scratch so the per-call cost stays allocation-free.
    """
    pc = 0
    sp = 0
    look = look0
    ops = 0
    last = READ_LEN - 1
    while True:
        op = code[pc]
        ops += 1
        if op >= 11:  # terminal
            ep = base_pos + look
            if ep > last:
                ep = last
            if op == 20:    # QUAL
                v = qual[ep]
            elif op == 33:  # CONST
                v = consts[cidx[pc]]
            elif op <= 15:  # A C G T N
                v = 1.0 if bases[ep] == op - 11 else -1.0
            elif op == 26:  # POS (1-based)
                v = float(ep + 1)
            elif op == 21:  # RUN
                v = run[ep]
            elif op == 23:  # ENTROPY
                v = spre[ep]
            elif op == 16:  # SELF
                v = 1.0 if bases[ep] == bases[base_pos] else -1.0
            elif op == 17:  # COMPLEMENT: only A+T and C+G sum to 3
                v = 1.0 if bases[ep] + bases[base_pos] == 3 else -1.0
            elif op == 18:  # SAMESIZE
                v = 1.0 if _RINGS[bases[ep]] == _RINGS[bases[base_pos]] else -1.0
            elif op == 19:  # OPPOSITE
                b1 = bases[ep]
                b2 = bases[base_pos]
                v = -1.0 if (b1 == b2 or b1 + b2 == 3 or _RINGS[b1] == _RINGS[b2]) else 1.0
            elif op == 22:  # COUNTN
                v = countn
            elif op == 24:
                v = x
            elif op == 25:
                v = y
            elif op == 27:  # LEN
                v = 36.0
            elif op == 28:
                v = state[0]
            elif op == 29:
                v = state[1]
            elif op == 30:  # MEM
                v = m[ep]
            elif op == 31:
                v = state[2]
            else:           # SUM1
                v = state[3]
            pc += 1
        else:  # function: open a frame
            fop[sp] = op
            fhave[sp] = 0
            fflag[sp] = 0
            if op == 6:  # LOOK
                look += 1
            sp += 1
            pc += 1
            continue
        # feed the value upward, closing completed frames
        while True:
            if sp == 0:
                return v, ops
            fr = sp - 1
            h = fhave[fr]
            fargs[fr, h] = v
            h += 1
            fhave[fr] = h
            fop_fr = fop[fr]
            done = False
            if fop_fr == 0:    # ADD
                if h == 2:
                    v = fargs[fr, 0] + fargs[fr, 1]
                    done = True
            elif fop_fr == 1:  # SUB
                if h == 2:
                    v = fargs[fr, 0] - fargs[fr, 1]
                    done = True
            elif fop_fr == 2:  # MUL
                if h == 2:
                    v = fargs[fr, 0] * fargs[fr, 1]
                    done = True
            elif fop_fr == 3:  # DIV
                if h == 2:
                    b = fargs[fr, 1]
                    v = 1.0 if b == 0.0 else fargs[fr, 0] / b
                    done = True
            elif fop_fr == 4:  # ORN
                if h == 1:
                    if v > 0.0:
                        pc = ends[pc]  # second argument skipped entirely
                        v = 1.0
                        done = True
                else:
                    v = 1.0 if v > 0.0 else -1.0
                    done = True
            elif fop_fr == 5:  # IFLTE
                if h == 2:
                    if fargs[fr, 0] <= fargs[fr, 1]:
                        fflag[fr] = 1  # take c, skip d once c is in
                    else:
                        pc = ends[pc]  # skip c, fall through to d
                elif h == 3:
                    if fflag[fr] == 1:
                        pc = ends[pc]
                    v = fargs[fr, 2]
                    done = True
            elif fop_fr == 6:  # LOOK
                look -= 1
                done = True
            elif fop_fr == 7:  # SET_AUX1
                state[0] = v
                done = True
            elif fop_fr == 8:  # SET_AUX2
                state[1] = v
                done = True
            elif fop_fr == 9:  # SUM_AUX1
                state[0] += v
                v = state[0]
                done = True
            else:              # SUM_AUX2
                state[1] += v
                v = state[1]
                done = True
            if done:
                sp -= 1
            else:
                break


@njit(cache=True, nogil=True)
def _eval_team(code0, cidx0, ends0, code1, cidx1, ends1, code2, cidx2, ends2,
               consts, bases2, qual2, run2, spre2, countn1, x1, y1, preds):
    """Run the 36+36+1 call schedule for every read; returns total ops."""
    n = bases2.shape[0]
    m = np.zeros(READ_LEN, dtype=np.float64)
    state = np.zeros(4, dtype=np.float64)
    fop = np.empty(_STACK, dtype=np.int16)
    fhave = np.empty(_STACK, dtype=np.int16)
    fflag = np.empty(_STACK, dtype=np.uint8)
    fargs = np.empty((_STACK, 4), dtype=np.float64)
    total = 0
    for r in range(n):
        state[0] = 0.0
        state[1] = 0.0
        state[2] = 0.0
        state[3] = 0.0
        for i in range(READ_LEN):
            m[i] = 0.0
        bases = bases2[r]
        qual = qual2[r]
        run = run2[r]
        spre = spre2[r]
        countn = countn1[r]
        x = x1[r]
        y = y1[r]
        for bp in range(READ_LEN):
            v, ops = _eval_tree(code0, cidx0, ends0, consts, bases, qual, run, spre,
                                countn, x, y, bp, 0, state, m, fop, fhave, fflag, fargs)
            m[bp] = v
            state[2] += v
            total += ops
        for bp in range(READ_LEN):
            v, ops = _eval_tree(code1, cidx1, ends1, consts, bases, qual, run, spre,
                                countn, x, y, bp, 0, state, m, fop, fhave, fflag, fargs)
            state[3] += v
            total += ops
        v, ops = _eval_tree(code2, cidx2, ends2, consts, bases, qual, run, spre,
                            countn, x, y, READ_LEN - 1, 0, state, m, fop, fhave, fflag, fargs)
        total += ops
        preds[r] = v
    return total


@njit(cache=True, nogil=True)
def _features(bases2, run2, spre2, countn1):
    n, L = bases2.shape
    for r in range(n):
        cn = 0
        c0 = 0.0
        c1 = 0.0
        c2 = 0.0
        c3 = 0.0
        rl = 0
        prev = -1
        for i in range(L):
            b = bases2[r, i]
            if b == prev:
                rl += 1
            else:
                rl = 1
                prev = b
            run2[r, i] = rl
            if b == 4:  # N smears 1/4 onto every base count
                cn += 1
                c0 += 0.25
                c1 += 0.25
                c2 += 0.25
                c3 += 0.25
            elif b == 0:
                c0 += 1.0
            elif b == 1:
                c1 += 1.0
            elif b == 2:
                c2 += 1.0
            else:
                c3 += 1.0
            tot = i + 1.0
            s = 0.0
            for c in (c0, c1, c2, c3):
                if c > 0.0:
                    p = c / tot
                    s -= p * np.log2(p)
            spre2[r, i] = s
        countn1[r] = cn
    return 0


@dataclass
class FeatureTable:
    """Whole-read features the terminals read: runs, entropy prefix, N count."""

    run_len: np.ndarray        # length of the identical-base block ending here
    entropy_prefix: np.ndarray  # Shannon entropy (bits) of bases 1..i
    count_n: int
    entropy_total: float


@dataclass
class PreparedReads:
    """Packed read matrix plus precomputed feature matrices for the kernels."""

    bases: np.ndarray    # uint8 [n, 36]
    qual: np.ndarray     # float64 [n, 36]
    x: np.ndarray
    y: np.ndarray
    run: np.ndarray
    entropy: np.ndarray
    count_n: np.ndarray

    @property
    def n(self) -> int:
        return int(self.bases.shape[0])

    def subset(self, indices) -> "PreparedReads":
        idx = np.asarray(indices)
        return PreparedReads(
            np.ascontiguousarray(self.bases[idx]),
            np.ascontiguousarray(self.qual[idx]),
            np.ascontiguousarray(self.x[idx]),
            np.ascontiguousarray(self.y[idx]),
            np.ascontiguousarray(self.run[idx]),
            np.ascontiguousarray(self.entropy[idx]),
            np.ascontiguousarray(self.count_n[idx]),
        )


def prepare_reads(reads) -> PreparedReads:
    """Pack reads (a ReadMatrix or a list of DnaRecord) for evaluation."""
    if hasattr(reads, "bases"):
        bases, qual, x, y = reads.bases, reads.qual, reads.x, reads.y
    else:
        bases = np.array([[BASE_CODES[b] for b in r.bases] for r in reads], dtype=np.uint8)
        qual = np.array([r.qual for r in reads], dtype=np.float64)
        x = np.array([r.x for r in reads], dtype=np.float64)
        y = np.array([r.y for r in reads], dtype=np.float64)
    bases = np.ascontiguousarray(bases, dtype=np.uint8)
    qual = np.ascontiguousarray(qual, dtype=np.float64)
    n = bases.shape[0]
    run = np.empty((n, READ_LEN), dtype=np.float64)
    spre = np.empty((n, READ_LEN), dtype=np.float64)
    countn = np.empty(n, dtype=np.float64)
    _features(bases, run, spre, countn)
    return PreparedReads(bases, qual,
                         np.ascontiguousarray(x, dtype=np.float64),
                         np.ascontiguousarray(y, dtype=np.float64),
                         run, spre, countn)


def precompute_features(record) -> FeatureTable:
    """Features of a single DnaRecord."""
    bases = np.array([[BASE_CODES[b] for b in record.bases]], dtype=np.uint8)
    run = np.empty((1, READ_LEN), dtype=np.float64)
    spre = np.empty((1, READ_LEN), dtype=np.float64)
    countn = np.empty(1, dtype=np.float64)
    _features(bases, run, spre, countn)
    return FeatureTable(run[0].astype(np.int32), spre[0], int(countn[0]), float(spre[0, -1]))


@dataclass
class EvalContext:
    """Mutable per-read state during evaluation (the slow, inspectable path)."""

    record: object
    features: FeatureTable
    base_pos: int = 1          # 1-based
    look_offset: int = 0
    aux1: float = 0.0
    aux2: float = 0.0
    m: np.ndarray = field(default_factory=lambda: np.zeros(READ_LEN))
    sum0: float = 0.0
    sum1: float = 0.0
    phase: Role = Role.PREPASS0
    op_counter: int = 0

    _packed: tuple = field(default=None, repr=False, compare=False)
    _frames: tuple = field(default=None, repr=False, compare=False)

    def _scratch(self):
        if self._frames is None:
            self._frames = (np.empty(_STACK, dtype=np.int16),
                            np.empty(_STACK, dtype=np.int16),
                            np.empty(_STACK, dtype=np.uint8),
                            np.empty((_STACK, 4), dtype=np.float64))
        return self._frames

    def _arrays(self):
        if self._packed is None:
            r = self.record
            bases = np.array([BASE_CODES[b] for b in r.bases], dtype=np.uint8)
            qual = np.asarray(r.qual, dtype=np.float64)
            self._packed = (bases, qual,
                            np.asarray(self.features.run_len, dtype=np.float64),
                            np.asarray(self.features.entropy_prefix, dtype=np.float64),
                            float(self.features.count_n), float(r.x), float(r.y))
        return self._packed


def make_context(record, phase: Role = Role.PREPASS0, base_pos: int = 1) -> EvalContext:
    return EvalContext(record, precompute_features(record), base_pos=base_pos, phase=phase)


def eval_node(tree: Tree, ctx: EvalContext, table: ConstantTable) -> float:
    """Evaluate one tree in ``ctx`` (caller guarantees role legality for the phase).

    Scratch lives on the context, so separate contexts stay independent
    across threads per the one-context-per-evaluation contract.
    """
    bases, qual, run, spre, countn, x, y = ctx._arrays()
    state = np.array([ctx.aux1, ctx.aux2, ctx.sum0, ctx.sum1], dtype=np.float64)
    fop, fhave, fflag, fargs = ctx._scratch()
    base_pos = READ_LEN - 1 if ctx.phase is Role.RESULT else ctx.base_pos - 1
    v, ops = _eval_tree(tree.code, tree.cidx, tree.ends, table.values,
                        bases, qual, run, spre, countn, x, y,
                        base_pos, ctx.look_offset, state, ctx.m,
                        fop, fhave, fflag, fargs)
    ctx.aux1 = float(state[0])
    ctx.aux2 = float(state[1])
    ctx.op_counter += int(ops)
    return float(v)


def eval_individual(ind: Individual, record, table: ConstantTable):
    """Evaluate a team on one read; returns (prediction, final context).

    Spells out the call schedule at Python level so tests can observe the
    intermediate state; the batch path below fuses the same schedule.
    """
    ctx = make_context(record)
    for bp in range(1, READ_LEN + 1):
        ctx.base_pos = bp
        v = eval_node(ind.prepass0, ctx, table)
        ctx.m[bp - 1] = v
        ctx.sum0 += v
    ctx.phase = Role.PREPASS1
    for bp in range(1, READ_LEN + 1):
        ctx.base_pos = bp
        v = eval_node(ind.prepass1, ctx, table)
        ctx.sum1 += v
    ctx.phase = Role.RESULT
    ctx.base_pos = READ_LEN
    prediction = eval_node(ind.result, ctx, table)
    return prediction, ctx


def _team_args(ind: Individual, table: ConstantTable):
    parts = []
    for t in ind.trees:
        parts.extend((t.code, t.cidx, t.ends))
    parts.append(table.values)
    return tuple(parts)


def eval_team_batch(ind: Individual, reads: PreparedReads, table: ConstantTable,
                    out: np.ndarray | None = None):
    """Predictions of one team over all reads; returns (preds, ops_visited)."""
    preds = out if out is not None else np.empty(reads.n, dtype=np.float64)
    ops = _eval_team(*_team_args(ind, table),
                     reads.bases, reads.qual, reads.run, reads.entropy,
                     reads.count_n, reads.x, reads.y, preds)
    return preds, int(ops)


@dataclass
class BenchReport:
    n_records: int
    ops_per_pass: int
    seconds: list[float]
    rates: list[float]

    @property
    def best_rate(self) -> float:
        return max(self.rates)

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.rates))

    @property
    def rate_sd(self) -> float:
        return float(np.std(self.rates))

    def to_text(self) -> str:
        lines = [
            f"records            {self.n_records}",
            f"primitives/pass    {self.ops_per_pass}",
            f"passes             {len(self.rates)}",
            f"best rate          {self.best_rate / 1e6:.1f} M primitives/s",
            f"mean rate          {self.mean_rate / 1e6:.1f} M primitives/s",
            f"rate sd            {self.rate_sd / 1e6:.2f} M primitives/s",
        ]
        return "\n".join(lines)

    def to_tsv(self) -> str:
        rows = ["pass\tseconds\tprimitives_per_s"]
        for i, (s, rate) in enumerate(zip(self.seconds, self.rates), start=1):
            rows.append(f"{i}\t{s!r}\t{rate!r}")
        return "\n".join(rows) + "\n"


def throughput_bench(ind: Individual, reads, table: ConstantTable,
                     repeats: int = 3) -> BenchReport:
    """Single-thread wall-clock throughput of the batch interpreter."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    prepared = reads if isinstance(reads, PreparedReads) else prepare_reads(reads)
    if prepared.n == 0:
        raise ValueError("need at least one record")
    preds = np.empty(prepared.n, dtype=np.float64)
    eval_team_batch(ind, prepared, table, out=preds)  # warm the JIT outside timing
    seconds = []
    rates = []
    ops = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        _, ops = eval_team_batch(ind, prepared, table, out=preds)
        dt = time.perf_counter() - t0
        seconds.append(dt)
        rates.append(ops / dt if dt > 0 else float("inf"))
    return BenchReport(prepared.n, ops, seconds, rates)
