"""Primitive set of the tree language: opcodes, arities and per-role legality.

Three tree roles exist in a team.  The two prepass trees scan the read one
base at a time; the result tree is called once to produce the prediction.
Which terminals a tree may use depends on its role: ``prepass0`` cannot see
any memory it has not written yet, ``prepass1`` additionally sees the cell
array M and Sum0, and the result tree sees only whole-read features plus the
memory left behind by the prepasses.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Op(enum.IntEnum):
    """Opcode values; the numeric layout is shared with the interpreter kernels."""

    # functions
    ADD = 0
    SUB = 1
    MUL = 2
    DIV = 3          # protected: x/0 -> 1
    ORN = 4          # lazy boolean-ish OR, returns +/-1
    IFLTE = 5        # if a <= b then c else d, untaken branch unevaluated
    LOOK = 6         # evaluate argument one position further along the read
    SET_AUX1 = 7
    SET_AUX2 = 8
    SUM_AUX1 = 9
    SUM_AUX2 = 10
    # base identity tests (+1 / -1)
    A = 11
    C = 12
    G = 13
    T = 14
    N = 15
    # comparisons of the looked-at base against the base at the standard position
    SELF = 16
    COMPLEMENT = 17
    SAMESIZE = 18
    OPPOSITE = 19
    # read features at the effective position
    QUAL = 20
    RUN = 21
    COUNTN = 22
    ENTROPY = 23     # printed as "S"
    X = 24
    Y = 25
    POS = 26
    LEN = 27
    # memory
    AUX1 = 28
    AUX2 = 29
    MEM = 30         # printed as "M"
    SUM0 = 31
    SUM1 = 32
    CONST = 33       # carries an index into the run's constant table


class Role(enum.Enum):
    PREPASS0 = "prepass0"
    PREPASS1 = "prepass1"
    RESULT = "result"


N_OPS = len(Op)
FIRST_TERMINAL = Op.A

ARITY = np.zeros(N_OPS, dtype=np.int8)
for _op in (Op.ADD, Op.SUB, Op.MUL, Op.DIV, Op.ORN):
    ARITY[_op] = 2
ARITY[Op.IFLTE] = 4
for _op in (Op.LOOK, Op.SET_AUX1, Op.SET_AUX2, Op.SUM_AUX1, Op.SUM_AUX2):
    ARITY[_op] = 1


def arity(op: int) -> int:
    return int(ARITY[op])


FUNCTIONS = tuple(op for op in Op if ARITY[op] > 0)

_PREPASS0_TERMINALS = (
    Op.CONST, Op.POS, Op.LEN,
    Op.A, Op.C, Op.G, Op.T, Op.N,
    Op.SELF, Op.COMPLEMENT, Op.SAMESIZE, Op.OPPOSITE,
    Op.QUAL, Op.ENTROPY, Op.RUN, Op.COUNTN,
    Op.X, Op.Y, Op.AUX1, Op.AUX2,
)
_PREPASS1_TERMINALS = _PREPASS0_TERMINALS + (Op.MEM, Op.SUM0)
_RESULT_TERMINALS = (
    Op.CONST, Op.LEN,
    Op.ENTROPY, Op.RUN, Op.COUNTN,
    Op.X, Op.Y, Op.AUX1, Op.AUX2,
    Op.SUM0, Op.SUM1,
)


@dataclass(frozen=True)
class Catalog:
    """Role-resolved primitive sets used by generators, mutators and parsers."""

    terminals: dict[Role, tuple[Op, ...]]
    functions: tuple[Op, ...] = FUNCTIONS

    def legal(self, op: int, role: Role) -> bool:
        o = Op(op)
        return o in self.functions or o in self.terminals[role]

    def same_arity_choices(self, op: int, role: Role) -> tuple[Op, ...]:
        k = arity(op)
        if k > 0:
            return tuple(f for f in self.functions if arity(f) == k)
        return self.terminals[role]


def make_catalog(mem_in_result: bool = True) -> Catalog:
    """Build the primitive catalog.

    ``mem_in_result`` admits M in the result tree (reading the final cell);
    switch it off to restrict the result tree to the summary terminals only.
    """
    result = _RESULT_TERMINALS + ((Op.MEM,) if mem_in_result else ())
    return Catalog(terminals={
        Role.PREPASS0: _PREPASS0_TERMINALS,
        Role.PREPASS1: _PREPASS1_TERMINALS,
        Role.RESULT: result,
    })


DEFAULT_CATALOG = make_catalog()

# Canonical display token per opcode (CONST prints as its numeric value).
TOKENS = {
    Op.ADD: "ADD", Op.SUB: "SUB", Op.MUL: "MUL", Op.DIV: "DIV",
    Op.ORN: "ORN", Op.IFLTE: "IFLTE", Op.LOOK: "LOOK",
    Op.SET_AUX1: "set_Aux1", Op.SET_AUX2: "set_Aux2",
    Op.SUM_AUX1: "sum_Aux1", Op.SUM_AUX2: "sum_Aux2",
    Op.A: "A", Op.C: "C", Op.G: "G", Op.T: "T", Op.N: "N",
    Op.SELF: "Self", Op.COMPLEMENT: "Complement",
    Op.SAMESIZE: "Samesize", Op.OPPOSITE: "Opposite",
    Op.QUAL: "Qual", Op.RUN: "Run", Op.COUNTN: "CountN", Op.ENTROPY: "S",
    Op.X: "X", Op.Y: "Y", Op.POS: "pos", Op.LEN: "len",
    Op.AUX1: "Aux1", Op.AUX2: "Aux2", Op.MEM: "M",
    Op.SUM0: "Sum0", Op.SUM1: "Sum1",
}

OP_BY_TOKEN = {tok.lower(): op for op, tok in TOKENS.items()}
