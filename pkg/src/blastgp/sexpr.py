"""S-expression text form of trees and the on-disk team model format.

Expressions print in prefix form, functions parenthesised and terminals bare,
e.g. ``(MUL Sum0 Sum1)``.  Constants print by value (integers without a
decimal point, other values with full round-trip precision) and are resolved
back to table indices on parse.
"""
from __future__ import annotations

import re
import sys
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .primitives import Catalog, DEFAULT_CATALOG, OP_BY_TOKEN, Op, Role, TOKENS, arity
from .trees import ConstantTable, Individual, MAX_TREE_NODES, Tree


@contextmanager
def _deep_recursion():
    # a legal tree can be a unary chain of MAX_TREE_NODES frames
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * MAX_TREE_NODES))
    try:
        yield
    finally:
        sys.setrecursionlimit(limit)

MODEL_SECTIONS = ("prepas0", "prepas1", "expect")
_SECTION_ROLE = {"prepas0": Role.PREPASS0, "prepas1": Role.PREPASS1, "expect": Role.RESULT}


class SexprError(ValueError):
    """Unparseable expression text (names the offending token position)."""


def format_constant(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def to_sexpr(tree: Tree, table: ConstantTable) -> str:
    out: list[str] = []

    def emit(i: int) -> int:
        op = int(tree.code[i])
        k = arity(op)
        if op == Op.CONST:
            out.append(format_constant(table[int(tree.cidx[i])]))
            return i + 1
        if k == 0:
            out.append(TOKENS[Op(op)])
            return i + 1
        out.append("(" + TOKENS[Op(op)])
        j = i + 1
        for _ in range(k):
            j = emit(j)
        out.append(")")
        return j

    with _deep_recursion():
        emit(0)
    parts: list[str] = []
    for piece in out:
        if piece == ")":
            parts.append(")")
        elif not parts or parts[-1].endswith("("):
            parts.append(piece)
        else:
            parts.append(" " + piece)
    return "".join(parts)


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _tokenize(text: str):
    return [(m.group(0), m.start()) for m in _TOKEN_RE.finditer(text)]


def from_sexpr(text: str, role: Role, table: ConstantTable,
               catalog: Catalog = DEFAULT_CATALOG) -> Tree:
    """Parse one expression for the given role against ``table``.

    Constant values missing from the table are appended to it.  Unknown
    symbols, arity mismatches and role-illegal primitives raise
    :class:`SexprError` naming the character position.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise SexprError("empty expression")
    code: list[int] = []
    cidx: list[int] = []
    pos = 0

    def fail(msg: str, at: int) -> Exception:
        return SexprError(f"{msg} at position {at}")

    def need(idx: int):
        if idx >= len(tokens):
            raise SexprError("unexpected end of expression")
        return tokens[idx]

    def parse_expr(idx: int) -> int:
        tok, at = need(idx)
        if tok == ")":
            raise fail("unexpected ')'", at)
        if tok == "(":
            tok, at = need(idx + 1)
            if tok in ("(", ")"):
                raise fail("expected a symbol after '('", at)
            idx = _emit(tok, at, idx + 2, parenthesised=True)
            tok2, at2 = need(idx)
            if tok2 != ")":
                raise fail(f"expected ')' but found {tok2!r}", at2)
            return idx + 1
        return _emit(tok, at, idx + 1, parenthesised=False)

    def _emit(tok: str, at: int, idx: int, parenthesised: bool) -> int:
        if _NUMBER_RE.match(tok):
            code.append(int(Op.CONST))
            cidx.append(table.index_for(float(tok)))
            return idx
        op = OP_BY_TOKEN.get(tok.lower())
        if op is None:
            raise fail(f"unknown symbol {tok!r}", at)
        if not catalog.legal(op, role):
            raise fail(f"{tok!r} is not legal in a {role.value} tree", at)
        k = arity(op)
        if k > 0 and not parenthesised:
            raise fail(f"function {tok!r} must be parenthesised", at)
        code.append(int(op))
        cidx.append(-1)
        for _ in range(k):
            nxt, nat = need(idx)
            if nxt == ")":
                raise fail(f"{tok!r} expects {k} arguments", nat)
            idx = parse_expr(idx)
        return idx

    with _deep_recursion():
        end = parse_expr(pos)
    if end != len(tokens):
        tok, at = tokens[end]
        raise fail(f"trailing input {tok!r}", at)
    tree = Tree(np.array(code, dtype=np.int16), np.array(cidx, dtype=np.int32), role)
    tree.validate(table, catalog)
    return tree


@dataclass
class TeamModel:
    """A saved team: three trees plus the constant table they index."""

    individual: Individual
    table: ConstantTable


def save_model(path, individual: Individual, table: ConstantTable) -> None:
    trees = dict(zip(MODEL_SECTIONS, individual.trees))
    with open(path, "w", encoding="utf-8") as fh:
        for section in MODEL_SECTIONS:
            fh.write(f"{section}:\n")
            fh.write(to_sexpr(trees[section], table) + "\n")
        fh.write("constants:\n")
        for v in table.values:
            fh.write(repr(float(v)) + "\n")


def load_model(path, catalog: Catalog = DEFAULT_CATALOG) -> TeamModel:
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            name = line[:-1].strip().lower() if line.endswith(":") else None
            if name in MODEL_SECTIONS or name == "constants":
                current = sections.setdefault(name, [])
            elif current is not None:
                if line.strip():
                    current.append(line.strip())
            elif line.strip():
                raise SexprError(f"unexpected content outside any section: {line!r}")
    missing = [s for s in (*MODEL_SECTIONS, "constants") if s not in sections]
    if missing:
        raise SexprError(f"model file is missing sections: {', '.join(missing)}")
    try:
        values = [float(v) for v in sections["constants"]]
    except ValueError as exc:
        raise SexprError(f"bad constant in table section: {exc}") from None
    table = ConstantTable(np.array(values, dtype=np.float64))
    parsed = {}
    for section in MODEL_SECTIONS:
        text = " ".join(sections[section])
        parsed[section] = from_sexpr(text, _SECTION_ROLE[section], table, catalog)
    ind = Individual(parsed["prepas0"], parsed["prepas1"], parsed["expect"])
    return TeamModel(ind, table)
