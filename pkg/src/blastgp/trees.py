"""Prefix-encoded expression trees, the shared constant table and random generation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .primitives import ARITY, Catalog, DEFAULT_CATALOG, Op, Role, arity

MAX_TREE_NODES = 1022
N_RANDOM_CONSTANTS = 1000
N_INTEGER_CONSTANTS = 37  # 0..36 appended after the random block
BASE_TABLE_SIZE = N_RANDOM_CONSTANTS + N_INTEGER_CONSTANTS


class TreeError(ValueError):
    """Malformed, oversized or role-illegal tree."""


class ConstantTable:
    """Run-global pool of constants; trees store indices into it.

    A freshly built table holds 1000 tangent-distributed values followed by
    the integers 0..36.  Parsing expression text may append further values
    (``index_for``), so a loaded table can be longer than ``BASE_TABLE_SIZE``.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("constant table must be a non-empty vector")
        self._lookup: dict[float, int] | None = None

    def __len__(self) -> int:
        return int(self.values.size)

    def __getitem__(self, idx: int) -> float:
        return float(self.values[idx])

    def index_for(self, value: float) -> int:
        """Index of ``value``, appending it when absent (exact float match)."""
        if self._lookup is None:
            self._lookup = {}
            for i, v in enumerate(self.values):
                self._lookup.setdefault(float(v), i)
        v = float(value)
        idx = self._lookup.get(v)
        if idx is None:
            idx = self.values.size
            self.values = np.append(self.values, v)
            self._lookup[v] = idx
        return idx


def build_constant_table(rng: np.random.Generator) -> ConstantTable:
    """Sample the 1000 tangent constants and append the integers 0..36.

    Each random entry is tan(u) with u uniform on (0, pi); non-finite draws
    are resampled so every entry is finite.  About half of the sampled
    values land in [-1, 1].
    """
    values = np.empty(BASE_TABLE_SIZE, dtype=np.float64)
    n = 0
    while n < N_RANDOM_CONSTANTS:
        v = math.tan(rng.uniform(0.0, math.pi))
        if math.isfinite(v):
            values[n] = v
            n += 1
    values[N_RANDOM_CONSTANTS:] = np.arange(N_INTEGER_CONSTANTS, dtype=np.float64)
    return ConstantTable(values)


def subtree_ends(code: np.ndarray) -> np.ndarray:
    """End index (exclusive) of the subtree rooted at each prefix position."""
    n = code.shape[0]
    ends = np.empty(n, dtype=np.int32)
    stack = np.empty(n + 1, dtype=np.int32)
    sp = 0
    for i in range(n - 1, -1, -1):
        k = ARITY[code[i]]
        if k == 0:
            ends[i] = i + 1
        else:
            if sp < k:
                raise TreeError(f"truncated prefix encoding at node {i}")
            e = 0
            for _ in range(k):
                sp -= 1
                e = stack[sp]
            ends[i] = e
        stack[sp] = ends[i]
        sp += 1
    if sp != 1 or ends[0] != n:
        raise TreeError("prefix encoding does not form a single tree")
    return ends


@dataclass
class Tree:
    """One prefix-encoded expression.

    ``code`` holds opcodes, ``cidx`` the constant-table index for CONST nodes
    (-1 elsewhere).  Trees are immutable by convention; variation operators
    build new arrays.
    """

    code: np.ndarray
    cidx: np.ndarray
    role: Role
    _ends: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.code = np.asarray(self.code, dtype=np.int16)
        self.cidx = np.asarray(self.cidx, dtype=np.int32)

    @property
    def size(self) -> int:
        return int(self.code.shape[0])

    @property
    def ends(self) -> np.ndarray:
        if self._ends is None:
            self._ends = subtree_ends(self.code)
        return self._ends

    def depth(self) -> int:
        """Longest root-to-leaf path counted in nodes (single node = 1)."""
        d = 0
        pending = [1]  # children still expected per open ancestor level
        for op in self.code:
            d = max(d, len(pending))
            pending[-1] -= 1
            k = arity(op)
            if k > 0:
                pending.append(k)
            else:
                while pending and pending[-1] == 0:
                    pending.pop()
        return d

    def validate(self, table: ConstantTable | None = None,
                 catalog: Catalog = DEFAULT_CATALOG) -> None:
        if self.size > MAX_TREE_NODES:
            raise TreeError(f"tree has {self.size} nodes, cap is {MAX_TREE_NODES}")
        subtree_ends(self.code)  # raises when malformed
        for i, op in enumerate(self.code):
            if not catalog.legal(int(op), self.role):
                raise TreeError(f"{Op(int(op)).name} illegal in {self.role.value} tree (node {i})")
            if op == Op.CONST:
                if self.cidx[i] < 0 or (table is not None and self.cidx[i] >= len(table)):
                    raise TreeError(f"constant index out of range at node {i}")


@dataclass
class Individual:
    """A team of three trees sharing one constant table."""

    prepass0: Tree
    prepass1: Tree
    result: Tree

    def __post_init__(self):
        roles = (self.prepass0.role, self.prepass1.role, self.result.role)
        if roles != (Role.PREPASS0, Role.PREPASS1, Role.RESULT):
            raise TreeError(f"team roles wrong or out of order: {roles}")

    @property
    def trees(self) -> tuple[Tree, Tree, Tree]:
        return (self.prepass0, self.prepass1, self.result)

    @property
    def total_nodes(self) -> int:
        return self.prepass0.size + self.prepass1.size + self.result.size

    def tree_sizes(self) -> tuple[int, int, int]:
        return (self.prepass0.size, self.prepass1.size, self.result.size)

    def replace(self, role: Role, tree: Tree) -> "Individual":
        parts = {t.role: t for t in self.trees}
        parts[role] = tree
        return Individual(parts[Role.PREPASS0], parts[Role.PREPASS1], parts[Role.RESULT])

    def tree(self, role: Role) -> Tree:
        return {t.role: t for t in self.trees}[role]


def _random_node(terminals, functions, want_function, rng, table_size):
    if want_function:
        op = functions[rng.integers(0, len(functions))]
        return int(op), -1
    op = terminals[rng.integers(0, len(terminals))]
    if op == Op.CONST:
        return int(op), int(rng.integers(0, table_size))
    return int(op), -1


def random_tree(role: Role, method: str, max_depth: int, rng: np.random.Generator,
                table_size: int = BASE_TABLE_SIZE,
                catalog: Catalog = DEFAULT_CATALOG) -> Tree:
    """Generate a random tree by the ``grow`` or ``full`` method.

    Depth is counted in nodes (a lone terminal has depth 1).  ``full`` puts
    functions everywhere above ``max_depth`` and terminals at it; ``grow``
    picks uniformly from the whole primitive set until the depth cap forces
    terminals.  The CONST kind counts as a single terminal choice; its table
    index is drawn separately.
    """
    if method not in ("grow", "full"):
        raise ValueError(f"unknown generation method {method!r}")
    terminals = catalog.terminals[role]
    functions = catalog.functions
    n_kinds = len(terminals) + len(functions)
    for _ in range(100):
        code: list[int] = []
        cidx: list[int] = []
        stack = [1]  # depth of the next node to emit
        while stack:
            d = stack.pop()
            if d >= max_depth:
                want_fn = False
            elif method == "full":
                want_fn = True
            else:
                want_fn = rng.integers(0, n_kinds) < len(functions)
            op, ci = _random_node(terminals, functions, want_fn, rng, table_size)
            code.append(op)
            cidx.append(ci)
            for _ in range(arity(op)):
                stack.append(d + 1)
        if len(code) <= MAX_TREE_NODES:
            return Tree(np.array(code, dtype=np.int16), np.array(cidx, dtype=np.int32), role)
    raise TreeError(f"could not generate a {method} tree within the node cap")
