"""Expression trees for volatility formulas: protected evaluation, random
generation, crossover, mutation, and a canonical prefix text format.

Terminals: ``cok`` (option price over strike), ``sok`` (spot over strike,
moneyness) and ``tau`` (time to maturity in years). Constants never appear in
randomly generated trees; the const node kind exists to represent externally
supplied formulas.

Evaluation is total: protected division/log/sqrt/exp plus a per-node
magnitude clamp guarantee a finite result for any finite inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import ndtr

PRICE_OVER_STRIKE = "cok"
MONEYNESS = "sok"
TAU = "tau"
TERMINALS = (PRICE_OVER_STRIKE, MONEYNESS, TAU)
UNARY_OPS = ("ln", "exp", "sqrt", "cos", "sin", "ncdf")
BINARY_OPS = ("+", "-", "*", "%")
FUNCTIONS = UNARY_OPS + BINARY_OPS
CONST = "const"

MAX_TREE_DEPTH = 17

_VALUE_CAP = 1e150
_EXP_CAP = 80.0
_LN_FLOOR = 1e-12
_RETRY_CAP = 10
_SQRT2 = math.sqrt(2.0)


class TreeParseError(ValueError):
    """Malformed prefix expression text."""


def arity(op: str) -> int:
    if op in TERMINALS or op == CONST:
        return 0
    if op in UNARY_OPS:
        return 1
    if op in BINARY_OPS:
        return 2
    raise ValueError(f"unknown op {op!r}")


@dataclass(frozen=True)
class Node:
    op: str
    children: tuple["Node", ...] = ()
    value: float | None = None

    def __post_init__(self) -> None:
        if len(self.children) != arity(self.op):
            raise ValueError(
                f"op {self.op!r} takes {arity(self.op)} children, got {len(self.children)}")
        if self.op == CONST:
            if self.value is None or not math.isfinite(self.value):
                raise ValueError(f"const node needs a finite value, got {self.value}")
        elif self.value is not None:
            raise ValueError(f"non-const node {self.op!r} cannot carry a value")

    @cached_property
    def depth(self) -> int:
        """Longest root-to-leaf path, counted in nodes."""
        if not self.children:
            return 1
        return 1 + max(c.depth for c in self.children)

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)


@dataclass(frozen=True)
class ExprTree:
    root: Node

    def __post_init__(self) -> None:
        if self.root.depth > MAX_TREE_DEPTH:
            raise ValueError(
                f"tree depth {self.root.depth} exceeds the cap {MAX_TREE_DEPTH}")

    @property
    def depth(self) -> int:
        return self.root.depth

    @property
    def size(self) -> int:
        return self.root.size


def depth(tree: ExprTree) -> int:
    return tree.depth


def size(tree: ExprTree) -> int:
    return tree.size


# --- evaluation ---------------------------------------------------------

def _clamp_scalar(v: float) -> float:
    if v != v:  # NaN
        return 0.0
    if v > _VALUE_CAP:
        return _VALUE_CAP
    if v < -_VALUE_CAP:
        return -_VALUE_CAP
    return v


def _eval_scalar(node: Node, cok: float, sok: float, tau: float) -> float:
    op = node.op
    if op == PRICE_OVER_STRIKE:
        return cok
    if op == MONEYNESS:
        return sok
    if op == TAU:
        return tau
    if op == CONST:
        return node.value  # type: ignore[return-value]
    if len(node.children) == 2:
        a = _eval_scalar(node.children[0], cok, sok, tau)
        b = _eval_scalar(node.children[1], cok, sok, tau)
        if op == "+":
            return _clamp_scalar(a + b)
        if op == "-":
            return _clamp_scalar(a - b)
        if op == "*":
            return _clamp_scalar(a * b)
        # protected division
        if b == 0.0:
            return 1.0
        return _clamp_scalar(a / b)
    a = _eval_scalar(node.children[0], cok, sok, tau)
    if op == "ln":
        return math.log(abs(a)) if abs(a) > _LN_FLOOR else 0.0
    if op == "exp":
        return math.exp(min(a, _EXP_CAP))
    if op == "sqrt":
        return math.sqrt(abs(a))
    if op == "cos":
        return math.cos(a)
    if op == "sin":
        return math.sin(a)
    # ncdf
    return 0.5 * math.erfc(-a / _SQRT2)


def _eval_array(node: Node, cok: np.ndarray, sok: np.ndarray, tau: np.ndarray):
    op = node.op
    if op == PRICE_OVER_STRIKE:
        return cok
    if op == MONEYNESS:
        return sok
    if op == TAU:
        return tau
    if op == CONST:
        return node.value
    if len(node.children) == 2:
        a = _eval_array(node.children[0], cok, sok, tau)
        b = _eval_array(node.children[1], cok, sok, tau)
        if op == "+":
            return np.clip(a + b, -_VALUE_CAP, _VALUE_CAP)
        if op == "-":
            return np.clip(a - b, -_VALUE_CAP, _VALUE_CAP)
        if op == "*":
            return np.clip(a * b, -_VALUE_CAP, _VALUE_CAP)
        zero = (b == 0.0)
        quot = np.asarray(a) / np.where(zero, 1.0, b)
        return np.clip(np.where(zero, 1.0, quot), -_VALUE_CAP, _VALUE_CAP)
    a = _eval_array(node.children[0], cok, sok, tau)
    if op == "ln":
        big = np.abs(a) > _LN_FLOOR
        return np.where(big, np.log(np.where(big, np.abs(a), 1.0)), 0.0)
    if op == "exp":
        return np.exp(np.minimum(a, _EXP_CAP))
    if op == "sqrt":
        return np.sqrt(np.abs(a))
    if op == "cos":
        return np.cos(a)
    if op == "sin":
        return np.sin(a)
    return ndtr(a)


def eval_tree(tree: ExprTree, inputs: Sequence):
    """Evaluate on (price_over_strike, moneyness, tau).

    Scalar inputs give a float; equal-length numpy arrays give an array.
    Constant subexpressions stay scalar and broadcast in the array case.
    """
    cok, sok, tau = inputs
    if any(isinstance(x, np.ndarray) for x in (cok, sok, tau)):
        with np.errstate(all="ignore"):
            out = _eval_array(tree.root, np.asarray(cok, dtype=float),
                              np.asarray(sok, dtype=float), np.asarray(tau, dtype=float))
        return out
    return _eval_scalar(tree.root, float(cok), float(sok), float(tau))


# --- random generation --------------------------------------------------

def random_tree(max_depth: int, method: str = "grow", rng=None) -> ExprTree:
    """Random tree by the grow or full method.

    ``full`` puts every leaf at exactly max_depth; ``grow`` draws uniformly
    over terminals and functions so depth may end anywhere up to max_depth.
    """
    if rng is None:
        raise ValueError("rng is required")
    if not 1 <= max_depth <= MAX_TREE_DEPTH:
        raise ValueError(f"max_depth must be in [1, {MAX_TREE_DEPTH}], got {max_depth}")
    if method not in ("grow", "full"):
        raise ValueError(f"method must be 'grow' or 'full', got {method!r}")

    def build(budget: int) -> Node:
        if budget <= 1:
            return Node(rng.choice(TERMINALS))
        if method == "full":
            op = rng.choice(FUNCTIONS)
        else:
            op = rng.choice(TERMINALS + FUNCTIONS)
        n = arity(op)
        if n == 0:
            return Node(op)
        return Node(op, tuple(build(budget - 1) for _ in range(n)))

    return ExprTree(build(max_depth))


# --- subtree plumbing ---------------------------------------------------

def _subtree_at(node: Node, index: int) -> Node:
    """Preorder lookup; index 0 is the node itself."""
    if index == 0:
        return node
    index -= 1
    for child in node.children:
        if index < child.size:
            return _subtree_at(child, index)
        index -= child.size
    raise IndexError("subtree index out of range")


def _replace_at(node: Node, index: int, replacement: Node) -> Node:
    if index == 0:
        return replacement
    index -= 1
    rebuilt = []
    for child in node.children:
        if 0 <= index < child.size:
            rebuilt.append(_replace_at(child, index, replacement))
        else:
            rebuilt.append(child)
        index -= child.size
    return Node(node.op, tuple(rebuilt), node.value)


def _preorder(node: Node) -> list[Node]:
    out = [node]
    for child in node.children:
        out.extend(_preorder(child))
    return out


# --- variation operators ------------------------------------------------

def crossover(a: ExprTree, b: ExprTree, rng, max_depth: int = MAX_TREE_DEPTH,
              ) -> tuple[ExprTree, ExprTree]:
    """Swap uniformly chosen subtrees; two children per application.

    A draw whose children would exceed the depth cap is retried up to 10
    times, after which the parents are returned unchanged.
    """
    for _ in range(_RETRY_CAP):
        i = rng.randrange(a.size)
        j = rng.randrange(b.size)
        sub_a = _subtree_at(a.root, i)
        sub_b = _subtree_at(b.root, j)
        child_a = _replace_at(a.root, i, sub_b)
        child_b = _replace_at(b.root, j, sub_a)
        if child_a.depth <= max_depth and child_b.depth <= max_depth:
            return ExprTree(child_a), ExprTree(child_b)
    return a, b


def _point_replacement(node: Node, rng) -> Node:
    """A different op of the same arity, keeping the children."""
    n = arity(node.op)
    if n == 0:
        pool = [t for t in TERMINALS if t != node.op]
    elif n == 1:
        pool = [t for t in UNARY_OPS if t != node.op]
    else:
        pool = [t for t in BINARY_OPS if t != node.op]
    return Node(rng.choice(pool), node.children)


def mutate(tree: ExprTree, kind: str, rng, max_depth: int = MAX_TREE_DEPTH) -> ExprTree:
    """branch, point, or expansion mutation.

    branch: a uniformly chosen internal node's subtree is regrown (grow,
    depth <= 6); degrades to a point-style terminal replacement when the tree
    has no internal node. point: one node is swapped for a different op of
    the same arity. expansion: a uniformly chosen terminal is replaced by a
    random subtree (grow, depth <= 6). Depth-cap violations retry up to 10
    times, then return the parent unchanged.
    """
    nodes = _preorder(tree.root)

    if kind == "point":
        i = rng.randrange(len(nodes))
        return ExprTree(_replace_at(tree.root, i, _point_replacement(nodes[i], rng)))

    if kind == "branch":
        internal = [i for i, n in enumerate(nodes) if n.children]
        if not internal:
            i = rng.randrange(len(nodes))
            return ExprTree(_replace_at(tree.root, i, _point_replacement(nodes[i], rng)))
        for _ in range(_RETRY_CAP):
            i = internal[rng.randrange(len(internal))]
            sub = random_tree(6, "grow", rng).root
            candidate = _replace_at(tree.root, i, sub)
            if candidate.depth <= max_depth:
                return ExprTree(candidate)
        return tree

    if kind == "expansion":
        leaves = [i for i, n in enumerate(nodes) if not n.children]
        for _ in range(_RETRY_CAP):
            i = leaves[rng.randrange(len(leaves))]
            sub = random_tree(6, "grow", rng).root
            candidate = _replace_at(tree.root, i, sub)
            if candidate.depth <= max_depth:
                return ExprTree(candidate)
        return tree

    raise ValueError(f"unknown mutation kind {kind!r}")


# --- text format --------------------------------------------------------

def format_tree(tree: ExprTree) -> str:
    """Canonical prefix text: functions parenthesised, terminals lowercase
    tokens, constants as float literals."""

    def fmt(node: Node) -> str:
        if node.op == CONST:
            return repr(node.value)
        if not node.children:
            return node.op
        return "(" + " ".join([node.op] + [fmt(c) for c in node.children]) + ")"

    return fmt(tree.root)


def parse_tree(text: str) -> ExprTree:
    """Inverse of format_tree. Accepts any float literal as a constant."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise TreeParseError("empty expression")
    pos = 0

    def fail(message: str):
        raise TreeParseError(f"{message} (at token {pos})")

    def next_token() -> str:
        nonlocal pos
        if pos >= len(tokens):
            fail("unexpected end of input")
        token = tokens[pos]
        pos += 1
        return token

    def parse_node() -> Node:
        token = next_token()
        if token == ")":
            fail("unexpected ')'")
        if token == "(":
            op = next_token()
            if op in ("(", ")"):
                fail("expected an operator after '('")
            n = arity(op) if op in FUNCTIONS else -1
            if n < 1:
                fail(f"{op!r} cannot head a subexpression")
            children = tuple(parse_node() for _ in range(n))
            closing = next_token()
            if closing != ")":
                fail(f"expected ')' after {op!r} arguments, got {closing!r}")
            return Node(op, children)
        if token in TERMINALS:
            return Node(token)
        try:
            value = float(token)
        except ValueError:
            fail(f"unknown token {token!r}")
        return Node(CONST, value=value)

    root = parse_node()
    if pos != len(tokens):
        raise TreeParseError(f"trailing tokens after expression: {' '.join(tokens[pos:])}")
    return ExprTree(root)
