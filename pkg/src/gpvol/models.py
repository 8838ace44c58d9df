"""Built-in volatility formulas and the on-disk model file format.

A model file is two lines: a ``binding=call`` or ``binding=put`` header
saying which option kind the formula was fitted on, then the expression in
prefix form. The built-in registry ships one published formula per kind so
hedging runs work without training first.
"""

from __future__ import annotations

import os

from .gptree import ExprTree, format_tree, parse_tree

BINDINGS = ("call", "put")

REFERENCE_CALL = (
    "(sqrt (% cok (+ (* sok (* sok (* sok (* sok (* sok sok))))) "
    "(* tau (* sok (* sok (* sok (* sok sok))))))))"
)

REFERENCE_PUT = (
    "(ncdf (sin (- (cos (sin (- (- 0.0 (cos (sin tau))) (* 2.0 (ln cok))))) "
    "(exp sok))))"
)

BUILTIN_MODELS: dict[str, tuple[str, str]] = {
    "table7-call": ("call", REFERENCE_CALL),
    "table7-put": ("put", REFERENCE_PUT),
}


def load_builtin(name: str) -> tuple[ExprTree, str]:
    """Look up a shipped formula by registry key."""
    if name not in BUILTIN_MODELS:
        known = ", ".join(sorted(BUILTIN_MODELS))
        raise KeyError(f"unknown builtin model {name!r}; available: {known}")
    binding, source = BUILTIN_MODELS[name]
    return parse_tree(source), binding


def write_model(path: str | os.PathLike, tree: ExprTree, binding: str) -> None:
    if binding not in BINDINGS:
        raise ValueError(f"binding must be one of {BINDINGS}, got {binding!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"binding={binding}\n{format_tree(tree)}\n")


def read_model(path: str | os.PathLike) -> tuple[ExprTree, str]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh.read().splitlines() if ln.strip()]
    if len(lines) != 2 or not lines[0].startswith("binding="):
        raise ValueError(f"{path}: expected a binding line and an expression line")
    binding = lines[0].split("=", 1)[1]
    if binding not in BINDINGS:
        raise ValueError(f"{path}: binding must be one of {BINDINGS}, got {binding!r}")
    return parse_tree(lines[1]), binding
