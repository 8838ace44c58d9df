"""Expression trees: protected evaluation, generation, variation, text format."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpvol.gptree import (CONST, MAX_TREE_DEPTH, TERMINALS, ExprTree, Node,
                          TreeParseError, crossover, eval_tree, format_tree,
                          mutate, parse_tree, random_tree)


def ev(text, cok=0.1, sok=1.0, tau=0.5):
    return eval_tree(parse_tree(text), (cok, sok, tau))


def test_terminals_read_inputs():
    assert ev("cok", cok=0.07) == 0.07
    assert ev("sok", sok=1.02) == 1.02
    assert ev("tau", tau=0.25) == 0.25


def test_arithmetic():
    assert ev("(+ cok tau)", cok=0.1, tau=0.5) == 0.6
    assert ev("(- sok cok)", cok=0.1, sok=1.0) == 0.9
    assert ev("(* sok tau)", sok=2.0, tau=0.5) == 1.0
    assert ev("(% tau sok)", sok=2.0, tau=0.5) == 0.25


def test_protected_division_by_zero_is_one():
    assert ev("(% sok cok)", cok=0.0) == 1.0
    assert ev("(% cok cok)", cok=0.0) == 1.0


def test_protected_log():
    assert ev("(ln sok)", sok=math.e) == pytest.approx(1.0, abs=1e-15)
    assert ev("(ln (- 0.0 sok))", sok=math.e) == pytest.approx(1.0, abs=1e-15)
    assert ev("(ln cok)", cok=0.0) == 0.0
    assert ev("(ln cok)", cok=1e-13) == 0.0  # below the floor


def test_protected_sqrt_and_exp():
    assert ev("(sqrt (- 0.0 sok))", sok=4.0) == 2.0
    assert ev("(exp tau)", tau=200.0) == math.exp(80.0)  # argument capped
    assert ev("(exp tau)", tau=1.0) == math.exp(1.0)


def test_trig_and_normal_cdf():
    assert ev("(cos tau)", tau=0.0) == 1.0
    assert ev("(sin tau)", tau=math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    assert ev("(ncdf tau)", tau=0.0) == pytest.approx(0.5, abs=1e-15)
    assert ev("(ncdf tau)", tau=1.0) == pytest.approx(0.8413447460685429, abs=1e-12)


def test_magnitude_clamp():
    huge = "(* 1e120 (* 1e120 1e120))"
    assert ev(huge) == 1e150
    assert ev(f"(- 0.0 {huge})") == -1e150


def test_eval_array_matches_scalar():
    rng = random.Random(7)
    cok = np.array([0.01, 0.2, 1.5, 0.0])
    sok = np.array([0.9, 1.0, 1.1, 1.15])
    tau = np.array([0.05, 0.5, 1.0, 2.0])
    for _ in range(200):
        tree = random_tree(6, "grow", rng)
        out = eval_tree(tree, (cok, sok, tau))
        out = np.broadcast_to(out, cok.shape)  # constant-free, but be safe
        for i in range(len(cok)):
            want = eval_tree(tree, (cok[i], sok[i], tau[i]))
            assert out[i] == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_eval_array_protected_cases():
    tree = parse_tree("(% sok cok)")
    out = eval_tree(tree, (np.array([0.0, 2.0]), np.array([3.0, 3.0]),
                           np.array([1.0, 1.0])))
    assert out.tolist() == [1.0, 1.5]
    tree = parse_tree("(ln cok)")
    out = eval_tree(tree, (np.array([0.0, math.e]), np.array([1.0, 1.0]),
                           np.array([1.0, 1.0])))
    assert out[0] == 0.0 and out[1] == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10_000),
       st.floats(-1e6, 1e6, allow_nan=False),
       st.floats(-1e6, 1e6, allow_nan=False),
       st.floats(-1e6, 1e6, allow_nan=False))
def test_evaluation_is_total(seed, cok, sok, tau):
    tree = random_tree(8, "grow", random.Random(seed))
    assert math.isfinite(eval_tree(tree, (cok, sok, tau)))


def test_random_tree_full_hits_max_depth():
    rng = random.Random(1)
    for _ in range(50):
        assert random_tree(5, "full", rng).depth == 5


def test_random_tree_grow_respects_cap():
    rng = random.Random(2)
    depths = {random_tree(6, "grow", rng).depth for _ in range(300)}
    assert max(depths) <= 6
    assert len(depths) > 1  # grow varies depth


def test_random_trees_have_no_constants():
    rng = random.Random(3)
    for _ in range(200):
        tree = random_tree(8, "grow", rng)
        assert "const" not in format_tree(tree)
        stack = [tree.root]
        while stack:
            node = stack.pop()
            assert node.op != CONST
            stack.extend(node.children)


def test_random_tree_requires_rng():
    with pytest.raises(ValueError):
        random_tree(5)


def test_depth_and_size():
    tree = parse_tree("(+ (ln cok) tau)")
    assert tree.depth == 3
    assert tree.size == 4
    assert parse_tree("cok").depth == 1


def test_depth_cap_enforced_on_construction():
    node = Node("cok")
    for _ in range(MAX_TREE_DEPTH - 1):
        node = Node("sqrt", (node,))
    ExprTree(node)  # exactly at the cap
    with pytest.raises(ValueError):
        ExprTree(Node("sqrt", (node,)))


def test_crossover_closure_under_depth_cap():
    rng = random.Random(11)
    deep = [random_tree(10, "full", rng) for _ in range(20)]
    for a in deep:
        for b in deep:
            ca, cb = crossover(a, b, rng)
            assert ca.depth <= MAX_TREE_DEPTH
            assert cb.depth <= MAX_TREE_DEPTH


def test_crossover_swaps_material():
    rng = random.Random(0)
    a = parse_tree("(+ cok tau)")
    b = parse_tree("(* sok sok)")
    seen_new = False
    for _ in range(50):
        ca, cb = crossover(a, b, rng)
        if format_tree(ca) not in (format_tree(a), format_tree(b)):
            seen_new = True
    assert seen_new


def test_point_mutation_preserves_shape():
    rng = random.Random(5)
    for _ in range(100):
        tree = random_tree(7, "grow", rng)
        mutant = mutate(tree, "point", rng)
        assert mutant.size == tree.size
        assert mutant.depth == tree.depth


def test_point_mutation_changes_exactly_one_op():
    rng = random.Random(9)
    tree = parse_tree("(+ (ln cok) (* sok tau))")
    for _ in range(50):
        mutant = mutate(tree, "point", rng)
        a = format_tree(tree).replace("(", " ").replace(")", " ").split()
        b = format_tree(mutant).replace("(", " ").replace(")", " ").split()
        assert len(a) == len(b)
        assert sum(x != y for x, y in zip(a, b)) == 1


def test_branch_and_expansion_respect_cap():
    rng = random.Random(13)
    for kind in ("branch", "expansion"):
        for _ in range(100):
            tree = random_tree(15, "full", rng)
            assert mutate(tree, kind, rng).depth <= MAX_TREE_DEPTH


def test_expansion_grows_a_leaf():
    rng = random.Random(17)
    tree = parse_tree("(+ cok tau)")
    grew = any(mutate(tree, "expansion", rng).size > tree.size for _ in range(30))
    assert grew


def test_branch_mutation_on_single_terminal():
    rng = random.Random(19)
    mutant = mutate(parse_tree("cok"), "branch", rng)
    assert mutant.depth == 1
    assert mutant.root.op in TERMINALS


def test_unknown_mutation_kind():
    with pytest.raises(ValueError):
        mutate(parse_tree("cok"), "shuffle", random.Random(0))


def test_format_parse_round_trip_random():
    rng = random.Random(23)
    for _ in range(200):
        tree = random_tree(8, "grow", rng)
        assert parse_tree(format_tree(tree)) == tree


def test_parse_constants():
    tree = parse_tree("(* 2.0 (ln cok))")
    assert tree.root.children[0].op == CONST
    assert tree.root.children[0].value == 2.0
    assert eval_tree(tree, (math.e, 1.0, 1.0)) == pytest.approx(2.0, abs=1e-15)
    assert format_tree(tree) == "(* 2.0 (ln cok))"


def test_parse_errors():
    for text in ("", "(+ cok)", "(+ cok tau", "(+ cok tau))", "cok tau",
                 "(foo cok)", "bogus", "(cok tau)", "()"):
        with pytest.raises(TreeParseError):
            parse_tree(text)


def test_node_validation():
    with pytest.raises(ValueError):
        Node("+", (Node("cok"),))
    with pytest.raises(ValueError):
        Node(CONST)  # needs a value
    with pytest.raises(ValueError):
        Node("cok", value=1.0)
    with pytest.raises(ValueError):
        Node(CONST, value=float("inf"))
