"""Axiom scans and the structure taxonomy, checked against naive loops.

The reference implementation below re-derives every verdict with plain
Python loops in lexicographic order, improving only on strictly larger
violation scores.  Quantized matrices keep all float arithmetic exact,
so kernel and reference must agree bit for bit, witnesses included.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixlab.space import (
    AxiomId,
    SpaceError,
    analytic_space,
    check_axiom,
    classify_structure,
    tabulated_space,
)

DELTA = 1e-12

ALL_LABELS = (
    "standard_metric",
    "partial_metric",
    "almost_partial_metric",
    "weak_almost_partial_metric",
    "triangular_symmetric",
    "symmetric_only",
)


# ---------------------------------------------------------------------------
# Naive reference


def naive_axiom(D, axiom, delta=DELTA):
    """(holds, witness) for one axiom, via exhaustive lex-ordered loops."""
    n = D.shape[0]
    best_score = None
    best = None

    def improve(score, idx):
        nonlocal best_score, best
        if best_score is None or score > best_score:
            best_score, best = score, idx

    if axiom in ("triangular", "reflexive_triangular"):
        refl = axiom == "reflexive_triangular"
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    lhs = D[i, k] + (D[j, j] if refl else 0.0)
                    score = lhs - (D[i, j] + D[j, k])
                    if score > delta:
                        improve(score, (i, j, k))
    elif axiom == "sufficient":
        for i in range(n):
            for j in range(n):
                if i != j and D[i, j] <= delta:
                    improve(-D[i, j], (i, j))
    elif axiom == "strongly_sufficient":
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                dev = max(abs(D[i, i] - D[i, j]), abs(D[j, j] - D[i, j]))
                if dev <= delta:
                    improve(-dev, (i, j))
    elif axiom == "matthews":
        for i in range(n):
            for j in range(n):
                score = max(D[i, i], D[j, j]) - D[i, j]
                if score > delta:
                    improve(score, (i, j))
    else:
        raise ValueError(axiom)
    return best is None, best


def naive_self_distance(D, delta=DELTA):
    bad = [(float(D[i, i]), i) for i in range(D.shape[0]) if D[i, i] > delta]
    if not bad:
        return True, None
    top = max(bad, key=lambda t: t[0])  # max is first-occurrence stable
    return False, (top[1],)


AXIOMS = (
    "triangular",
    "reflexive_triangular",
    "sufficient",
    "strongly_sufficient",
    "matthews",
)


def assert_matches_naive(D):
    space = tabulated_space(D)
    for axiom in AXIOMS:
        rep = check_axiom(space, axiom)
        holds, witness = naive_axiom(D, axiom)
        assert rep.holds == holds, (axiom, D)
        assert rep.witness == witness, (axiom, D)
    cls = classify_structure(space)
    rep = cls.reports["zero_self_distance"]
    holds, witness = naive_self_distance(D)
    assert rep.holds == holds
    assert rep.witness == witness
    return cls


# ---------------------------------------------------------------------------
# Frozen classifications for the three stock analytic spaces


def test_abs_metric_gets_every_label(abs_space):
    cls = classify_structure(abs_space)
    assert cls.label == "standard_metric"
    assert cls.labels == ALL_LABELS
    assert all(rep.holds for rep in cls.reports.values())


def test_max_space_is_partial_metric(max_space):
    cls = classify_structure(max_space)
    assert cls.label == "partial_metric"
    assert cls.labels == ALL_LABELS[1:]
    rep = cls.reports["zero_self_distance"]
    assert not rep.holds
    assert rep.witness == (1.0,)  # the largest self-distance on the grid
    assert rep.distances == {"d(x,x)": 1.0}


def test_sum_space_is_almost_partial(sum_space):
    cls = classify_structure(sum_space)
    assert cls.label == "almost_partial_metric"
    assert cls.labels == ALL_LABELS[2:]
    rep = cls.reports["matthews"]
    assert not rep.holds
    assert rep.witness == (0.0, 1.0)
    assert rep.distances == {"d(x,x)": 0.0, "d(y,y)": 2.0, "d(x,y)": 1.0}


def test_reports_carry_exhaustive_counts(abs_space):
    n = abs_space.matrix.shape[0]
    cls = classify_structure(abs_space)
    assert cls.reports["triangular"].checked_count == n**3
    assert cls.reports["reflexive_triangular"].checked_count == n**3
    assert cls.reports["sufficient"].checked_count == n * n - n
    assert cls.reports["strongly_sufficient"].checked_count == n * n - n
    assert cls.reports["matthews"].checked_count == n * n
    assert cls.reports["zero_self_distance"].checked_count == n


# ---------------------------------------------------------------------------
# Crafted tabulated structures, one per taxonomy rung


def test_weak_almost_partial_example():
    D = np.array([[0.2, 0.1], [0.1, 0.1]])
    cls = assert_matches_naive(D)
    assert cls.label == "weak_almost_partial_metric"
    assert cls.labels == ALL_LABELS[3:]
    rep = cls.reports["reflexive_triangular"]
    assert not rep.holds
    assert rep.witness == (0, 1, 0)
    assert rep.distances == {
        "d(x,z)": 0.2,
        "d(x,y)": 0.1,
        "d(y,z)": 0.1,
        "d(y,y)": 0.1,
    }


def test_triangular_symmetric_example():
    # two distinct points at distance zero kill every sufficiency rung
    D = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    cls = assert_matches_naive(D)
    assert cls.label == "triangular_symmetric"
    assert cls.labels == ALL_LABELS[4:]
    assert cls.reports["sufficient"].witness == (0, 1)
    assert cls.reports["strongly_sufficient"].witness == (0, 1)


def test_symmetric_only_example():
    D = np.array([[0.0, 3.0, 1.0], [3.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    cls = assert_matches_naive(D)
    assert cls.label == "symmetric_only"
    assert cls.labels == ("symmetric_only",)
    rep = cls.reports["triangular"]
    assert not rep.holds
    assert rep.witness == (0, 2, 1)  # detour through point 2 is shorter
    assert rep.distances == {"d(x,z)": 3.0, "d(x,y)": 1.0, "d(y,z)": 1.0}


def test_single_point_space():
    cls = assert_matches_naive(np.array([[0.0]]))
    assert cls.label == "standard_metric"


def test_classification_is_deterministic(sum_space):
    assert classify_structure(sum_space) == classify_structure(sum_space)


# ---------------------------------------------------------------------------
# Properties on random quantized matrices


@st.composite
def quantized_matrices(draw):
    n = draw(st.integers(min_value=1, max_value=5))
    cells = draw(
        st.lists(
            st.integers(min_value=0, max_value=8),
            min_size=n * n,
            max_size=n * n,
        )
    )
    M = np.array(cells, dtype=float).reshape(n, n) * 0.25
    D = np.triu(M)
    return D + np.triu(D, 1).T  # symmetric, diag kept


@settings(max_examples=200, deadline=None)
@given(quantized_matrices())
def test_kernel_agrees_with_naive(D):
    assert_matches_naive(D)


@settings(max_examples=200, deadline=None)
@given(quantized_matrices())
def test_label_consistent_with_reports(D):
    cls = classify_structure(tabulated_space(D))
    ok = {name: rep.holds for name, rep in cls.reports.items()}
    assert cls.labels[-1] == "symmetric_only"
    assert cls.label == cls.labels[0]
    assert ("triangular_symmetric" in cls.labels) == ok["triangular"]
    assert ("weak_almost_partial_metric" in cls.labels) == (
        ok["triangular"] and ok["sufficient"]
    )
    assert ("almost_partial_metric" in cls.labels) == (
        ok["reflexive_triangular"] and ok["sufficient"]
    )
    assert ("partial_metric" in cls.labels) == (
        ok["reflexive_triangular"] and ok["strongly_sufficient"] and ok["matthews"]
    )
    assert ("standard_metric" in cls.labels) == (
        ok["triangular"] and ok["sufficient"] and ok["zero_self_distance"]
    )


@settings(max_examples=200, deadline=None)
@given(quantized_matrices())
def test_triangular_bounds_self_distance(D):
    # x = z in the triangle inequality: d(x,x) <= 2 d(x,y)
    if check_axiom(tabulated_space(D), "triangular").holds:
        n = D.shape[0]
        for i in range(n):
            for j in range(n):
                assert D[i, i] <= 2.0 * D[i, j] + 2.0 * DELTA


@settings(max_examples=100, deadline=None)
@given(quantized_matrices())
def test_backends_classify_identically(D):
    from fixlab import backend

    results = []
    for name in ("numba", "numpy"):
        if name == "numba" and not backend.numba_available():
            continue
        with backend.use(name):
            results.append(assert_matches_naive(D))
    assert all(r == results[0] for r in results)


# ---------------------------------------------------------------------------
# Axiom argument forms and loader validation


def test_check_axiom_accepts_enum_and_string(abs_space):
    assert check_axiom(abs_space, AxiomId.TRIANGULAR) == check_axiom(
        abs_space, "triangular"
    )


def test_check_axiom_rejects_unknown_name(abs_space):
    with pytest.raises(ValueError):
        check_axiom(abs_space, "bogus")


def test_tabulated_rejects_non_square():
    with pytest.raises(SpaceError):
        tabulated_space(np.zeros((2, 3)))


def test_tabulated_rejects_asymmetric():
    with pytest.raises(SpaceError):
        tabulated_space(np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_tabulated_rejects_negative():
    with pytest.raises(SpaceError):
        tabulated_space(np.array([[0.0, -1.0], [-1.0, 0.0]]))


def test_tabulated_rejects_non_finite():
    with pytest.raises(SpaceError):
        tabulated_space(np.array([[0.0, np.nan], [np.nan, 0.0]]))


def test_tabulated_rejects_empty():
    with pytest.raises(SpaceError):
        tabulated_space(np.zeros((0, 0)))


def test_analytic_rejects_negative_values():
    with pytest.raises(SpaceError):
        analytic_space("x - y", 0.0, 1.0)


def test_analytic_rejects_non_finite_values():
    with pytest.raises(SpaceError):
        analytic_space("1 / (x - y)", 0.0, 1.0)


def test_analytic_rejects_asymmetric_expression():
    with pytest.raises(SpaceError):
        analytic_space("x - y + 1", 0.0, 1.0)


def test_analytic_rejects_degenerate_domain():
    with pytest.raises(SpaceError):
        analytic_space("abs(x - y)", 1.0, 0.0)
    with pytest.raises(SpaceError):
        analytic_space("abs(x - y)", 0.0, 1.0, grid=1)
