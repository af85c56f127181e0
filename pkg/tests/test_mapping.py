import pytest
from hypothesis import given, settings, strategies as st

from oracles import mapping_mismatch
from retroplan.mapping import EmptyPathwayError, identity, map_pathway, normalize_pathway
from retroplan.routes import Pathway, ReactionStep
from retroplan.tree import AndOrTree


def path(*steps):
    return Pathway(tuple(ReactionStep(p, tuple(rs)) for p, rs in steps))


def test_two_step_route_depths():
    t = AndOrTree("T", inventory={"b1", "b2", "b3"})
    r = map_pathway(t, path(("T", ["I", "b1"]), ("I", ["b2", "b3"])))
    assert len(r.added) == 2
    assert [t.and_nodes[a].depth for a in r.added] == [1, 2]
    assert t.update_solved() == {"I", "T"}


def test_base_depth_offsets():
    t = AndOrTree("T")
    r = map_pathway(t, path(("T", ["X"])), base_depth=3)
    assert t.and_nodes[r.added[0]].depth == 4


def test_orphan_step_skipped():
    t = AndOrTree("T")
    r = map_pathway(t, path(("Q", ["X"]), ("T", ["Y"])))
    assert r.orphaned == [1] and len(r.added) == 1


def test_orphan_resolved_by_later_order_only():
    # a step whose product appears only later in the pathway is still an orphan
    t = AndOrTree("T")
    r = map_pathway(t, path(("I", ["X"]), ("T", ["I"])))
    assert r.orphaned == [1]
    assert "I" in t.index and not t.or_nodes[t.index["I"]].children


def test_duplicate_refreshed_not_added():
    t = AndOrTree("T")
    first = map_pathway(t, path(("T", ["A", "B"])))
    again = map_pathway(t, path(("T", ["B", "A"])))
    assert again.added == [] and again.refreshed == first.added
    assert len(t.and_nodes) == 1


def test_solved_product_skipped():
    t = AndOrTree("T", inventory={"A"})
    t.insert_or("A")
    r = map_pathway(t, path(("T", ["A"]), ("A", ["Z"])))
    assert r.skipped_solved == [2]


def test_cycle_rejected():
    t = AndOrTree("T")
    r = map_pathway(t, path(("T", ["A"]), ("A", ["T"])))
    assert r.rejected_cycles == [2]
    t.check_invariants()


def test_normalize_canonicalizes_and_drops():
    raw = Pathway((ReactionStep("OCC", ("CC(=O)O", "C(")),
                   ReactionStep("OCC", ("CCO", "O")),
                   ReactionStep("CCO", ("OC(C)=O", "[H][H]"))))
    norm = normalize_pathway(raw)
    assert len(norm.steps) == 1
    assert norm.steps[0].product == "CCO"
    assert len(norm.diagnostics) == 2


def test_normalize_all_bad():
    with pytest.raises(EmptyPathwayError):
        normalize_pathway(Pathway((ReactionStep("C(", ("C",)),)))


def test_identity_canonicalizer_keeps_tokens():
    raw = path(("T", ["B", "A", "A"]))
    assert normalize_pathway(raw, identity).steps[0].reactants == ("A", "B")


@given(st.integers(0, 2**31))
@settings(max_examples=300, deadline=None)
def test_matches_reference_constructor(seed):
    assert mapping_mismatch(seed) is None
