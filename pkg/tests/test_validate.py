import random

from hypothesis import given, settings, strategies as st

from retroplan.chem.fingerprint import token_fingerprint
from retroplan.mapping import identity
from retroplan.routes import Pathway, ReactionStep
from retroplan.validate import (
    PathwayOutcome,
    Verdict,
    build_reaction_db,
    load_reaction_db,
    validate_pathway,
    validate_step,
)

ROWS = [
    {"product": "CCO", "reactants": ["C=C", "O"]},
    {"product": "CC(=O)O", "reactants": ["CC=O"]},
    {"product": "CC(=O)O", "reactants": ["CO", "[C-]#[O+]"]},
    {"product": "CCOC(C)=O", "reactants": ["CC(=O)O", "CCO"]},
]
DB = build_reaction_db(ROWS)


def s(p, *rs):
    return ReactionStep(p, tuple(sorted(rs)))


def test_exact_match_valid():
    out = validate_step(s("CCO", "O", "C=C"), DB)
    assert out.verdict is Verdict.VALID and out.step == s("CCO", "C=C", "O")


def test_unknown_product_invalid():
    assert validate_step(s("CCCC", "CC"), DB).verdict is Verdict.INVALID


def test_same_product_replaced_by_first_by_source_id():
    out = validate_step(s("CC(=O)O", "C=O", "C"), DB)
    assert out.verdict is Verdict.REPLACED
    assert out.step == s("CC(=O)O", "CC=O")


def test_pathway_full_partial_none():
    ok = s("CCOC(C)=O", "CC(=O)O", "CCO")
    good2 = s("CCO", "C=C", "O")
    bad = s("CCCC", "CC")
    full = validate_pathway(Pathway((ok, good2)), DB)
    assert full.outcome is PathwayOutcome.FULL and len(full.prefix) == 2
    part = validate_pathway(Pathway((ok, bad, good2)), DB)
    assert part.outcome is PathwayOutcome.PARTIAL and part.prefix.steps == (ok,)
    none = validate_pathway(Pathway((bad, ok)), DB)
    assert none.outcome is PathwayOutcome.NONE and none.prefix.steps == ()


def test_malformed_rows_skipped():
    db = build_reaction_db([{"product": "C("}, {"product": "CC", "reactants": ["CC"]},
                            {"reactants": ["C"]}, ROWS[0]])
    assert len(db) == 1 and db.skipped == 3


def test_load_from_file(tmp_path):
    p = tmp_path / "rx.jsonl"
    p.write_text('{"product": "CCO", "reactants": ["C=C", "O"]}\nbroken\n')
    db = load_reaction_db(p)
    assert len(db) == 1 and db.skipped == 1


def token_db(seed):
    rng = random.Random(seed)
    alphabet = [f"k{i}" for i in range(15)]
    rows = []
    for _ in range(40):
        p = rng.choice(alphabet)
        rs = rng.sample([x for x in alphabet if x != p], rng.randint(1, 3))
        rows.append({"product": p, "reactants": rs})
    db = build_reaction_db(rows, featurizer=token_fingerprint, canonicalizer=identity)
    steps = []
    for _ in range(rng.randint(1, 6)):
        p = rng.choice(alphabet)
        steps.append(s(p, *rng.sample([x for x in alphabet if x != p], rng.randint(1, 3))))
    return db, Pathway(tuple(steps)), rows


@given(st.integers(0, 2**31))
@settings(max_examples=200, deadline=None)
def test_prefix_soundness_and_determinism(seed):
    db, p, rows = token_db(seed)
    res = validate_pathway(p, db)
    n = len(res.prefix)
    # contiguous leading subsequence, up to replacement of each step's reactants
    assert [x.product for x in res.prefix.steps] == [x.product for x in p.steps[:n]]
    known = {(r["product"], frozenset(r["reactants"])) for r in rows}
    for out in res.steps:
        if out.verdict is Verdict.REPLACED:
            assert (out.step.product, out.step.reactant_set) in known
    for orig, out in zip(p.steps, res.steps):
        if out.verdict is Verdict.VALID:
            assert out.step == orig
    assert validate_pathway(p, db) == res
