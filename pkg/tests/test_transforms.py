import dataclasses
import math

import numpy as np
import pytest

from qmipsim import corpus
from qmipsim.engine import run, run_classical, simulate
from qmipsim.errors import (
    AlphabetMismatch,
    NoEraser,
    NotFairCoin,
    NotOrthonormal,
    NotRestrictive,
    NotReversible,
    SpaceExceeded,
    ValidationError,
)
from qmipsim.specs import (
    BLANK,
    LEFT_END,
    ClassicalTableStrategy,
    EraserStrategy,
    ForeignGuard,
    LoggedReplyStrategy,
    ProtocolSpec,
    ProverSpec,
    ReversibleWrapStrategy,
    TrackGuard,
    TrackWrapStrategy,
    VerifierSpec,
    check_restrictive,
    check_well_formed,
    constant_reply,
    parse_track,
    sparse_gram,
    track,
    validate_protocol,
)
from qmipsim.transforms import (
    complete_unitary,
    lift_2ip_to_3qip,
    make_eraser,
    make_reversible_prover,
    reduce_3qip_to_2qip,
    unify_alphabets,
)

H = 1 / math.sqrt(2)


# ---------------------------------------------------------------- building blocks


def test_make_reversible_keeps_injective_table():
    table = ClassicalTableStrategy(work=0, rows={("#", ()): ("a", ()), ("b", ()): ("b", ())})
    prover = ProverSpec(
        index=1, comm_alphabet=("#", "a", "b"), tape_alphabet=("#",), space=0, strategy=table
    )
    assert make_reversible_prover(prover, cutoff=4) is prover


def test_make_reversible_wraps_per_receive_injective_table():
    table = ClassicalTableStrategy(
        work=1,
        rows={
            ("#", ("#",)): ("#", ("#",)),
            ("1", ("#",)): ("1", ("1",)),
            ("1", ("1",)): ("#", ("#",)),
        },
    )
    prover = ProverSpec(
        index=1, comm_alphabet=("#", "1"), tape_alphabet=("#", "1"), space=1, strategy=table
    )
    wrapped = make_reversible_prover(prover, cutoff=4)
    assert isinstance(wrapped.strategy, ReversibleWrapStrategy)
    assert wrapped.strategy.hist_offset == 1
    assert wrapped.space == 1 + 4
    # the wrap resolves the merge: identical outputs now carry distinct logs
    a = wrapped.strategy.apply_quantum(1, "#", (BLANK,) * 5)
    b = wrapped.strategy.apply_quantum(1, "1", ("1",) + (BLANK,) * 4)
    assert a[0][0][0] == BLANK and b[0][0][0] == BLANK
    assert a[0][0][1] != b[0][0][1]


def test_make_reversible_rejects_true_merges():
    table = ClassicalTableStrategy(
        work=1, rows={("#", ("x",)): ("a", ("#",)), ("#", ("y",)): ("a", ("#",))}
    )
    prover = ProverSpec(
        index=1, comm_alphabet=("#",), tape_alphabet=("#", "x", "y", "a"), space=1, strategy=table
    )
    with pytest.raises(NotReversible):
        make_reversible_prover(prover, cutoff=4)


def test_make_reversible_rejects_non_table_strategies():
    prover = ProverSpec(
        index=1, comm_alphabet=("#",), tape_alphabet=("#",), space=1, strategy=EraserStrategy()
    )
    with pytest.raises(NotReversible):
        make_reversible_prover(prover, cutoff=4)


def test_make_eraser_checks():
    e = make_eraser(3, ("#", "m"), space=4, cutoff=4)
    assert isinstance(e.strategy, EraserStrategy)
    assert e.tape_alphabet == ("#", "m")
    with pytest.raises(SpaceExceeded):
        make_eraser(3, ("#", "m"), space=3, cutoff=4)
    with pytest.raises(AlphabetMismatch):
        make_eraser(3, ("#", "m"), space=4, cutoff=4, tape_alphabet=("#",))


# ---------------------------------------------------------------- lift


def test_lift_structure_on_no_comm():
    classical = corpus.build("no_comm")
    out = lift_2ip_to_3qip(classical)
    lifted = out.protocol
    validate_protocol(lifted)
    assert lifted.verifier.mode == "2qfa"
    assert lifted.k == 3
    assert lifted.name == "no_comm-lift"
    # nine source rows, each with a distinct record symbol
    assert len(out.log_symbols) == 9
    assert len(set(out.log_symbols.values())) == 9
    assert len(lifted.verifier.comm_alphabets[2]) == 10
    # nine lifted rows plus a reject echo per (row, nonblank record symbol)
    assert len(lifted.verifier.rows) == 90
    assert check_well_formed(lifted.verifier)
    assert check_restrictive(lifted.verifier)


def test_lift_record_symbols_parse_back_to_their_rows():
    out = lift_2ip_to_3qip(corpus.build("no_comm"))
    for key, sym in out.log_symbols.items():
        upper, lower = parse_track(sym)
        q, sigma, comm = key
        assert upper.split(".") == [q, sigma, *comm]
        assert lower  # every branch sends something


def test_lift_provenance_covers_every_row():
    out = lift_2ip_to_3qip(corpus.build("no_comm"))
    rows = out.protocol.verifier.rows
    assert set(out.row_provenance) == set(rows)
    sourced = [k for k, v in out.row_provenance.items() if v != "record-channel-reject"]
    echoes = [k for k, v in out.row_provenance.items() if v == "record-channel-reject"]
    assert len(sourced) == 9
    assert len(echoes) == 81
    for key in sourced:
        assert out.row_provenance[key] == (key[0], key[1], key[2][:2])
    for key in echoes:
        (branch,) = rows[key]
        assert branch[0].startswith("rej[")
        assert branch[2] == key[2]  # the reception is echoed back out


def test_lift_preserves_acceptance_statistics():
    classical = corpus.build("no_comm")
    lifted = lift_2ip_to_3qip(classical).protocol
    for x in ("0", "00"):
        c = run_classical(classical, x)
        q = run(lifted, x)
        assert abs(c.p_accept - q.p_accept) <= 1e-12
        assert abs(c.p_reject - q.p_reject) <= 1e-12


def test_lift_merges_duplicate_coin_targets():
    # a coin flip whose two outcomes are identical lifts to one branch of
    # amplitude 1, not two branches of 1/sqrt(2)
    rows = {
        ("q0", LEFT_END, ("#", "#")): (
            ("acc", 1, ("#", "#"), 0.5),
            ("acc", 1, ("#", "#"), 0.5),
        )
    }
    verifier = VerifierSpec(
        mode="1pfa",
        states=("q0", "acc", "rej"),
        initial="q0",
        accept=frozenset({"acc"}),
        reject=frozenset({"rej"}),
        input_alphabet=("0",),
        comm_alphabets=(("#",), ("#",)),
        rows=rows,
        fallback=None,
    )
    mute = ClassicalTableStrategy(work=0, rows={("#", ()): ("#", ())})
    provers = tuple(
        ProverSpec(index=i, comm_alphabet=("#",), tape_alphabet=("#",), space=0, strategy=mute)
        for i in (1, 2)
    )
    p = ProtocolSpec(name="dup", verifier=verifier, provers=provers, a=1.0, b=1.0, cutoff=1)
    out = lift_2ip_to_3qip(p)
    lifted_key = ("q0", LEFT_END, ("#", "#", "#"))
    (branch,) = out.protocol.verifier.rows[lifted_key]
    assert branch[3] == 1.0 + 0j


def test_lift_rejects_non_fair_coin_and_wrong_arity():
    with pytest.raises(NotFairCoin):
        lift_2ip_to_3qip(corpus.build("coinflip_quantum"))
    biased_rows = {
        ("q0", LEFT_END, ("#", "#")): (
            ("acc", 1, ("#", "#"), 0.3),
            ("rej", 1, ("#", "#"), 0.7),
        )
    }
    base = corpus.build("no_comm")
    biased = dataclasses.replace(
        base, verifier=dataclasses.replace(base.verifier, rows=biased_rows)
    )
    with pytest.raises(NotFairCoin):
        lift_2ip_to_3qip(biased)
    one_prover = corpus.build("coinflip_classical")
    with pytest.raises(ValidationError):
        lift_2ip_to_3qip(one_prover)


def test_lift_rejects_symbols_that_clash_with_record_syntax():
    rows = {
        ("q.0", LEFT_END, ("#", "#")): (("acc", 1, ("#", "#"), 1.0),),
    }
    verifier = VerifierSpec(
        mode="1pfa",
        states=("q.0", "acc", "rej"),
        initial="q.0",
        accept=frozenset({"acc"}),
        reject=frozenset({"rej"}),
        input_alphabet=("0",),
        comm_alphabets=(("#",), ("#",)),
        rows=rows,
        fallback=None,
    )
    mute = ClassicalTableStrategy(work=0, rows={("#", ()): ("#", ())})
    provers = tuple(
        ProverSpec(index=i, comm_alphabet=("#",), tape_alphabet=("#",), space=0, strategy=mute)
        for i in (1, 2)
    )
    p = ProtocolSpec(name="dotted", verifier=verifier, provers=provers, a=1.0, b=1.0, cutoff=1)
    with pytest.raises(ValidationError):
        lift_2ip_to_3qip(p)


def test_lift_wraps_non_injective_tables_only_on_request():
    parity = corpus.build("parity_relay")
    out = lift_2ip_to_3qip(parity)
    assert isinstance(out.protocol.provers[0].strategy, ReversibleWrapStrategy)
    with pytest.raises(NotReversible):
        lift_2ip_to_3qip(parity, auto_wrap=False)


def test_lift_rejects_tampered_record_channel():
    lifted = lift_2ip_to_3qip(corpus.build("no_comm")).protocol
    log = lifted.verifier.comm_alphabets[2][1]
    liar = ProverSpec(
        index=3,
        comm_alphabet=lifted.provers[2].comm_alphabet,
        tape_alphabet=lifted.provers[2].comm_alphabet,
        space=lifted.cutoff,
        strategy=constant_reply(log),
    )
    tampered = dataclasses.replace(lifted, provers=lifted.provers[:2] + (liar,))
    result = run(tampered, "0")
    assert result.p_reject == pytest.approx(1.0, abs=1e-12)
    assert result.halted_round == 2


# ---------------------------------------------------------------- unify


def test_unify_pads_to_power_of_two():
    lifted = lift_2ip_to_3qip(corpus.build("no_comm")).protocol
    unified = unify_alphabets(lifted)
    validate_protocol(unified)
    alphabets = unified.verifier.comm_alphabets
    assert len(set(alphabets)) == 1
    assert len(alphabets[0]) == 16
    assert alphabets[0][0] == BLANK
    assert "~0" in alphabets[0]
    assert isinstance(unified.verifier.fallback, ForeignGuard)
    assert unified.name == "no_comm-lift-unified"


def test_unify_preserves_statistics():
    lifted = lift_2ip_to_3qip(corpus.build("no_comm")).protocol
    unified = unify_alphabets(lifted)
    a = run(lifted, "0")
    b = run(unified, "0")
    assert abs(a.p_accept - b.p_accept) <= 1e-12
    assert a.halted_round == b.halted_round


def test_unify_refuses_second_pass():
    unified = unify_alphabets(lift_2ip_to_3qip(corpus.build("no_comm")).protocol)
    with pytest.raises(ValidationError):
        unify_alphabets(unified)


def test_unify_guard_rejects_padding_symbols():
    unified = unify_alphabets(lift_2ip_to_3qip(corpus.build("no_comm")).protocol)
    liar = ProverSpec(
        index=1,
        comm_alphabet=unified.provers[0].comm_alphabet,
        tape_alphabet=unified.provers[0].comm_alphabet,
        space=unified.cutoff,
        strategy=constant_reply("~0"),
    )
    tampered = dataclasses.replace(unified, provers=(liar,) + unified.provers[1:])
    result = run(tampered, "0")
    assert result.p_reject == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- reduce


def _unified():
    return unify_alphabets(lift_2ip_to_3qip(corpus.build("no_comm")).protocol)


def test_reduce_structure():
    out = reduce_3qip_to_2qip(_unified())
    reduced = out.protocol
    validate_protocol(reduced)
    assert reduced.k == 2
    assert reduced.name == "no_comm-lift-reduce"
    assert len(reduced.verifier.comm_alphabets[0]) == 256
    # only blank-record rows survive; the 81 reject echoes are dropped
    assert len(reduced.verifier.rows) == 9
    assert len(out.dropped_rows) == 81
    assert set(out.row_provenance.values()) | set(out.dropped_rows) == set(
        _unified().verifier.rows
    )
    assert check_well_formed(reduced.verifier)
    assert isinstance(reduced.verifier.fallback, TrackGuard)
    for pr in reduced.provers:
        assert isinstance(pr.strategy, TrackWrapStrategy)


def test_reduce_masks_expand_each_branch_per_mask():
    unified = _unified()
    out = reduce_3qip_to_2qip(unified)
    gamma = len(unified.verifier.comm_alphabets[0])
    for new_key, old_key in out.row_provenance.items():
        old_branches = unified.verifier.rows[old_key]
        new_branches = out.protocol.verifier.rows[new_key]
        assert len(new_branches) == gamma * len(old_branches)
        root = 1 / math.sqrt(gamma)
        for (_, _, sent, w) in new_branches:
            assert abs(abs(w) - abs(root * old_branches[0][3])) <= 1e-12
            for sym in sent:
                assert parse_track(sym) is not None or sym == BLANK


def test_reduce_preserves_row_gram():
    unified = _unified()
    out = reduce_3qip_to_2qip(unified)
    # inner products between surviving source rows must reappear unchanged
    # between their reduced images, per scanned symbol
    def vectors(v, keys):
        vecs = {}
        for key in keys:
            vec = {}
            for (q2, d, sent, w) in v.rows[key]:
                t = (q2, d, sent)
                vec[t] = vec.get(t, 0j) + complex(w)
            vecs[key] = vec
        return vecs

    back = {new: old for new, old in out.row_provenance.items()}
    old_vecs = vectors(unified.verifier, back.values())
    new_vecs = vectors(out.protocol.verifier, back.keys())
    old_gram = sparse_gram(old_vecs)
    new_gram = sparse_gram(new_vecs)
    for (ka, kb), ip in new_gram.items():
        pair = (back[ka], back[kb])
        pair = pair if pair[0] <= pair[1] else (pair[1], pair[0])
        assert abs(ip - old_gram.get(pair, 0j)) <= 1e-9
    for (ka, kb), ip in old_gram.items():
        if abs(ip) > 1e-12:
            fwd = {old: new for new, old in back.items()}
            pair = (fwd[ka], fwd[kb])
            pair = pair if pair[0] <= pair[1] else (pair[1], pair[0])
            assert pair in new_gram


def test_reduce_preserves_statistics():
    classical = corpus.build("no_comm")
    reduced = reduce_3qip_to_2qip(_unified()).protocol
    for x in ("0", "00"):
        c = run_classical(classical, x)
        q = run(reduced, x)
        assert abs(c.p_accept - q.p_accept) <= 1e-12


def test_reduce_guard_rejects_leftover_masks():
    reduced = reduce_3qip_to_2qip(_unified()).protocol
    liar = ProverSpec(
        index=1,
        comm_alphabet=reduced.provers[0].comm_alphabet,
        tape_alphabet=reduced.provers[0].comm_alphabet,
        space=reduced.cutoff,
        strategy=constant_reply(track("g", "g")),
    )
    tampered = dataclasses.replace(reduced, provers=(liar,) + reduced.provers[1:])
    result = run(tampered, "0")
    assert result.p_reject == pytest.approx(1.0, abs=1e-12)


def test_reduce_preconditions():
    with pytest.raises(NotRestrictive):
        reduce_3qip_to_2qip(corpus.build("no_comm"))  # classical
    lifted = lift_2ip_to_3qip(corpus.build("no_comm")).protocol
    with pytest.raises(AlphabetMismatch):
        reduce_3qip_to_2qip(lifted)  # alphabets differ before unify
    unified = _unified()
    two = dataclasses.replace(
        unified,
        provers=unified.provers[:2],
        verifier=dataclasses.replace(
            unified.verifier, comm_alphabets=unified.verifier.comm_alphabets[:2]
        ),
    )
    with pytest.raises(ValidationError):
        reduce_3qip_to_2qip(two)
    no_eraser = dataclasses.replace(
        unified,
        provers=unified.provers[:2]
        + (
            ProverSpec(
                index=3,
                comm_alphabet=unified.provers[2].comm_alphabet,
                tape_alphabet=unified.provers[2].tape_alphabet,
                space=unified.provers[2].space,
                strategy=constant_reply(BLANK),
            ),
        ),
    )
    with pytest.raises(NoEraser):
        reduce_3qip_to_2qip(no_eraser)


def test_reduce_rejects_wide_superpositions():
    unified = _unified()
    key, branches = next(iter(unified.verifier.rows.items()))
    third = 1 / math.sqrt(3)
    wide = {
        **unified.verifier.rows,
        key: (
            (branches[0][0], branches[0][1], branches[0][2], complex(third)),
            ("rej", 1, branches[0][2], complex(third)),
            (unified.verifier.initial, 1, branches[0][2], complex(third)),
        ),
    }
    broken = dataclasses.replace(
        unified, verifier=dataclasses.replace(unified.verifier, rows=wide)
    )
    with pytest.raises(NotRestrictive):
        reduce_3qip_to_2qip(broken)


# ---------------------------------------------------------------- completion


def test_complete_unitary_identity_from_empty():
    basis = ["a", "b", "c"]
    full = complete_unitary({}, basis, basis)
    for elem in basis:
        assert full[elem] == {elem: pytest.approx(1.0)}


def test_complete_unitary_fills_orthogonal_columns():
    basis = ["a", "b"]
    partial = {"a": {"a": complex(H), "b": complex(H)}}
    full = complete_unitary(partial, basis, basis)
    m = np.array(
        [[full[c].get(r, 0j) for c in basis] for r in basis], dtype=complex
    )
    assert np.allclose(m.conj().T @ m, np.eye(2))


def test_complete_unitary_respects_prefer():
    basis = ["a", "b"]
    partial = {"a": {"a": complex(H), "b": complex(H)}}
    prefer = {"b": {"a": complex(H), "b": complex(-H)}}
    full = complete_unitary(partial, basis, basis, prefer=prefer)
    assert full["b"]["a"] == pytest.approx(complex(H))
    assert full["b"]["b"] == pytest.approx(complex(-H))


def test_complete_unitary_rejects_bad_columns():
    basis = ["a", "b"]
    with pytest.raises(NotOrthonormal):
        complete_unitary({"a": {"a": 0.5 + 0j}}, basis, basis)
    overlapping = {
        "a": {"a": complex(H), "b": complex(H)},
        "b": {"a": complex(H), "b": complex(H)},
    }
    with pytest.raises(NotOrthonormal):
        complete_unitary(overlapping, basis, basis)
    with pytest.raises(ValidationError):
        complete_unitary({}, ["a"], ["a", "b"])


def test_parity_chain_preserves_statistics_end_to_end():
    classical = corpus.build("parity_relay")
    lifted = lift_2ip_to_3qip(classical).protocol
    reduced = reduce_3qip_to_2qip(unify_alphabets(lifted)).protocol
    for x in ("", "1", "11"):
        c = run_classical(classical, x)
        for stage in (lifted, reduced):
            q = run(stage, x)
            assert abs(c.p_accept - q.p_accept) <= 1e-12
            assert abs(c.p_reject - q.p_reject) <= 1e-12


def test_simulate_dispatches_across_the_chain():
    reduced = corpus.build("no_comm_reduce")
    assert simulate(reduced, "0").p_accept == pytest.approx(0.5, abs=1e-12)
