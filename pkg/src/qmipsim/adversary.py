"""Adversarial strategy search and prover derandomization.

Soundness claims quantify over all prover strategies, which no finite run
can cover. What a desk-scale tool can do is sweep structured families that
contain every strategy worth trying at these sizes: constant replies, full
reply sequences, echoes, and mask-track probes. The search caches the
round-1 residual (provers first act in round 2), so a sweep costs one
partial run per combination.

Derandomization goes the other way: given quantum provers attacking a
probabilistic verifier, it distills deterministic provers that reject at
most as often. The verifier reads each communication cell every round, so
the cell is effectively measured and the run decoheres into a tree of
classical branches; picking, per reachable (step, received symbol, tape),
the reply with the smallest aggregate rejection mass can only help the
provers at each replacement, which gives the dominance guarantee.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

from .amplitudes import PRUNE_TOL, StateVector, apply_sparse_operator
from .engine import (
    Configuration,
    input_tape,
    run_round,
    verifier_operator,
)
from .engine import _measure as _measure_state
from .errors import FamilyTooLarge, Unbounded, ValidationError
from .specs import (
    BLANK,
    DerandomizedStrategy,
    LoggedReplyStrategy,
    ProtocolSpec,
    ProverSpec,
    constant_reply,
    echo_reply,
    fixed_width_binary_encoding,
    make_track_alphabet,
    parse_track,
    rotation_reply,
    track,
    xor_symbols,
)

DEFAULT_FAMILY_LIMIT = 10 ** 6
TIE_TOL = 1e-12


def family_limit() -> int:
    raw = os.environ.get("QMIP_FAMILY_LIMIT")
    if raw is None:
        return DEFAULT_FAMILY_LIMIT
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"QMIP_FAMILY_LIMIT={raw!r} is not an integer")


@dataclass(frozen=True)
class StrategyFamily:
    prover_index: int
    label: str
    strategies: tuple


def _sequence_strategy(seq: tuple[str, ...]) -> LoggedReplyStrategy:
    return LoggedReplyStrategy(
        "seq:" + ",".join(seq),
        lambda step, recv, seq=seq: [(seq[min(step, len(seq)) - 1], 1.0 + 0j)],
    )


def reply_sequence_family(index: int, alphabet: tuple[str, ...], steps: int) -> StrategyFamily:
    """Every fixed reply sequence of the given length, plus the echo."""
    steps = max(1, steps)
    strategies = [_sequence_strategy(seq) for seq in itertools.product(alphabet, repeat=steps)]
    strategies.append(echo_reply())
    return StrategyFamily(index, f"sequences^{steps}", tuple(strategies))


def constant_family(index: int, alphabet: tuple[str, ...]) -> StrategyFamily:
    strategies = [constant_reply(sym) for sym in alphabet]
    strategies.append(echo_reply())
    return StrategyFamily(index, "constants", tuple(strategies))


def rotation_family(index: int, alphabet: tuple[str, ...]) -> StrategyFamily:
    """Equal-weight two-symbol superpositions over the alphabet, both signs."""
    strategies = []
    for i, a in enumerate(alphabet):
        for b in alphabet[i + 1:]:
            strategies.append(rotation_reply(a, b, +1))
            strategies.append(rotation_reply(a, b, -1))
    return StrategyFamily(index, "rotations", tuple(strategies))


def _is_track_alphabet(alphabet: tuple[str, ...]) -> bool:
    """True only for a full two-track product alphabet over one base set."""
    if len(alphabet) <= 2:
        return False
    if any(parse_track(sym) is None for sym in alphabet):
        return False
    base = _track_base(alphabet)
    return tuple(alphabet) == make_track_alphabet(base, base)


def _track_base(alphabet: tuple[str, ...]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for sym in alphabet:
        upper, _ = parse_track(sym)
        seen.setdefault(upper, None)
    return tuple(seen)


def track_probe_family(index: int, track_alphabet: tuple[str, ...]) -> StrategyFamily:
    """Probes for two-track mask channels.

    Constants over the full track alphabet, the echo, lower-track XOR shifts
    (they preserve any mask correlation an honest run would have), and
    upper-symbol substitutions that keep the lower track intact.
    """
    base = _track_base(track_alphabet)
    encoding = fixed_width_binary_encoding(base)
    strategies = [constant_reply(sym) for sym in track_alphabet]
    strategies.append(echo_reply())
    for s in base:
        if s == BLANK:
            continue
        def shift(step, recv, s=s):
            upper, lower = parse_track(recv)
            return [(track(upper, xor_symbols(encoding, lower, s)), 1.0 + 0j)]
        strategies.append(LoggedReplyStrategy(f"shift:{s}", shift))
    for c in base:
        def substitute(step, recv, c=c):
            _, lower = parse_track(recv)
            return [(track(c, lower), 1.0 + 0j)]
        strategies.append(LoggedReplyStrategy(f"upper:{c}", substitute))
    return StrategyFamily(index, "track-probes", tuple(strategies))


SEQUENCE_CAP = 4096


def default_families(p: ProtocolSpec, cutoff: int | None = None) -> tuple[StrategyFamily, ...]:
    """A reasonable family per prover, picked from the channel's shape."""
    T = cutoff if cutoff is not None else p.cutoff
    steps = max(1, T - 1)
    out = []
    for i, alphabet in enumerate(p.verifier.comm_alphabets):
        index = i + 1
        if _is_track_alphabet(alphabet):
            out.append(track_probe_family(index, alphabet))
        elif len(alphabet) ** steps <= SEQUENCE_CAP:
            out.append(reply_sequence_family(index, alphabet, steps))
        else:
            out.append(constant_family(index, alphabet))
    return tuple(out)


def _strategic_provers(p: ProtocolSpec, strategies, cutoff: int) -> tuple[ProverSpec, ...]:
    space = max(1, cutoff)
    return tuple(
        ProverSpec(
            index=i + 1,
            comm_alphabet=p.verifier.comm_alphabets[i],
            tape_alphabet=p.verifier.comm_alphabets[i],
            space=space,
            strategy=strat,
        )
        for i, strat in enumerate(strategies)
    )


@dataclass
class SearchResult:
    objective: str
    best_value: float
    best_labels: tuple[str, ...]
    best_p_accept: float
    best_p_reject: float
    best_leftover: float
    evaluated: int
    table: list[tuple[tuple[str, ...], float, float]] | None = None


def search(
    p: ProtocolSpec,
    x: str,
    families: tuple[StrategyFamily, ...] | None = None,
    objective: str = "max-accept",
    cutoff: int | None = None,
    limit: int | None = None,
    keep_table: bool = False,
) -> SearchResult:
    """Sweep one strategy per prover over the given families.

    Deterministic order, first strict optimum kept, so results are
    reproducible run to run. Round 1 happens before any prover acts and is
    computed once for the whole sweep.
    """
    if objective not in ("max-accept", "min-reject"):
        raise ValidationError(f"unknown objective {objective!r}")
    if families is None:
        families = default_families(p, cutoff)
    if len(families) != p.k:
        raise ValidationError(f"need {p.k} families, got {len(families)}")
    for i, fam in enumerate(families):
        if fam.prover_index != i + 1:
            raise ValidationError(f"family {i} is labeled for prover {fam.prover_index}")
    cap = limit if limit is not None else family_limit()
    total = 1
    for fam in families:
        total *= len(fam.strategies)
    if total > cap:
        sizes = "x".join(str(len(f.strategies)) for f in families)
        raise FamilyTooLarge(f"{sizes} = {total} combinations exceeds the limit of {cap}")

    T = cutoff if cutoff is not None else p.cutoff
    quantum = p.verifier.is_quantum()
    tape = input_tape(x, p.verifier)
    # round 1 precedes any prover move, so it is shared by every combination;
    # the tapes must already have the sweep strategies' logging cells
    space = max(1, T)
    state0: StateVector = {
        Configuration(
            p.verifier.initial, 0, (BLANK,) * p.k, tuple((BLANK,) * space for _ in range(p.k))
        ): 1.0 + 0j
    }
    acc1, rej1, residual1 = run_round(p, tape, state0, 1, quantum)

    best = None
    table: list[tuple[tuple[str, ...], float, float]] | None = [] if keep_table else None
    evaluated = 0
    for combo in itertools.product(*(fam.strategies for fam in families)):
        provers = _strategic_provers(p, combo, T)
        trial = ProtocolSpec(p.name, p.verifier, provers, p.a, p.b, T)
        state: StateVector = dict(residual1)
        total_acc, total_rej = acc1, rej1
        for j in range(2, T + 1):
            if sum((a * a.conjugate()).real if quantum else a.real for a in state.values()) <= PRUNE_TOL:
                break
            a_j, r_j, state = run_round(trial, tape, state, j, quantum)
            total_acc += a_j
            total_rej += r_j
        evaluated += 1
        labels = tuple(s.label if hasattr(s, "label") else s.kind for s in combo)
        if table is not None:
            table.append((labels, total_acc, total_rej))
        value = total_acc if objective == "max-accept" else total_rej
        better = (
            best is None
            or (objective == "max-accept" and value > best[0] + TIE_TOL)
            or (objective == "min-reject" and value < best[0] - TIE_TOL)
        )
        if better:
            leftover = sum((a * a.conjugate()).real if quantum else a.real for a in state.values())
            best = (value, labels, total_acc, total_rej, leftover)
    assert best is not None
    return SearchResult(
        objective=objective,
        best_value=best[0],
        best_labels=best[1],
        best_p_accept=best[2],
        best_p_reject=best[3],
        best_leftover=best[4],
        evaluated=evaluated,
        table=table,
    )


@dataclass
class SoundnessReport:
    input: str
    claimed_b: float
    empirical_b: float
    worst_labels: tuple[str, ...]
    evaluated: int
    meets_claim: bool


def soundness_gap(
    p: ProtocolSpec,
    x: str,
    families: tuple[StrategyFamily, ...] | None = None,
    cutoff: int | None = None,
    limit: int | None = None,
) -> SoundnessReport:
    """Smallest rejection probability any family combination achieves on x."""
    result = search(p, x, families, objective="min-reject", cutoff=cutoff, limit=limit)
    return SoundnessReport(
        input=x,
        claimed_b=p.b,
        empirical_b=result.best_value,
        worst_labels=result.best_labels,
        evaluated=result.evaluated,
        meets_claim=result.best_value >= p.b - 1e-9,
    )


# ---------------------------------------------------------------------------
# decohered runs: quantum provers against a probabilistic verifier

def _decohere_prover(prover: ProverSpec, step: int):
    """Prover move with the communication cell measured right after.

    Replies become probabilistic branches with Born weights. The conditional
    tape state per reply must be a single basis tape, which holds for every
    strategy here (tape updates only log the received symbol); anything
    entangling its tape with the reply has no deterministic shadow.
    """
    slot = prover.index - 1

    def op(config: Configuration):
        moves = prover.strategy.apply_quantum(step, config.comm[slot], config.tapes[slot])
        groups: dict[str, dict[tuple, complex]] = {}
        for (reply, new_tape), amp in moves:
            groups.setdefault(reply, {})
            groups[reply][new_tape] = groups[reply].get(new_tape, 0j) + complex(amp)
        out = []
        for reply, tapes in sorted(groups.items()):
            live = {t: a for t, a in tapes.items() if abs(a) > 1e-12}
            if not live:
                continue
            if len(live) > 1:
                raise Unbounded(
                    f"prover {prover.index} entangles its tape with the reply at step {step}"
                )
            (new_tape, amp), = live.items()
            mass = (amp * amp.conjugate()).real
            comm = config.comm[:slot] + (reply,) + config.comm[slot + 1:]
            tapes_out = config.tapes[:slot] + (new_tape,) + config.tapes[slot + 1:]
            out.append((Configuration(config.state, config.head, comm, tapes_out), mass))
        return out

    return op


def _decohered_run(
    p: ProtocolSpec,
    x: str,
    provers: tuple[ProverSpec, ...],
    cutoff: int,
    pause: tuple[int, int] | None = None,
):
    """Tree run of a classical protocol under quantum provers.

    Weights are probabilities throughout. With pause=(step, i) the run stops
    right before prover i (0-based) acts at that step and returns the state.
    """
    v = p.verifier
    tape = input_tape(x, v)
    comm = (BLANK,) * len(provers)
    tapes = tuple((BLANK,) * pr.space for pr in provers)
    state: StateVector = {Configuration(v.initial, 0, comm, tapes): 1.0 + 0j}
    total_acc = total_rej = 0.0
    for j in range(1, cutoff + 1):
        if j >= 2:
            for i, prover in enumerate(provers):
                if pause == (j - 1, i):
                    return total_acc, total_rej, state
                state = apply_sparse_operator(_decohere_prover(prover, j - 1), state)
        state = apply_sparse_operator(verifier_operator(v, tape), state)
        acc, rej, state = _measure_state(state, v, quantum=False)
        total_acc += acc
        total_rej += rej
        if sum(a.real for a in state.values()) <= PRUNE_TOL:
            state = {}
            break
    return total_acc, total_rej, state


class _Forced:
    """A strategy with some (step, received, tape) replies pinned down.

    Pinned points answer deterministically with the base strategy's tape
    update for that reply; everywhere else the base acts unchanged. The
    pinning dict is shared and read live, so choices accumulate in place.
    """
    kind = "forced"

    def __init__(self, base, fixed: dict):
        self.base = base
        self.fixed = fixed
        name = getattr(base, "label", None) or getattr(base, "kind", "strategy")
        self.label = name + "+forced"

    def apply_quantum(self, step, comm, tape):
        moves = self.base.apply_quantum(step, comm, tape)
        reply = self.fixed.get((step, comm, tape))
        if reply is None:
            return moves
        group = [(target, amp) for target, amp in moves if target[0] == reply]
        mass = sum((a * a.conjugate()).real for _, a in group)
        if mass <= 1e-24:
            raise Unbounded(f"forced reply {reply!r} has no amplitude at step {step}")
        scale = mass ** -0.5
        return [(target, amp * scale) for target, amp in group]


@dataclass
class DerandomizeReport:
    quantum_p_accept: float
    quantum_p_reject: float
    derandomized_p_accept: float
    derandomized_p_reject: float
    decisions: int

    @property
    def dominated(self) -> bool:
        return self.derandomized_p_reject <= self.quantum_p_reject + 1e-9


def derandomize_provers(
    p: ProtocolSpec,
    x: str,
    strategies,
    cutoff: int | None = None,
    limit: int | None = None,
) -> tuple[tuple[DerandomizedStrategy, ...], DerandomizeReport]:
    """Deterministic provers that reject no more often than the quantum ones.

    Decisions are replaced one at a time in execution order (step, then
    prover index). At each reachable (step, received symbol, tape) the reply
    minimizing the whole tree's rejection mass is pinned; ties go to the
    alphabetically first reply. Each replacement is a choice among branches
    of the current value's convex decomposition, so the rejection mass never
    increases, and the final strategies are plain reply tables.
    """
    if p.verifier.is_quantum():
        raise ValidationError("derandomization targets a probabilistic verifier")
    if len(strategies) != p.k:
        raise ValidationError(f"need {p.k} strategies, got {len(strategies)}")
    T = cutoff if cutoff is not None else p.cutoff
    cap = limit if limit is not None else family_limit()

    fixed: list[dict] = [{} for _ in range(p.k)]
    wrapped = [_Forced(s, fixed[i]) for i, s in enumerate(strategies)]
    provers = _strategic_provers(p, wrapped, T)

    q_acc, q_rej, _ = _decohered_run(p, x, provers, T)

    decisions = 0
    for step in range(1, T):
        for i in range(p.k):
            paused = _decohered_run(p, x, provers, T, pause=(step, i))
            state = paused[2]
            seen: dict[tuple, None] = {}
            for config in state:
                seen.setdefault((config.comm[i], config.tapes[i]), None)
            for sigma, y in seen:
                key = (step, sigma, y)
                moves = strategies[i].apply_quantum(step, sigma, y)
                candidates = sorted({reply for (reply, _), amp in moves if abs(amp) > 1e-12})
                decisions += 1
                if decisions > cap:
                    raise Unbounded(f"more than {cap} derandomization decisions")
                if len(candidates) == 1:
                    fixed[i][key] = candidates[0]
                    continue
                best: tuple[float, str] | None = None
                for tau in candidates:
                    fixed[i][key] = tau
                    _, rej, _ = _decohered_run(p, x, provers, T)
                    if best is None or rej < best[0] - TIE_TOL:
                        best = (rej, tau)
                fixed[i][key] = best[1]

    out = tuple(DerandomizedStrategy(choices=dict(fixed[i])) for i in range(p.k))
    det_provers = _strategic_provers(p, out, T)
    d_acc, d_rej, _ = _decohered_run(p, x, det_provers, T)
    report = DerandomizeReport(
        quantum_p_accept=q_acc,
        quantum_p_reject=q_rej,
        derandomized_p_accept=d_acc,
        derandomized_p_reject=d_rej,
        decisions=decisions,
    )
    return out, report
