"""Machine descriptions: alphabets, track symbols, prover strategies, and specs.

A protocol couples one finite-automaton verifier with k provers that talk to
it through single-symbol communication cells. Everything here is data plus
structural checkers; the dynamics live in `engine`.

Symbols are plain strings. A "track symbol" packs an upper and a lower
string into one atomic symbol `[upper/lower]`; the all-blank pair collapses
to the plain blank so that track alphabets literally contain `#`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    AlphabetMismatch,
    MissingTransition,
    SpaceExceeded,
    ValidationError,
)

BLANK = "#"
LEFT_END = "¢"   # cent sign, marks tape cell 0
RIGHT_END = "$"       # marks tape cell n+1

QUANTUM_MODES = ("1qfa", "2qfa")
CLASSICAL_MODES = ("1pfa", "2pfa")
ONE_WAY_MODES = ("1qfa", "1pfa")
ALL_MODES = QUANTUM_MODES + CLASSICAL_MODES

ORTHO_TOL = 1e-9
CLASSICAL_ROW_TOL = 1e-9


# ---------------------------------------------------------------------------
# track symbols and encodings

def track(upper: str, lower: str) -> str:
    """One atomic two-track symbol; [#/#] collapses to the plain blank."""
    if upper == BLANK and lower == BLANK:
        return BLANK
    return f"[{upper}/{lower}]"


def track_multi(uppers: Sequence[str], lowers: Sequence[str]) -> str:
    """Track symbol whose sides are dot-joined component tuples."""
    return track(".".join(uppers), ".".join(lowers))


def parse_track(symbol: str) -> tuple[str, str] | None:
    """Split a track symbol at its top-level slash; None if not track-shaped."""
    if symbol == BLANK:
        return (BLANK, BLANK)
    if len(symbol) < 3 or symbol[0] != "[" or symbol[-1] != "]":
        return None
    depth = 0
    for i, ch in enumerate(symbol):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "/" and depth == 1:
            return (symbol[1:i], symbol[i + 1:-1])
    return None


def make_track_alphabet(upper: Sequence[str], lower: Sequence[str]) -> tuple[str, ...]:
    """All pairings in deterministic order: upper-major, then lower."""
    return tuple(track(u, l) for u in upper for l in lower)


def track_pair_strings(xs: Sequence[str], ys: Sequence[str]) -> tuple[str, ...]:
    """Pair two symbol strings position-wise, padding the shorter with blanks."""
    width = max(len(xs), len(ys))
    xs = list(xs) + [BLANK] * (width - len(xs))
    ys = list(ys) + [BLANK] * (width - len(ys))
    return tuple(track(u, l) for u, l in zip(xs, ys))


def fixed_width_binary_encoding(alphabet: Sequence[str]) -> dict[str, str]:
    """Injective fixed-width bit codes; the blank gets the all-zero string.

    Width is ceil(log2(|alphabet|)) with a floor of one bit. Symbols other
    than the blank are coded in the alphabet's own order, so the map is
    deterministic for a fixed alphabet tuple.
    """
    n = len(alphabet)
    if n == 0:
        raise ValidationError("cannot encode an empty alphabet")
    if len(set(alphabet)) != n:
        raise ValidationError("alphabet has duplicate symbols")
    width = max(1, math.ceil(math.log2(max(n, 2))))
    ordered = list(alphabet)
    if BLANK in ordered:
        ordered.remove(BLANK)
        ordered.insert(0, BLANK)
    return {sym: format(i, f"0{width}b") for i, sym in enumerate(ordered)}


def xor_symbols(encoding: Mapping[str, str], a: str, b: str) -> str:
    """Bitwise XOR of two symbols' codes, decoded back to a symbol.

    Needs the encoding to cover its full code space (alphabet size a power
    of two), otherwise the XOR can fall outside the alphabet.
    """
    code = format(int(encoding[a], 2) ^ int(encoding[b], 2), f"0{len(encoding[a])}b")
    for sym, c in encoding.items():
        if c == code:
            return sym
    raise AlphabetMismatch(
        f"xor of {a!r} and {b!r} gives unused code {code}; pad the alphabet to a power of two"
    )


def default_space_bound(cutoff: int, comm_alphabets: Iterable[Sequence[str]]) -> int:
    """Private tape cells sufficient for any strategy here: 2*T*ceil(log2(max |comm alphabet|))."""
    widest = max((len(g) for g in comm_alphabets), default=2)
    return 2 * cutoff * max(1, math.ceil(math.log2(max(widest, 2))))


# ---------------------------------------------------------------------------
# prover strategies
#
# A strategy maps (step, received symbol, private tape) to replies. Steps are
# 1-based: step j is the prover's move at round j+1. Quantum application
# returns [( (reply, new tape), amplitude ), ...] and must be a partial
# isometry on the basis states it defines; states outside the defined domain
# raise MissingTransition. Strategies that log history do it at the
# step-indexed cell, so the write target is fresh on every reachable state
# and injectivity comes for free.

Tape = tuple[str, ...]
QuantumMove = list[tuple[tuple[str, Tape], complex]]


def _write_cell(tape: Tape, idx: int, symbol: str, who: str) -> Tape:
    if idx >= len(tape):
        raise SpaceExceeded(f"{who}: tape has {len(tape)} cells, step needs cell {idx}")
    if tape[idx] != BLANK:
        raise MissingTransition(f"{who}: history cell {idx} already holds {tape[idx]!r}")
    return tape[:idx] + (symbol,) + tape[idx + 1:]


@dataclass(frozen=True)
class EraserStrategy:
    """Builtin eraser: swap the communication cell with the step-indexed tape cell.

    On any run where the cell is still blank (every reachable state) the
    reply is # and the received symbol lands on the tape, one cell per step,
    so distinct message histories stay orthogonal forever.
    """
    kind: str = "eraser"

    def apply_quantum(self, step: int, comm: str, tape: Tape) -> QuantumMove:
        idx = step - 1
        if idx >= len(tape):
            raise SpaceExceeded(f"eraser: tape has {len(tape)} cells, step {step} needs cell {idx}")
        reply = tape[idx]
        new_tape = tape[:idx] + (comm,) + tape[idx + 1:]
        return [((reply, new_tape), 1.0 + 0j)]

    def apply_classical(self, step: int, comm: str, tape: Tape) -> tuple[str, Tape]:
        ((reply, new_tape), _), = self.apply_quantum(step, comm, tape)
        return reply, new_tape


@dataclass(frozen=True)
class ClassicalTableStrategy:
    """Deterministic function table over (received symbol, work cells).

    `rows` maps (recv, work tuple) to (reply, new work tuple); cells past
    `work` are never touched. Quantum application requires the table to be
    injective (then it acts as a permutation on its domain).
    """
    work: int
    rows: Mapping[tuple[str, Tape], tuple[str, Tape]]
    kind: str = "classical-table"

    def is_injective(self) -> bool:
        return len(set(self.rows.values())) == len(self.rows)

    def injective_per_receive(self) -> bool:
        """Injectivity of the work-tape map for each fixed received symbol."""
        for recv in {k[0] for k in self.rows}:
            images = [v for k, v in self.rows.items() if k[0] == recv]
            if len(set(images)) != len(images):
                return False
        return True

    def _lookup(self, comm: str, tape: Tape) -> tuple[str, Tape]:
        key = (comm, tape[:self.work])
        if key not in self.rows:
            raise MissingTransition(f"prover table has no row for {key}")
        return self.rows[key]

    def apply_classical(self, step: int, comm: str, tape: Tape) -> tuple[str, Tape]:
        reply, new_work = self._lookup(comm, tape)
        return reply, new_work + tape[self.work:]

    def apply_quantum(self, step: int, comm: str, tape: Tape) -> QuantumMove:
        reply, new_tape = self.apply_classical(step, comm, tape)
        return [((reply, new_tape), 1.0 + 0j)]


@dataclass(frozen=True)
class ReversibleWrapStrategy:
    """A classical table made injective by logging each received symbol.

    The wrapped map additionally writes the received symbol at history cell
    hist_offset + step - 1. Replies are identical to the inner table's.
    """
    inner: ClassicalTableStrategy
    hist_offset: int
    kind: str = "reversible-table"

    def apply_quantum(self, step: int, comm: str, tape: Tape) -> QuantumMove:
        reply, new_work = self.inner._lookup(comm, tape)
        merged = new_work + tape[self.inner.work:]
        logged = _write_cell(merged, self.hist_offset + step - 1, comm, "reversible wrap")
        return [((reply, logged), 1.0 + 0j)]

    def apply_classical(self, step: int, comm: str, tape: Tape) -> tuple[str, Tape]:
        ((reply, new_tape), _), = self.apply_quantum(step, comm, tape)
        return reply, new_tape


@dataclass(frozen=True)
class TrackWrapStrategy:
    """Adapter for mask-channel protocols: unpack [symbol/mask], run the inner
    strategy on the upper track, stash the mask at the step-indexed cell, and
    reply [inner reply/#]."""
    inner: object
    mask_offset: int
    kind: str = "track-wrap"

    def apply_quantum(self, step: int, comm: str, tape: Tape) -> QuantumMove:
        parsed = parse_track(comm)
        if parsed is None:
            raise MissingTransition(f"track wrap received non-track symbol {comm!r}")
        upper, lower = parsed
        out: QuantumMove = []
        for (reply, inner_tape), amp in self.inner.apply_quantum(step, upper, tape[:self.mask_offset]):
            merged = inner_tape + tape[self.mask_offset:]
            logged = _write_cell(merged, self.mask_offset + step - 1, lower, "track wrap")
            out.append(((track(reply, BLANK), logged), amp))
        return out

    def apply_classical(self, step: int, comm: str, tape: Tape) -> tuple[str, Tape]:
        moves = self.apply_quantum(step, comm, tape)
        if len(moves) != 1:
            raise ValidationError("track wrap over a branching strategy has no classical form")
        (reply, new_tape), _ = moves[0]
        return reply, new_tape


@dataclass(frozen=True)
class UnitaryTableStrategy:
    """Explicit per-step quantum tables over (received symbol, work cells).

    `steps` maps a step index (or None for any step) to a column table
    {(recv, work): [((reply, new work), amplitude), ...]}.
    """
    work: int
    steps: Mapping[int | None, Mapping[tuple[str, Tape], QuantumMove]]
    kind: str = "unitary-table"

    def apply_quantum(self, step: int, comm: str, tape: Tape) -> QuantumMove:
        table = self.steps.get(step, self.steps.get(None))
        if table is None:
            raise MissingTransition(f"unitary table has no step {step}")
        key = (comm, tape[:self.work])
        if key not in table:
            raise MissingTransition(f"unitary table step {step} has no column for {key}")
        return [((reply, work + tape[self.work:]), amp) for (reply, work), amp in table[key]]

    def apply_classical(self, step: int, comm: str, tape: Tape) -> tuple[str, Tape]:
        moves = self.apply_quantum(step, comm, tape)
        if len(moves) != 1 or abs(moves[0][1] - 1) > 1e-12:
            raise ValidationError("unitary table is not deterministic; no classical form")
        (reply, new_tape), _ = moves[0]
        return reply, new_tape


@dataclass(frozen=True)
class LoggedReplyStrategy:
    """Reply as a function of (step, received symbol), logging the received
    symbol at the step-indexed cell. Any reply function yields a valid partial
    isometry because the log keeps distinct inputs distinct. Used heavily by
    adversary families (constants, echoes, mask probes, rotations)."""
    label: str
    fn: Callable[[int, str], list[tuple[str, complex]]] = field(compare=False)
    kind: str = "logged-reply"

    def apply_quantum(self, step: int, comm: str, tape: Tape) -> QuantumMove:
        logged = _write_cell(tape, step - 1, comm, f"strategy {self.label}")
        return [((reply, logged), amp) for reply, amp in self.fn(step, comm)]

    def apply_classical(self, step: int, comm: str, tape: Tape) -> tuple[str, Tape]:
        moves = self.apply_quantum(step, comm, tape)
        if len(moves) != 1:
            raise ValidationError(f"strategy {self.label} branches; no classical form")
        (reply, new_tape), _ = moves[0]
        return reply, new_tape


def constant_reply(symbol: str) -> LoggedReplyStrategy:
    return LoggedReplyStrategy(f"const:{symbol}", lambda step, recv: [(symbol, 1.0 + 0j)])


def echo_reply() -> LoggedReplyStrategy:
    return LoggedReplyStrategy("echo", lambda step, recv: [(recv, 1.0 + 0j)])


def rotation_reply(a: str, b: str, sign: int = 1) -> LoggedReplyStrategy:
    """Equal-weight two-symbol superposition (|a> +/- |b>)/sqrt(2)."""
    h = 1 / math.sqrt(2)
    amp_b = h if sign >= 0 else -h
    return LoggedReplyStrategy(
        f"rot:{a}{'+' if sign >= 0 else '-'}{b}",
        lambda step, recv: [(a, complex(h)), (b, complex(amp_b))],
    )


@dataclass(frozen=True)
class DerandomizedStrategy:
    """Deterministic replies chosen per (step, received symbol, tape), with the
    same step-indexed logging as the quantum strategies it was distilled from."""
    choices: Mapping[tuple[int, str, Tape], str]
    kind: str = "derandomized"

    def apply_classical(self, step: int, comm: str, tape: Tape) -> tuple[str, Tape]:
        key = (step, comm, tape)
        if key not in self.choices:
            raise MissingTransition(f"derandomized strategy has no choice for {key}")
        logged = _write_cell(tape, step - 1, comm, "derandomized strategy")
        return self.choices[key], logged

    def apply_quantum(self, step: int, comm: str, tape: Tape) -> QuantumMove:
        reply, new_tape = self.apply_classical(step, comm, tape)
        return [((reply, new_tape), 1.0 + 0j)]


# ---------------------------------------------------------------------------
# fallback guards: rule-backed verifier rows evaluated lazily
#
# Transform outputs would need millions of explicit rows to cover every
# symbol a cheating prover could send. A guard covers the ill-formed
# receptions with one declaration: echo the received tuple back and move to
# a fresh rejecting state indexed by (state, input symbol), which keeps the
# induced columns injective and orthogonal to every explicit row.

def guard_state(prefix: str, q: str, sigma: str) -> str:
    return f"{prefix}[{q}|{sigma}]"


@dataclass(frozen=True)
class TrackGuard:
    """Rejects any reception that is not [sigma/#] with sigma in the slot's base set."""
    slot_bases: tuple[tuple[str, ...], ...]
    known_states: frozenset[str]
    prefix: str = "rejt"
    kind: str = "track-guard"

    def matches(self, comm: tuple[str, ...]) -> bool:
        for base, sym in zip(self.slot_bases, comm):
            parsed = parse_track(sym)
            if parsed is None or parsed[1] != BLANK or parsed[0] not in base:
                return True
        return False

    def emit(self, q: str, sigma: str, comm: tuple[str, ...]):
        name = guard_state(self.prefix, q, sigma)
        if name not in self.known_states:
            raise MissingTransition(f"guard has no reject state for ({q!r}, {sigma!r})")
        return ((name, 1, comm, 1.0 + 0j),)


@dataclass(frozen=True)
class ForeignGuard:
    """Rejects any reception with a symbol outside its slot's original alphabet."""
    slot_bases: tuple[tuple[str, ...], ...]
    known_states: frozenset[str]
    prefix: str = "rejf"
    kind: str = "foreign-guard"

    def matches(self, comm: tuple[str, ...]) -> bool:
        return any(sym not in base for base, sym in zip(self.slot_bases, comm))

    def emit(self, q: str, sigma: str, comm: tuple[str, ...]):
        name = guard_state(self.prefix, q, sigma)
        if name not in self.known_states:
            raise MissingTransition(f"guard has no reject state for ({q!r}, {sigma!r})")
        return ((name, 1, comm, 1.0 + 0j),)


# ---------------------------------------------------------------------------
# verifier / prover / protocol specs

RowKey = tuple[str, str, tuple[str, ...]]
Branch = tuple[str, int, tuple[str, ...], complex]


@dataclass(frozen=True)
class VerifierSpec:
    """Finite-automaton verifier with k communication cells.

    `rows` maps (state, input symbol, received tuple) to its branches
    (state', head move, sent tuple, weight). Missing rows are don't-care
    until a populated configuration needs one. `fallback` optionally covers
    whole families of receptions by rule.
    """
    mode: str
    states: tuple[str, ...]
    initial: str
    accept: frozenset[str]
    reject: frozenset[str]
    input_alphabet: tuple[str, ...]
    comm_alphabets: tuple[tuple[str, ...], ...]
    rows: Mapping[RowKey, tuple[Branch, ...]]
    fallback: TrackGuard | ForeignGuard | None = None

    @property
    def k(self) -> int:
        return len(self.comm_alphabets)

    def is_quantum(self) -> bool:
        return self.mode in QUANTUM_MODES

    def lookup(self, q: str, sigma: str, comm: tuple[str, ...]) -> tuple[Branch, ...]:
        row = self.rows.get((q, sigma, comm))
        if row is not None:
            return row
        if self.fallback is not None and self.fallback.matches(comm):
            return self.fallback.emit(q, sigma, comm)
        raise MissingTransition(f"verifier has no row for state {q!r}, symbol {sigma!r}, received {comm}")


@dataclass(frozen=True)
class ProverSpec:
    """One prover: its channel alphabet, private tape alphabet and size, and strategy."""
    index: int
    comm_alphabet: tuple[str, ...]
    tape_alphabet: tuple[str, ...]
    space: int
    strategy: object


@dataclass(frozen=True)
class ProtocolSpec:
    """A named protocol: verifier, provers, claimed thresholds, round cutoff."""
    name: str
    verifier: VerifierSpec
    provers: tuple[ProverSpec, ...]
    a: float
    b: float
    cutoff: int

    @property
    def k(self) -> int:
        return len(self.provers)


def validate_protocol(p: ProtocolSpec) -> None:
    """Structural validation; raises ValidationError with the first problem found."""
    v = p.verifier
    if v.mode not in ALL_MODES:
        raise ValidationError(f"unknown mode {v.mode!r}")
    if len(v.states) != len(set(v.states)):
        raise ValidationError("duplicate verifier states")
    state_set = set(v.states)
    if v.initial not in state_set:
        raise ValidationError(f"initial state {v.initial!r} not declared")
    if not v.accept <= state_set or not v.reject <= state_set:
        raise ValidationError("accept/reject sets mention undeclared states")
    if v.accept & v.reject:
        raise ValidationError("accept and reject sets overlap")
    for sym in v.input_alphabet:
        if sym in (BLANK, LEFT_END, RIGHT_END):
            raise ValidationError(f"input alphabet may not contain {sym!r}")
    if len(p.provers) != v.k:
        raise ValidationError(f"verifier has {v.k} communication cells but {len(p.provers)} provers")
    for i, prover in enumerate(p.provers):
        if prover.index != i + 1:
            raise ValidationError(f"prover {i + 1} has index {prover.index}")
        if tuple(prover.comm_alphabet) != tuple(v.comm_alphabets[i]):
            raise ValidationError(f"prover {i + 1} communication alphabet differs from the verifier's")
        if BLANK not in prover.comm_alphabet:
            raise ValidationError(f"prover {i + 1} communication alphabet lacks {BLANK!r}")
        if BLANK not in prover.tape_alphabet:
            raise ValidationError(f"prover {i + 1} tape alphabet lacks {BLANK!r}")
        if prover.space < 0:
            raise ValidationError("negative prover space")
        if v.is_quantum():
            strat = prover.strategy
            if isinstance(strat, ClassicalTableStrategy) and not strat.is_injective():
                raise ValidationError(
                    f"prover {i + 1} table is not injective; wrap it before quantum use"
                )
    if not (0 < p.a <= 1 and 0 < p.b <= 1):
        raise ValidationError("thresholds must lie in (0, 1]")
    if p.cutoff < 1:
        raise ValidationError("cutoff must be at least 1")
    _validate_rows(v)


def _validate_rows(v: VerifierSpec) -> None:
    state_set = set(v.states)
    full_input = set(v.input_alphabet) | {LEFT_END, RIGHT_END}
    for (q, sigma, comm), branches in v.rows.items():
        if q not in state_set:
            raise ValidationError(f"row source state {q!r} not declared")
        if sigma not in full_input:
            raise ValidationError(f"row input symbol {sigma!r} not declared")
        if len(comm) != v.k:
            raise ValidationError("row received tuple has wrong arity")
        for i, sym in enumerate(comm):
            if sym not in v.comm_alphabets[i]:
                raise ValidationError(f"row receives {sym!r} outside communication alphabet {i + 1}")
        for (q2, d, out, w) in branches:
            if q2 not in state_set:
                raise ValidationError(f"row target state {q2!r} not declared")
            if d not in (-1, 0, 1):
                raise ValidationError(f"head move {d} invalid")
            if v.mode in ONE_WAY_MODES and d != 1:
                raise ValidationError("one-way verifier must always move right")
            if len(out) != v.k:
                raise ValidationError("row sent tuple has wrong arity")
            for i, sym in enumerate(out):
                if sym not in v.comm_alphabets[i]:
                    raise ValidationError(f"row sends {sym!r} outside communication alphabet {i + 1}")


# ---------------------------------------------------------------------------
# well-formedness and normal-form checkers

@dataclass
class WellFormedReport:
    ok: bool
    violations: list[str]

    def __bool__(self) -> bool:
        return self.ok


def _row_vectors(v: VerifierSpec) -> dict[str, dict[RowKey, dict[tuple, complex]]]:
    """Rows grouped by input symbol, each as a sparse target vector."""
    groups: dict[str, dict[RowKey, dict[tuple, complex]]] = {}
    for key, branches in v.rows.items():
        vec: dict[tuple, complex] = {}
        for (q2, d, out, w) in branches:
            target = (q2, d, out)
            vec[target] = vec.get(target, 0j) + complex(w)
        groups.setdefault(key[1], {})[key] = vec
    return groups


def sparse_gram(vectors: Mapping[RowKey, dict[tuple, complex]]) -> dict[tuple[RowKey, RowKey], complex]:
    """All nonzero pairwise inner products, via a target-indexed inverted map.

    Pairs that share no target are orthogonal and never enumerated, which
    keeps the cost near-linear in the number of table entries.
    """
    by_target: dict[tuple, list[tuple[RowKey, complex]]] = {}
    for key, vec in vectors.items():
        for target, w in vec.items():
            by_target.setdefault(target, []).append((key, w))
    gram: dict[tuple[RowKey, RowKey], complex] = {}
    for entries in by_target.values():
        if len(entries) < 2:
            continue
        for i in range(len(entries)):
            ki, wi = entries[i]
            for j in range(i + 1, len(entries)):
                kj, wj = entries[j]
                pair = (ki, kj) if ki <= kj else (kj, ki)
                gram[pair] = gram.get(pair, 0j) + wi.conjugate() * wj
    return gram


def check_well_formed(v: VerifierSpec) -> WellFormedReport:
    """Column orthonormality (quantum) or row stochasticity (classical).

    Quantum rows are grouped by input symbol; within each group every row
    vector must have unit norm and distinct rows must be orthogonal. Guard
    rows are injective echoes into fresh states by construction, so for them
    the checker only verifies that no explicit row targets a guard state.
    """
    violations: list[str] = []
    if v.is_quantum():
        for sigma, vectors in _row_vectors(v).items():
            for key, vec in vectors.items():
                norm = sum((w * w.conjugate()).real for w in vec.values())
                if abs(norm - 1.0) > ORTHO_TOL:
                    violations.append(f"row {key} has squared norm {norm:.12g}")
            for (ka, kb), ip in sparse_gram(vectors).items():
                if abs(ip) > ORTHO_TOL:
                    violations.append(f"rows {ka} and {kb} have inner product {abs(ip):.12g}")
    else:
        for key, branches in v.rows.items():
            total = 0.0
            for (_, _, _, w) in branches:
                wc = complex(w)
                if abs(wc.imag) > CLASSICAL_ROW_TOL or wc.real < -CLASSICAL_ROW_TOL:
                    violations.append(f"row {key} has non-probabilistic weight {w}")
                total += wc.real
            if abs(total - 1.0) > CLASSICAL_ROW_TOL:
                violations.append(f"row {key} weights sum to {total:.12g}")
    if v.fallback is not None:
        guard_targets = v.fallback.known_states
        for key, branches in v.rows.items():
            for (q2, _, _, _) in branches:
                if q2 in guard_targets:
                    violations.append(f"row {key} targets guard state {q2!r}")
        if not guard_targets <= v.reject:
            violations.append("guard states must all be rejecting")
    return WellFormedReport(not violations, violations)


def restrictive_violations(v: VerifierSpec) -> list[str]:
    """Rows that break the two-branch discipline (at most 2 branches, unit mass)."""
    if not v.is_quantum():
        raise ValidationError("restrictive form only applies to quantum verifiers")
    out = []
    for key, branches in v.rows.items():
        if not 1 <= len(branches) <= 2:
            out.append(f"row {key} has {len(branches)} branches")
            continue
        mass = sum(abs(complex(w)) ** 2 for (_, _, _, w) in branches)
        if abs(mass - 1.0) > ORTHO_TOL:
            out.append(f"row {key} branch mass is {mass:.12g}")
    return out


def check_restrictive(v: VerifierSpec) -> bool:
    """True iff every row superposes at most two branches with unit total mass."""
    return not restrictive_violations(v)


def fair_coin_violations(v: VerifierSpec) -> list[str]:
    """Rows outside fair-coin normal form: 1 outcome at weight 1, or 2 at 1/2 each."""
    if v.is_quantum():
        raise ValidationError("fair-coin form only applies to classical verifiers")
    out = []
    for key, branches in v.rows.items():
        weights = sorted(complex(w).real for (_, _, _, w) in branches)
        if len(branches) == 1 and abs(weights[0] - 1.0) <= CLASSICAL_ROW_TOL:
            continue
        if (
            len(branches) == 2
            and abs(weights[0] - 0.5) <= CLASSICAL_ROW_TOL
            and abs(weights[1] - 0.5) <= CLASSICAL_ROW_TOL
        ):
            continue
        out.append(f"row {key} is not a fair coin: weights {weights}")
    return out


def check_prover_columns(
    prover: ProverSpec,
    step: int,
    tapes: Iterable[Tape],
    tol: float = ORTHO_TOL,
) -> WellFormedReport:
    """Enumerate a strategy's columns over given tapes and check orthonormality.

    Basis states outside the strategy's defined domain (MissingTransition)
    are skipped; the check covers the partial isometry the engine actually
    uses. Intended for tests and validation at small tape sizes.
    """
    vectors: dict[RowKey, dict[tuple, complex]] = {}
    for tape in tapes:
        for comm in prover.comm_alphabet:
            try:
                moves = prover.strategy.apply_quantum(step, comm, tape)
            except MissingTransition:
                continue
            vec: dict[tuple, complex] = {}
            for (reply, new_tape), amp in moves:
                vec[(reply, new_tape)] = vec.get((reply, new_tape), 0j) + complex(amp)
            vectors[(comm, tape)] = vec  # type: ignore[index]
    violations = []
    for key, vec in vectors.items():
        norm = sum((w * w.conjugate()).real for w in vec.values())
        if abs(norm - 1.0) > tol:
            violations.append(f"column {key} has squared norm {norm:.12g}")
    for (ka, kb), ip in sparse_gram(vectors).items():
        if abs(ip) > tol:
            violations.append(f"columns {ka} and {kb} have inner product {abs(ip):.12g}")
    return WellFormedReport(not violations, violations)
