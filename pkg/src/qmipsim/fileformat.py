"""Plain-text protocol files.

Line-based, strict: unknown keys, malformed lines, and inconsistent counts
all raise SpecFileError with the offending line number. Comments start with
';' (never '#', which is the blank symbol). Weights use exact tokens where
one exists (1, -1, 3/4, 1/sqrt2, ...) and full-precision decimals otherwise,
chosen so that serialize-then-parse reproduces the object bit for bit.

    qmip 1
    name = coinflip
    mode = 1pfa
    provers = 1
    a = 1/2
    b = 1/2
    cutoff = 2

    [verifier]
    states = q0 acc rej
    ...
    rule = q0 ¢ # -> 1/2 acc +1 # , 1/2 rej +1 #

    [prover 1]
    comm = #
    tape = #
    space = 0
    strategy = table
    work = 0
    row = # -> #
"""
from __future__ import annotations

import re
from fractions import Fraction
from math import sqrt

from .errors import SpecFileError
from .specs import (
    ClassicalTableStrategy,
    DerandomizedStrategy,
    EraserStrategy,
    ForeignGuard,
    ProtocolSpec,
    ProverSpec,
    ReversibleWrapStrategy,
    TrackGuard,
    TrackWrapStrategy,
    UnitaryTableStrategy,
    VerifierSpec,
    guard_state,
)

FORMAT_HEADER = "qmip 1"

_INT_RE = re.compile(r"^[+-]?\d+$")
_FRAC_RE = re.compile(r"^[+-]?\d+/\d+$")
_SQRT_RE = re.compile(r"^([+-]?)1/sqrt(\d+)$")


def parse_weight(token: str, where: str = "") -> complex:
    if _INT_RE.match(token):
        return complex(int(token))
    if _FRAC_RE.match(token):
        num, den = token.split("/")
        if int(den) == 0:
            raise SpecFileError(f"{where}zero denominator in weight {token!r}")
        return complex(int(num) / int(den))
    m = _SQRT_RE.match(token)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        n = int(m.group(2))
        if n == 0:
            raise SpecFileError(f"{where}zero under the root in weight {token!r}")
        return complex(sign / sqrt(n))
    try:
        return complex(float(token))
    except ValueError:
        raise SpecFileError(f"{where}bad weight token {token!r}")


def serialize_weight(w: complex) -> str:
    w = complex(w)
    if w.imag != 0.0:
        raise SpecFileError(f"cannot serialize complex weight {w!r}")
    value = w.real
    frac = Fraction(value).limit_denominator(64)
    if float(frac) == value:
        token = str(frac.numerator) if frac.denominator == 1 else f"{frac.numerator}/{frac.denominator}"
        if parse_weight(token) == w:
            return token
    if value != 0.0:
        n = round(1.0 / (value * value))
        if 1 <= n <= 65536:
            token = ("-" if value < 0 else "") + f"1/sqrt{n}"
            if parse_weight(token) == w:
                return token
    return repr(value)


def _check_token(token: str, what: str) -> str:
    if not token or token.split() != [token]:
        raise SpecFileError(f"{what} {token!r} contains whitespace or is empty")
    if token in ("|", "->", ","):
        raise SpecFileError(f"{what} {token!r} collides with file syntax")
    return token


# ---------------------------------------------------------------------------
# parsing

class _Lines:
    """Sectioned key/value lines with positions, strictly validated later."""

    def __init__(self, text: str):
        self.header_seen = False
        self.top: list[tuple[int, str, str]] = []
        self.sections: list[tuple[int, str, list[tuple[int, str, str]]]] = []
        current = self.top
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith(";"):
                continue
            if not self.header_seen:
                if line != FORMAT_HEADER:
                    raise SpecFileError(f"line {lineno}: expected {FORMAT_HEADER!r}, got {line!r}")
                self.header_seen = True
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip()
                current = []
                self.sections.append((lineno, name, current))
                continue
            if "=" not in line:
                raise SpecFileError(f"line {lineno}: expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            current.append((lineno, key.strip(), value.strip()))
        if not self.header_seen:
            raise SpecFileError(f"empty file; expected {FORMAT_HEADER!r}")


class _Section:
    def __init__(self, label: str, entries: list[tuple[int, str, str]]):
        self.label = label
        self.entries = entries
        self.used: set[int] = set()

    def one(self, key: str, required: bool = True) -> str | None:
        hits = [(lineno, v) for lineno, k, v in self.entries if k == key]
        if len(hits) > 1:
            raise SpecFileError(f"line {hits[1][0]}: duplicate key {key!r} in {self.label}")
        if not hits:
            if required:
                raise SpecFileError(f"{self.label} is missing key {key!r}")
            return None
        self.used.add(hits[0][0])
        return hits[0][1]

    def many(self, key: str) -> list[tuple[int, str]]:
        hits = [(lineno, v) for lineno, k, v in self.entries if k == key]
        for lineno, _ in hits:
            self.used.add(lineno)
        return hits

    def check_no_strays(self) -> None:
        for lineno, key, _ in self.entries:
            if lineno not in self.used:
                raise SpecFileError(f"line {lineno}: unknown key {key!r} in {self.label}")


def _tokens(value: str) -> tuple[str, ...]:
    return tuple(value.split())


def _parse_int(value: str, where: str) -> int:
    if not _INT_RE.match(value):
        raise SpecFileError(f"{where}: expected an integer, got {value!r}")
    return int(value)


def _parse_rule(lineno: int, value: str, k: int):
    parts = value.split(" -> ")
    if len(parts) != 2:
        raise SpecFileError(f"line {lineno}: rule needs exactly one ' -> '")
    left = parts[0].split()
    if len(left) != 2 + k:
        raise SpecFileError(f"line {lineno}: rule head needs state, symbol, and {k} received symbols")
    key = (left[0], left[1], tuple(left[2:]))
    branches = []
    for chunk in parts[1].split(" , "):
        toks = chunk.split()
        if len(toks) != 3 + k:
            raise SpecFileError(f"line {lineno}: branch needs weight, state, move, and {k} sent symbols")
        w = parse_weight(toks[0], f"line {lineno}: ")
        if toks[2] not in ("+1", "-1", "0"):
            raise SpecFileError(f"line {lineno}: bad head move {toks[2]!r}")
        branches.append((toks[1], int(toks[2]), tuple(toks[3:]), w))
    return key, tuple(branches)


def _split_side(lineno: int, side: str, what: str) -> tuple[str, tuple[str, ...]]:
    chunks = side.split(" | ")
    if len(chunks) == 1:
        toks = chunks[0].split()
        if len(toks) != 1:
            raise SpecFileError(f"line {lineno}: {what} needs 'symbol' or 'symbol | cells'")
        return toks[0], ()
    if len(chunks) != 2:
        raise SpecFileError(f"line {lineno}: {what} has too many '|'")
    head = chunks[0].split()
    if len(head) != 1:
        raise SpecFileError(f"line {lineno}: {what} needs one symbol before '|'")
    return head[0], tuple(chunks[1].split())


def _parse_strategy(sec: _Section, space: int):
    kind = sec.one("strategy")
    if kind == "eraser":
        strategy: object = EraserStrategy()
    elif kind == "table":
        work = _parse_int(sec.one("work"), sec.label)
        rows = {}
        for lineno, value in sec.many("row"):
            parts = value.split(" -> ")
            if len(parts) != 2:
                raise SpecFileError(f"line {lineno}: row needs exactly one ' -> '")
            recv, cells = _split_side(lineno, parts[0], "row source")
            reply, new_cells = _split_side(lineno, parts[1], "row target")
            if len(cells) != work or len(new_cells) != work:
                raise SpecFileError(f"line {lineno}: row work cells must have length {work}")
            key = (recv, cells)
            if key in rows:
                raise SpecFileError(f"line {lineno}: duplicate row for {key}")
            rows[key] = (reply, new_cells)
        strategy = ClassicalTableStrategy(work=work, rows=rows)
    elif kind == "unitary":
        work = _parse_int(sec.one("work"), sec.label)
        steps: dict[int | None, dict] = {}
        for lineno, value in sec.many("urow"):
            parts = value.split(" -> ")
            if len(parts) != 2:
                raise SpecFileError(f"line {lineno}: urow needs exactly one ' -> '")
            head = parts[0].split(" | ")
            head_toks = head[0].split()
            if len(head_toks) != 2:
                raise SpecFileError(f"line {lineno}: urow head needs step and symbol")
            step = None if head_toks[0] == "*" else _parse_int(head_toks[0], f"line {lineno}")
            recv = head_toks[1]
            cells = tuple(head[1].split()) if len(head) == 2 else ()
            if len(cells) != work:
                raise SpecFileError(f"line {lineno}: urow work cells must have length {work}")
            moves = []
            for chunk in parts[1].split(" , "):
                amp_tok, _, rest = chunk.strip().partition(" ")
                amp = parse_weight(amp_tok, f"line {lineno}: ")
                reply, new_cells = _split_side(lineno, rest, "urow target")
                if len(new_cells) != work:
                    raise SpecFileError(f"line {lineno}: urow work cells must have length {work}")
                moves.append(((reply, new_cells), amp))
            table = steps.setdefault(step, {})
            if (recv, cells) in table:
                raise SpecFileError(f"line {lineno}: duplicate urow for {(recv, cells)}")
            table[(recv, cells)] = moves
        strategy = UnitaryTableStrategy(work=work, steps=steps)
    elif kind == "choices":
        choices = {}
        for lineno, value in sec.many("choice"):
            parts = value.split(" -> ")
            if len(parts) != 2:
                raise SpecFileError(f"line {lineno}: choice needs exactly one ' -> '")
            head = parts[0].split(" | ")
            if len(head) != 2:
                raise SpecFileError(f"line {lineno}: choice head needs 'step symbol | tape'")
            head_toks = head[0].split()
            if len(head_toks) != 2:
                raise SpecFileError(f"line {lineno}: choice head needs step and symbol")
            step = _parse_int(head_toks[0], f"line {lineno}")
            tape = tuple(head[1].split())
            if len(tape) != space:
                raise SpecFileError(f"line {lineno}: choice tape must have length {space}")
            reply = parts[1].strip()
            if len(reply.split()) != 1:
                raise SpecFileError(f"line {lineno}: choice target must be one symbol")
            key = (step, head_toks[1], tape)
            if key in choices:
                raise SpecFileError(f"line {lineno}: duplicate choice for {key}")
            choices[key] = reply
        strategy = DerandomizedStrategy(choices=choices)
    else:
        raise SpecFileError(f"{sec.label}: unknown strategy {kind!r}")

    wrap = sec.one("wrap", required=False)
    if wrap:
        for item in wrap.split():
            name, _, offset = item.partition(":")
            if not _INT_RE.match(offset or ""):
                raise SpecFileError(f"{sec.label}: wrap item {item!r} needs name:offset")
            if name == "reversible":
                if not isinstance(strategy, ClassicalTableStrategy):
                    raise SpecFileError(f"{sec.label}: reversible wrap needs a plain table inside")
                strategy = ReversibleWrapStrategy(inner=strategy, hist_offset=int(offset))
            elif name == "masked":
                strategy = TrackWrapStrategy(inner=strategy, mask_offset=int(offset))
            else:
                raise SpecFileError(f"{sec.label}: unknown wrap {name!r}")
    return strategy


def parse_protocol(text: str) -> ProtocolSpec:
    lines = _Lines(text)
    top = _Section("header", lines.top)
    name = top.one("name")
    mode = top.one("mode")
    k = _parse_int(top.one("provers"), "header")
    a = parse_weight(top.one("a"), "threshold a: ").real
    b = parse_weight(top.one("b"), "threshold b: ").real
    cutoff = _parse_int(top.one("cutoff"), "header")
    top.check_no_strays()

    verifier_sec = None
    prover_secs: dict[int, _Section] = {}
    for lineno, secname, entries in lines.sections:
        if secname == "verifier":
            if verifier_sec is not None:
                raise SpecFileError(f"line {lineno}: duplicate [verifier] section")
            verifier_sec = _Section("[verifier]", entries)
        elif secname.startswith("prover "):
            idx_tok = secname[len("prover "):]
            idx = _parse_int(idx_tok, f"line {lineno}")
            if idx in prover_secs:
                raise SpecFileError(f"line {lineno}: duplicate [prover {idx}] section")
            prover_secs[idx] = _Section(f"[prover {idx}]", entries)
        else:
            raise SpecFileError(f"line {lineno}: unknown section [{secname}]")
    if verifier_sec is None:
        raise SpecFileError("missing [verifier] section")
    if sorted(prover_secs) != list(range(1, k + 1)):
        raise SpecFileError(f"expected prover sections 1..{k}, got {sorted(prover_secs)}")

    states = _tokens(verifier_sec.one("states"))
    initial = verifier_sec.one("initial")
    accept = frozenset(_tokens(verifier_sec.one("accept") or ""))
    reject = frozenset(_tokens(verifier_sec.one("reject") or ""))
    input_alphabet = _tokens(verifier_sec.one("input", required=False) or "")
    comm_alphabets = []
    for i in range(1, k + 1):
        comm_alphabets.append(_tokens(verifier_sec.one(f"comm-{i}")))
    rows = {}
    for lineno, value in verifier_sec.many("rule"):
        key, branches = _parse_rule(lineno, value, k)
        if key in rows:
            raise SpecFileError(f"line {lineno}: duplicate rule for {key}")
        rows[key] = branches

    fallback = None
    fb = verifier_sec.one("fallback", required=False)
    if fb:
        bases = []
        for i in range(1, k + 1):
            base = verifier_sec.one(f"guard-base-{i}")
            bases.append(_tokens(base))
        prefix = {"track-guard": "rejt", "foreign-guard": "rejf"}.get(fb)
        if prefix is None:
            raise SpecFileError(f"unknown fallback {fb!r}")
        minted = {guard_state(prefix, q, sigma) for (q, sigma, _) in rows}
        missing = minted - set(states)
        if missing:
            raise SpecFileError(f"fallback states not declared: {sorted(missing)}")
        cls = TrackGuard if fb == "track-guard" else ForeignGuard
        fallback = cls(slot_bases=tuple(bases), known_states=frozenset(minted))
    verifier_sec.check_no_strays()

    verifier = VerifierSpec(
        mode=mode,
        states=states,
        initial=initial,
        accept=accept,
        reject=reject,
        input_alphabet=input_alphabet,
        comm_alphabets=tuple(comm_alphabets),
        rows=rows,
        fallback=fallback,
    )

    provers = []
    for i in range(1, k + 1):
        sec = prover_secs[i]
        comm = _tokens(sec.one("comm"))
        tape = _tokens(sec.one("tape"))
        space = _parse_int(sec.one("space"), sec.label)
        strategy = _parse_strategy(sec, space)
        sec.check_no_strays()
        provers.append(ProverSpec(index=i, comm_alphabet=comm, tape_alphabet=tape, space=space, strategy=strategy))

    return ProtocolSpec(
        name=name,
        verifier=verifier,
        provers=tuple(provers),
        a=a,
        b=b,
        cutoff=cutoff,
    )


# ---------------------------------------------------------------------------
# serialization

def _strategy_lines(strategy, space: int) -> list[str]:
    wraps = []
    while True:
        if isinstance(strategy, TrackWrapStrategy):
            wraps.append(f"masked:{strategy.mask_offset}")
            strategy = strategy.inner
        elif isinstance(strategy, ReversibleWrapStrategy):
            wraps.append(f"reversible:{strategy.hist_offset}")
            strategy = strategy.inner
        else:
            break
    wraps.reverse()

    lines = []
    if isinstance(strategy, EraserStrategy):
        lines.append("strategy = eraser")
    elif isinstance(strategy, ClassicalTableStrategy):
        lines.append("strategy = table")
        lines.append(f"work = {strategy.work}")
        for (recv, cells), (reply, new_cells) in strategy.rows.items():
            left = _check_token(recv, "symbol") + (" | " + " ".join(cells) if cells else "")
            right = _check_token(reply, "symbol") + (" | " + " ".join(new_cells) if new_cells else "")
            lines.append(f"row = {left} -> {right}")
    elif isinstance(strategy, UnitaryTableStrategy):
        lines.append("strategy = unitary")
        lines.append(f"work = {strategy.work}")
        for step, table in strategy.steps.items():
            step_tok = "*" if step is None else str(step)
            for (recv, cells), moves in table.items():
                left = f"{step_tok} {_check_token(recv, 'symbol')}"
                if cells:
                    left += " | " + " ".join(cells)
                chunks = []
                for (reply, new_cells), amp in moves:
                    chunk = f"{serialize_weight(amp)} {_check_token(reply, 'symbol')}"
                    if new_cells:
                        chunk += " | " + " ".join(new_cells)
                    chunks.append(chunk)
                lines.append(f"urow = {left} -> " + " , ".join(chunks))
    elif isinstance(strategy, DerandomizedStrategy):
        lines.append("strategy = choices")
        for (step, recv, tape), reply in strategy.choices.items():
            if len(tape) != space:
                raise SpecFileError("choice tape length disagrees with prover space")
            lines.append(f"choice = {step} {_check_token(recv, 'symbol')} | {' '.join(tape)} -> {reply}")
    else:
        raise SpecFileError(f"strategy kind {getattr(strategy, 'kind', type(strategy).__name__)!r} "
                            "has no file form")
    if wraps:
        lines.append("wrap = " + " ".join(wraps))
    return lines


def serialize_protocol(p: ProtocolSpec) -> str:
    v = p.verifier
    out = [FORMAT_HEADER, f"name = {_check_token(p.name, 'name')}", f"mode = {v.mode}",
           f"provers = {p.k}", f"a = {serialize_weight(p.a)}", f"b = {serialize_weight(p.b)}",
           f"cutoff = {p.cutoff}", "", "[verifier]"]
    for s in v.states:
        _check_token(s, "state")
    out.append("states = " + " ".join(v.states))
    out.append(f"initial = {v.initial}")
    out.append("accept = " + " ".join(sorted(v.accept)))
    out.append("reject = " + " ".join(sorted(v.reject)))
    out.append("input = " + " ".join(v.input_alphabet))
    for i, alphabet in enumerate(v.comm_alphabets, start=1):
        for s in alphabet:
            _check_token(s, "symbol")
        out.append(f"comm-{i} = " + " ".join(alphabet))
    for (q, sigma, comm), branches in v.rows.items():
        chunks = []
        for (q2, d, sent, w) in branches:
            move = "+1" if d == 1 else ("-1" if d == -1 else "0")
            chunks.append(f"{serialize_weight(w)} {q2} {move} " + " ".join(sent))
        out.append(f"rule = {q} {sigma} " + " ".join(comm) + " -> " + " , ".join(chunks))
    if v.fallback is not None:
        kind = {"rejt": "track-guard", "rejf": "foreign-guard"}[v.fallback.prefix]
        out.append(f"fallback = {kind}")
        for i, base in enumerate(v.fallback.slot_bases, start=1):
            out.append(f"guard-base-{i} = " + " ".join(base))
    for prover in p.provers:
        out.append("")
        out.append(f"[prover {prover.index}]")
        out.append("comm = " + " ".join(prover.comm_alphabet))
        out.append("tape = " + " ".join(prover.tape_alphabet))
        out.append(f"space = {prover.space}")
        out.extend(_strategy_lines(prover.strategy, prover.space))
    return "\n".join(out) + "\n"


def load_protocol(path: str) -> ProtocolSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecFileError(f"cannot read {path}: {exc}")
    return parse_protocol(text)


def save_protocol(path: str, p: ProtocolSpec) -> None:
    text = serialize_protocol(p)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
