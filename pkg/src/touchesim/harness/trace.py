"""Text trace format.

    #%touchesim-trace 1
    R 1f40
    W 80 <128 hex digits>

``#`` starts a comment, blank lines are skipped. Addresses are aligned down
to 64 bytes; anything at or above bit 48 is rejected.
"""

from __future__ import annotations

from typing import IO, Iterable, Iterator, NamedTuple

TRACE_HEADER = "#%touchesim-trace 1"
ADDRESS_BITS = 48
_HEXDIGITS = frozenset("0123456789abcdefABCDEF")


class TraceError(ValueError):
    def __init__(self, source: str, line: int, col: int, msg: str):
        super().__init__(f"{source}:{line}:{col}: {msg}")
        self.source, self.line, self.col = source, line, col


class TraceEvent(NamedTuple):
    op: str
    addr: int
    data: bytes | None = None


def _hex(tok: str, source, lineno, col, what) -> int:
    if tok.lower().startswith("0x"):
        tok, col = tok[2:], col + 2
    bad = next((i for i, ch in enumerate(tok) if ch not in _HEXDIGITS), None)
    if not tok or bad is not None:
        raise TraceError(source, lineno, col + (bad or 0), f"malformed hex in {what}: {tok!r}")
    return int(tok, 16)


def parse_line(text: str, source: str = "<trace>", lineno: int = 1) -> TraceEvent | None:
    body = text.split("#", 1)[0]
    toks = []
    pos = 0
    for tok in body.split():
        pos = body.index(tok, pos)
        toks.append((tok, pos + 1))
        pos += len(tok)
    if not toks:
        return None
    (op, _), rest = toks[0], toks[1:]
    if op not in ("R", "W"):
        raise TraceError(source, lineno, 1 + body.index(op), f"unknown op {op!r} (expected R or W)")
    want = 1 if op == "R" else 2
    if len(rest) != want:
        col = rest[want][1] if len(rest) > want else len(body.rstrip()) + 1
        raise TraceError(source, lineno, col, f"{op} takes {want} operand(s), got {len(rest)}")
    atok, acol = rest[0]
    addr = _hex(atok, source, lineno, acol, "address")
    if addr >> ADDRESS_BITS:
        raise TraceError(source, lineno, acol, f"address {atok} exceeds {ADDRESS_BITS} bits")
    addr &= ~63
    if op == "R":
        return TraceEvent("R", addr)
    dtok, dcol = rest[1]
    if len(dtok) != 128:
        raise TraceError(source, lineno, dcol, f"payload must be 128 hex digits, got {len(dtok)}")
    _hex(dtok, source, lineno, dcol, "payload")
    return TraceEvent("W", addr, bytes.fromhex(dtok))


def parse_trace(stream: Iterable[str], source: str = "<trace>") -> Iterator[TraceEvent]:
    """Stream events from text lines; raises TraceError with line:col."""
    for lineno, text in enumerate(stream, 1):
        if lineno == 1 and text.startswith("#%"):
            if text.strip() != TRACE_HEADER:
                raise TraceError(source, 1, 1, f"unsupported trace header {text.strip()!r}")
            continue
        ev = parse_line(text, source, lineno)
        if ev is not None:
            yield ev


def format_event(ev: TraceEvent) -> str:
    if ev.op == "W":
        return f"W {ev.addr:x} {ev.data.hex()}"
    return f"R {ev.addr:x}"


def write_trace(events: Iterable[TraceEvent], fh: IO[str]) -> int:
    fh.write(TRACE_HEADER + "\n")
    n = 0
    for ev in events:
        fh.write(format_event(ev) + "\n")
        n += 1
    return n


def interleave(*streams: Iterable[TraceEvent]) -> Iterator[TraceEvent]:
    """Round-robin one request at a time; exhausted streams drop out."""
    its = [iter(s) for s in streams]
    while its:
        alive = []
        for it in its:
            ev = next(it, None)
            if ev is not None:
                yield ev
                alive.append(it)
        its = alive
