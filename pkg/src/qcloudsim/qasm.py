"""OpenQASM 2.0 circuit feature extraction: qubit count, layered depth, gate census.

The supported language is the flattened-circuit subset: the OPENQASM
header, include, qreg/creg declarations, gate applications (including
whole-register broadcast), measure, and barrier. Everything else
(user-defined gate bodies, opaque, if, reset) is rejected with a
ParseError naming the offending line.

Depth is ASAP layering: every gate occupies one layer on each qubit it
touches, and a gate's layer is one past the deepest layer already used by
any of its qubits. measure counts as a gate; barrier is a scheduling
directive and contributes neither depth nor gate count.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field


class ParseError(Exception):
    """Malformed OpenQASM input; carries the 1-based source line."""

    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnsupportedVersion(Exception):
    """OPENQASM header present but not version 2.0."""


@dataclass
class CircuitFeatures:
    """Scheduling-relevant features of one circuit.

    `name` identifies the source circuit (e.g. the originating benchmark);
    it rides along so generated tasks can carry an application tag.
    """

    qubit_count: int
    depth1_layers: int
    gate_count: int
    gate_histogram: dict[str, int] = field(default_factory=dict)
    name: str = ""


_ID = r"[A-Za-z_][A-Za-z0-9_]*"
_REG_DECL = re.compile(rf"^(qreg|creg)\s+({_ID})\s*\[\s*(\d+)\s*\]$")
_VERSION = re.compile(r"^OPENQASM\s+([0-9.]+)$")
_INCLUDE = re.compile(r'^include\s+"[^"]*"$')
_OPERAND = re.compile(rf"^({_ID})(?:\s*\[\s*(\d+)\s*\])?$")
_GATE_HEAD = re.compile(rf"^({_ID})\s*(\(|\s|$)")

# Statement keywords that are valid OpenQASM 2.0 but outside the supported subset.
_UNSUPPORTED = {"gate", "opaque", "if", "reset"}


def _statements(source: str):
    """Yield (line_number, statement_text) with comments stripped.

    Statements end at ';' and may span lines; the reported line is where
    the statement began.
    """
    buf: list[str] = []
    start_line: int | None = None
    for line_no, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("//", 1)[0]
        for ch in line:
            if ch == ";":
                text = "".join(buf).strip()
                if text:
                    yield start_line, text
                buf = []
                start_line = None
            else:
                if start_line is None and not ch.isspace():
                    start_line = line_no
                buf.append(ch)
        buf.append(" ")
    tail = "".join(buf).strip()
    if tail:
        raise ParseError(start_line or 1, f"statement missing ';': {tail[:40]!r}")


def _split_params(stmt: str, line: int) -> tuple[str, str]:
    """Remove a balanced '(...)' parameter list; returns (stmt_without_params, params)."""
    open_idx = stmt.find("(")
    if open_idx == -1:
        return stmt, ""
    depth = 0
    for i in range(open_idx, len(stmt)):
        if stmt[i] == "(":
            depth += 1
        elif stmt[i] == ")":
            depth -= 1
            if depth == 0:
                return stmt[:open_idx] + " " + stmt[i + 1:], stmt[open_idx + 1:i]
    raise ParseError(line, "unbalanced parentheses in gate parameters")


class _Extractor:
    def __init__(self) -> None:
        self.qregs: dict[str, tuple[int, int]] = {}  # name -> (offset, size)
        self.cregs: dict[str, int] = {}
        self.qubit_level: dict[int, int] = {}
        self.depth = 0
        self.gate_count = 0
        self.histogram: Counter[str] = Counter()
        self.version_seen = False

    # -- operand handling ---------------------------------------------------

    def _parse_operand(self, text: str, line: int) -> tuple[str, int | None]:
        m = _OPERAND.match(text.strip())
        if not m:
            raise ParseError(line, f"malformed operand {text.strip()!r}")
        return m.group(1), None if m.group(2) is None else int(m.group(2))

    def _qubit_index(self, reg: str, idx: int, line: int) -> int:
        offset, size = self.qregs[reg]
        if not 0 <= idx < size:
            raise ParseError(line, f"index {idx} out of range for qreg {reg}[{size}]")
        return offset + idx

    def _expand_quantum(self, operands: list[tuple[str, int | None]], line: int) -> list[list[int]]:
        """Broadcast bare registers: all bare operands must have equal size m,
        producing m gate instances; indexed operands are held fixed."""
        for reg, _ in operands:
            if reg not in self.qregs:
                if reg in self.cregs:
                    raise ParseError(line, f"classical register {reg!r} used as a gate operand")
                raise ParseError(line, f"undeclared register {reg!r}")
        bare_sizes = {self.qregs[reg][1] for reg, idx in operands if idx is None}
        if len(bare_sizes) > 1:
            raise ParseError(line, f"broadcast size mismatch: register sizes {sorted(bare_sizes)}")
        width = bare_sizes.pop() if bare_sizes else 1
        instances = []
        for k in range(width):
            qubits = [
                self._qubit_index(reg, k if idx is None else idx, line)
                for reg, idx in operands
            ]
            if len(set(qubits)) != len(qubits):
                raise ParseError(line, "duplicate qubit in one gate application")
            instances.append(qubits)
        return instances

    # -- layering -----------------------------------------------------------

    def _apply_gate(self, mnemonic: str, qubits: list[int]) -> None:
        layer = 1 + max((self.qubit_level.get(q, 0) for q in qubits), default=0)
        for q in qubits:
            self.qubit_level[q] = layer
        self.depth = max(self.depth, layer)
        self.gate_count += 1
        self.histogram[mnemonic.lower()] += 1

    # -- statements ----------------------------------------------------------

    def handle(self, line: int, stmt: str) -> None:
        m = _VERSION.match(stmt)
        if m:
            if m.group(1) not in ("2.0", "2"):
                raise UnsupportedVersion(f"OPENQASM {m.group(1)} is not supported (need 2.0)")
            self.version_seen = True
            return
        if _INCLUDE.match(stmt):
            return
        m = _REG_DECL.match(stmt)
        if m:
            kind, name, size = m.group(1), m.group(2), int(m.group(3))
            if size < 1:
                raise ParseError(line, f"register {name!r} must have size >= 1")
            if name in self.qregs or name in self.cregs:
                raise ParseError(line, f"register {name!r} already declared")
            if kind == "qreg":
                offset = sum(s for _, s in self.qregs.values())
                self.qregs[name] = (offset, size)
            else:
                self.cregs[name] = size
            return
        if stmt.startswith("barrier"):
            rest = stmt[len("barrier"):].strip()
            if rest:
                for op_text in rest.split(","):
                    reg, idx = self._parse_operand(op_text, line)
                    if reg not in self.qregs:
                        raise ParseError(line, f"undeclared register {reg!r} in barrier")
                    if idx is not None:
                        self._qubit_index(reg, idx, line)
            return
        if stmt.startswith("measure"):
            self._handle_measure(line, stmt[len("measure"):])
            return
        head = _GATE_HEAD.match(stmt)
        if not head:
            raise ParseError(line, f"unrecognized statement {stmt[:40]!r}")
        if head.group(1) in _UNSUPPORTED:
            raise ParseError(line, f"unsupported statement {head.group(1)!r}")
        self._handle_gate(line, stmt)

    def _handle_measure(self, line: int, rest: str) -> None:
        parts = rest.split("->")
        if len(parts) != 2:
            raise ParseError(line, "measure requires 'measure q -> c'")
        qreg, qidx = self._parse_operand(parts[0], line)
        creg, cidx = self._parse_operand(parts[1], line)
        if qreg not in self.qregs:
            raise ParseError(line, f"undeclared register {qreg!r} in measure")
        if creg not in self.cregs:
            raise ParseError(line, f"undeclared classical register {creg!r} in measure")
        if qidx is None:
            qsize = self.qregs[qreg][1]
            csize = self.cregs[creg] if cidx is None else 1
            if qsize != csize:
                raise ParseError(line, f"measure register size mismatch ({qsize} vs {csize})")
            for k in range(qsize):
                self._apply_gate("measure", [self._qubit_index(qreg, k, line)])
        else:
            self._apply_gate("measure", [self._qubit_index(qreg, qidx, line)])

    def _handle_gate(self, line: int, stmt: str) -> None:
        stmt, _params = _split_params(stmt, line)
        head = _GATE_HEAD.match(stmt)
        name = head.group(1)
        rest = stmt[head.end(1):].strip()
        if not rest:
            raise ParseError(line, f"gate {name!r} has no operands")
        operands = [self._parse_operand(t, line) for t in rest.split(",")]
        for qubits in self._expand_quantum(operands, line):
            self._apply_gate(name, qubits)

    def features(self, name: str) -> CircuitFeatures:
        return CircuitFeatures(
            qubit_count=sum(size for _, size in self.qregs.values()),
            depth1_layers=self.depth,
            gate_count=self.gate_count,
            gate_histogram=dict(self.histogram),
            name=name,
        )


def extract_features_qasm(source: str, name: str = "") -> CircuitFeatures:
    """Extract CircuitFeatures from OpenQASM 2.0 text.

    Raises ParseError for malformed or out-of-subset input and
    UnsupportedVersion when the OPENQASM header names another version.
    """
    extractor = _Extractor()
    for line, stmt in _statements(source):
        extractor.handle(line, stmt)
    return extractor.features(name)
