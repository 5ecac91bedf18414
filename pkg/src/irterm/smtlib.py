"""Client for an external SMT-LIB v2 solver process.

The solver is spawned lazily from a configurable executable path and kept
alive across queries; each query runs inside push/pop so the session stays
clean.  Queries carry a wall-clock timeout; on timeout or a broken pipe the
process is killed and respawned on the next query.  All access is
serialized by a lock, so one client can be shared.

Answers are mapped conservatively: anything other than a clean "sat" or
"unsat" becomes unknown, and models are only used after the caller
re-verifies them by evaluation.
"""

from __future__ import annotations

import re
import subprocess
import threading
import time
from typing import Iterable, Optional

from .logic import Formula, SymVar, formula_to_smtlib, fset_vars, smt_symbol, sorted_formulas


class SolverProcessError(Exception):
    pass


class SmtSolverClient:
    """Two-process interface to an SMT-LIB v2 solver over stdin/stdout."""

    def __init__(self, path: str, timeout_ms: int = 2000, logic: str = "QF_NIA"):
        self.path = path
        self.timeout_ms = timeout_ms
        self.logic = logic
        self._proc: Optional[subprocess.Popen] = None
        self._lock = threading.Lock()

    # -- process management

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                [self.path],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
            self._send("(set-option :print-success false)")
            self._send(f"(set-logic {self.logic})")
        return self._proc

    def close(self) -> None:
        with self._lock:
            self._kill()

    def _kill(self) -> None:
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=1)
            except Exception:
                pass
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    # -- wire I/O

    def _send(self, line: str) -> None:
        proc = self._proc
        assert proc is not None and proc.stdin is not None
        proc.stdin.write(line + "\n")
        proc.stdin.flush()

    def _read_line(self, deadline: float) -> str:
        proc = self._proc
        assert proc is not None and proc.stdout is not None
        result: list[str] = []

        def reader():
            result.append(proc.stdout.readline())

        t = threading.Thread(target=reader, daemon=True)
        t.start()
        t.join(max(deadline - time.monotonic(), 0.0))
        if t.is_alive():
            raise TimeoutError("solver query timed out")
        if not result or result[0] == "":
            raise SolverProcessError("solver closed its output")
        return result[0].strip()

    def _read_sexpr(self, deadline: float) -> str:
        buf = ""
        depth = 0
        while True:
            line = self._read_line(deadline)
            buf += line + " "
            depth = buf.count("(") - buf.count(")")
            if depth <= 0 and buf.strip():
                return buf.strip()

    # -- queries

    def check(self, phis: Iterable[Formula]) -> tuple[str, Optional[dict]]:
        """Check satisfiability of a conjunction.

        Returns ("sat", model|None) | ("unsat", None) | ("unknown", None).
        """
        phis = sorted_formulas(phis)
        variables = sorted(fset_vars(phis), key=lambda v: v.id)
        with self._lock:
            deadline = time.monotonic() + self.timeout_ms / 1000.0
            try:
                self._ensure()
                self._send("(push 1)")
                for v in variables:
                    self._send(f"(declare-const {smt_symbol(v)} Int)")
                for p in phis:
                    self._send(f"(assert {formula_to_smtlib(p)})")
                self._send("(check-sat)")
                answer = self._read_line(deadline)
                model = None
                if answer == "sat" and variables:
                    self._send("(get-value (" + " ".join(smt_symbol(v) for v in variables) + "))")
                    raw = self._read_sexpr(deadline)
                    model = _parse_values(raw, variables)
                self._send("(pop 1)")
                if answer in ("sat", "unsat"):
                    return answer, model
                return "unknown", None
            except (TimeoutError, SolverProcessError, BrokenPipeError, OSError):
                self._kill()
                return "unknown", None


_VALUE_RE = re.compile(r"\(\s*(v\d+)\s+(\(-\s*\d+\s*\)|-?\d+)\s*\)")


def _parse_values(raw: str, variables: list) -> Optional[dict]:
    by_name = {smt_symbol(v): v for v in variables}
    out: dict[SymVar, int] = {}
    for name, val in _VALUE_RE.findall(raw):
        v = by_name.get(name)
        if v is None:
            continue
        val = val.strip()
        if val.startswith("("):  # negative literal, rendered (- N)
            out[v] = -int(val[1:-1].strip().lstrip("-").strip())
        else:
            out[v] = int(val)
    if len(out) != len(variables):
        return None
    return out
