"""C-convention symbol set over the drl toolchain.

Four stable entry points — ``drl_load``, ``drl_refine_batch``,
``drl_release``, ``drl_last_error`` — with integer handles, status-code
returns, caller-owned buffers and a per-thread error slot. The engine is
reached exclusively through its public surfaces: the ``drl`` executable,
the constraint text format, the compiled-artifact JSON and CSV files whose
values round-trip exactly (``repr``/``float``).

Handles stay valid until released and may be used from any thread; each
call works in its own scratch directory, so concurrent calls on one
handle are independent processes.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

_tls = threading.local()
_lock = threading.Lock()
_handles: dict[int, "_HandleState"] = {}
_next_id = 1

_OK = 0
_FAIL = -1


@dataclass(frozen=True)
class _HandleState:
    workdir: str
    artifact: str
    names: tuple[str, ...]


def _set_error(message: str) -> int:
    _tls.error = message
    return _FAIL


def drl_last_error() -> str:
    """Message of the calling thread's most recent failure ('' if none)."""
    return getattr(_tls, "error", "")


def _command() -> list[str]:
    exe = os.environ.get("DRL_BIN") or shutil.which("drl")
    if not exe:
        raise FileNotFoundError(
            "drl executable not found; install the drl package or set DRL_BIN")
    return [exe]


def drl_load(source: str, is_path: bool = False, order: str = "given",
             epsilon: str = "1e-6", seed: int = 0) -> int:
    """Compile constraint text (or adopt a compiled artifact) into a handle.

    Returns a positive handle id, or 0 on failure (see ``drl_last_error``;
    unsatisfiable inputs report the witness clause in constraint syntax).
    """
    _tls.error = ""
    workdir = tempfile.mkdtemp(prefix="drlbind-")
    try:
        artifact = Path(workdir) / "layer.json"
        if is_path:
            shutil.copyfile(source, artifact)
        else:
            rules = Path(workdir) / "rules.txt"
            rules.write_text(source, encoding="utf-8")
            proc = subprocess.run(
                _command() + ["compile", "--constraints", str(rules),
                              "--out", str(artifact), "--order", order,
                              "--epsilon", epsilon, "--seed", str(seed)],
                capture_output=True, text=True)
            if proc.returncode == 2:
                witness = ""
                for line in proc.stdout.splitlines():
                    if line.startswith("unsat witness:"):
                        witness = line.partition(":")[2].strip()
                _set_error(f"unsatisfiable constraints; witness: {witness}")
                return 0
            if proc.returncode != 0:
                _set_error(proc.stderr.strip() or "compilation failed")
                return 0
        doc = json.loads(artifact.read_text(encoding="utf-8"))
        if doc.get("verdict") != "sat":
            _set_error("artifact is marked unsatisfiable")
            return 0
        names = tuple(doc["ordering"])
    except (OSError, ValueError, KeyError) as exc:
        shutil.rmtree(workdir, ignore_errors=True)
        _set_error(str(exc))
        return 0
    state = _HandleState(workdir, str(artifact), names)
    with _lock:
        global _next_id
        handle = _next_id
        _next_id += 1
        _handles[handle] = state
    return handle


def drl_handle_names(handle: int) -> tuple[str, ...]:
    """Column order the handle's buffers must use (helper, not part of the
    stable four-symbol set)."""
    with _lock:
        state = _handles.get(handle)
    if state is None:
        _set_error(f"invalid handle {handle}")
        return ()
    return state.names


def drl_refine_batch(handle: int, data, n: int, d: int, out,
                     jacobian=None) -> int:
    """Refine ``n`` rows of ``d`` columns from ``data`` into ``out``.

    ``data``/``out`` expose the buffer protocol over row-major float64 of
    length ``n*d`` (``jacobian``, when given, ``n*d*d``). Returns 0 on
    success, -1 on failure. Output is numerically identical to running the
    refine command on the same rows.
    """
    _tls.error = ""
    with _lock:
        state = _handles.get(handle)
    if state is None:
        return _set_error(f"invalid handle {handle}")
    try:
        src = memoryview(data).cast("B").cast("d")
        dst = memoryview(out).cast("B").cast("d")
        jac = (memoryview(jacobian).cast("B").cast("d")
               if jacobian is not None else None)
    except TypeError as exc:
        return _set_error(f"buffers must be contiguous float64: {exc}")
    if len(state.names) != d:
        return _set_error(
            f"handle expects {len(state.names)} columns, got {d}")
    if len(src) != n * d or len(dst) != n * d:
        return _set_error(
            f"buffer length mismatch: expected {n * d} float64 values")
    if jac is not None and len(jac) != n * d * d:
        return _set_error(
            f"jacobian buffer length mismatch: expected {n * d * d}")

    bad_rows = sorted({i // d for i, v in enumerate(src)
                       if not math.isfinite(v)})
    if bad_rows:
        return _set_error(f"non-finite values in rows {bad_rows}")

    try:
        with tempfile.TemporaryDirectory(dir=state.workdir) as scratch:
            in_csv = Path(scratch) / "in.csv"
            out_csv = Path(scratch) / "out.csv"
            jac_json = Path(scratch) / "jac.json"
            with open(in_csv, "w", encoding="utf-8", newline="") as fh:
                fh.write(",".join(state.names) + "\r\n")
                for r in range(n):
                    row = (repr(src[r * d + c]) for c in range(d))
                    fh.write(",".join(row) + "\r\n")
            argv = _command() + ["refine", "--compiled", state.artifact,
                                 "--data", str(in_csv), "--out", str(out_csv)]
            if jac is not None:
                argv += ["--jacobian", str(jac_json)]
            proc = subprocess.run(argv, capture_output=True, text=True)
            if proc.returncode == 3:
                return _set_error("numeric failure: "
                                  + proc.stderr.strip())
            if proc.returncode != 0:
                return _set_error(proc.stderr.strip() or "refinement failed")
            lines = out_csv.read_text(encoding="utf-8").splitlines()
            header = lines[0].split(",")
            if tuple(header) != state.names:
                return _set_error("refine output columns changed order")
            if len(lines) != n + 1:
                return _set_error(
                    f"expected {n} output rows, got {len(lines) - 1}")
            for r, line in enumerate(lines[1:]):
                cells = line.split(",")
                for c in range(d):
                    dst[r * d + c] = float(cells[c])
            if jac is not None:
                doc = json.loads(jac_json.read_text(encoding="utf-8"))
                flat = [v for row_jac in doc["jacobians"]
                        for row in row_jac for v in row]
                for i, v in enumerate(flat):
                    jac[i] = v
    except (OSError, ValueError, IndexError) as exc:
        return _set_error(str(exc))
    return _OK


def drl_release(handle: int) -> int:
    """Invalidate a handle and remove its working directory."""
    _tls.error = ""
    with _lock:
        state = _handles.pop(handle, None)
    if state is None:
        return _set_error(f"invalid handle {handle}")
    shutil.rmtree(state.workdir, ignore_errors=True)
    return _OK
