"""Self-contained generators and a minimal CLI driver for binding tests.

Everything here speaks the toolchain's external formats directly
(constraint text, CSV, compiled-artifact JSON) so the tests stay
independent of the engine's internals.
"""

from __future__ import annotations

import os
import random
import shutil
import subprocess
from pathlib import Path

GOLDEN_RULES = (
    "vars: x1, x2, x3, x4, x5\n"
    "(x5 >= x1) and ((x5 > x2) -> (x5 >= x3)) and (x5 <= x4)\n"
)


def drl_command() -> list[str]:
    exe = os.environ.get("DRL_BIN") or shutil.which("drl")
    assert exe, "drl executable must be installed for binding tests"
    return [exe]


def run_cli(*argv: str) -> subprocess.CompletedProcess:
    return subprocess.run(drl_command() + list(argv),
                          capture_output=True, text=True)


def random_rules(rng: random.Random, D: int, n_constraints: int) -> str:
    """Random satisfiable constraint text with a planted integer witness."""
    names = [f"v{i}" for i in range(D)]
    witness = [rng.randint(-8, 8) for _ in range(D)]
    lines = [f"vars: {', '.join(names)}"]
    for _ in range(n_constraints):
        disjuncts = []
        values = []
        for _ in range(rng.randint(1, 3)):
            n_vars = rng.randint(1, min(2, D))
            chosen = rng.sample(range(D), n_vars)
            coeffs = {v: rng.randint(-5, 5) for v in chosen}
            coeffs = {v: w for v, w in coeffs.items() if w}
            if not coeffs:
                continue
            bias = rng.randint(-10, 10)
            disjuncts.append((coeffs, bias))
            values.append(sum(w * witness[v] for v, w in coeffs.items()) + bias)
        if not disjuncts:
            continue
        if all(v < 0 for v in values):
            j = rng.randrange(len(disjuncts))
            coeffs, bias = disjuncts[j]
            disjuncts[j] = (coeffs, bias - values[j] + rng.randint(0, 3))
        rendered = [_render(coeffs, bias) for coeffs, bias in disjuncts]
        if len(rendered) == 1:
            lines.append(rendered[0])
        else:
            lines.append(" or ".join(f"({r})" for r in rendered))
    return "\n".join(lines) + "\n"


def _render(coeffs: dict[int, int], bias: int) -> str:
    parts = []
    for v, w in sorted(coeffs.items()):
        name = f"v{v}"
        term = name if abs(w) == 1 else f"{abs(w)}*{name}"
        if not parts:
            parts.append(term if w > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if w > 0 else f"- {term}")
    if bias:
        parts.append(f"+ {bias}" if bias > 0 else f"- {abs(bias)}")
    return " ".join(parts) + " >= 0"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\r\n")


def read_csv(path: Path) -> tuple[list[str], list[list[float]]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [[float(c) for c in line.split(",")] for line in lines[1:]]
    return header, rows
