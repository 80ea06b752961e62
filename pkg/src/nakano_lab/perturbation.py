"""Tiny grammar for weight perturbations.

A perturbation is a sum of terms, each one of::

    c*Re(z1^p)   c*Im(z2^p)   c*|z1|^(2p)   c*log(1+|z2|^2)

``z`` is shorthand for ``z1``. The coefficient and ``*`` are optional, and
``^p`` may be dropped when ``p = 1``. Anything else is rejected; there is
no general expression parser here on purpose.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class PerturbationSyntaxError(ValueError):
    pass


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_VAR = r"z([12]?)"
_TERM = re.compile(
    rf"""^(?P<coef>{_NUM})?\s*\*?\s*(?:
        (?P<part>Re|Im)\(\s*{_VAR}\s*(?:\^\s*(?P<pow>\d+))?\s*\)
      | \|\s*z(?P<avar>[12]?)\s*\|\s*\^\s*(?P<apow>\d+)
      | log\(\s*1\s*\+\s*\|\s*z(?P<lvar>[12]?)\s*\|\s*\^\s*2\s*\)
    )$""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Term:
    kind: str  # "re", "im", "abs", "log"
    coef: float
    coord: int  # zero-based
    power: int = 1

    def __call__(self, z: np.ndarray) -> float:
        w = complex(z[self.coord])
        if self.kind == "re":
            return self.coef * (w**self.power).real
        if self.kind == "im":
            return self.coef * (w**self.power).imag
        if self.kind == "abs":
            return self.coef * abs(w) ** (2 * self.power)
        return self.coef * np.log1p(abs(w) ** 2)


@dataclass(frozen=True)
class Perturbation:
    terms: tuple[Term, ...]
    source: str = ""

    def __call__(self, z) -> float:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return float(sum(t(z) for t in self.terms))

    @property
    def arity(self) -> int:
        return 1 + max((t.coord for t in self.terms), default=0)


def _split_terms(text: str) -> list[tuple[int, str]]:
    out = []
    sign = 1
    buf = ""
    depth = 0
    bars = 0
    prev = ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "|":
            bars ^= 1
        top = depth == 0 and bars == 0
        exp_sign = prev in "eE" and buf.rstrip()[-2:-1].isdigit()
        if ch in "+-" and top and not exp_sign:
            if buf.strip():
                out.append((sign, buf.strip()))
            sign = -1 if ch == "-" else 1
            buf = ""
        else:
            buf += ch
        if not ch.isspace():
            prev = ch
    if buf.strip():
        out.append((sign, buf.strip()))
    return out


def parse_perturbation(text: str | None) -> Perturbation | None:
    """Parse a perturbation string; ``None``/empty means no perturbation."""
    if text is None or not str(text).strip():
        return None
    terms = []
    for sign, chunk in _split_terms(str(text)):
        m = _TERM.match(chunk)
        if m is None:
            raise PerturbationSyntaxError(f"cannot parse perturbation term {chunk!r}")
        coef = sign * float(m.group("coef") or 1.0)
        if m.group("part"):
            var = m.group(3)
            kind = m.group("part").lower()
            terms.append(Term(kind, coef, int(var or 1) - 1, int(m.group("pow") or 1)))
        elif m.group("apow"):
            p = int(m.group("apow"))
            if p % 2 or p == 0:
                raise PerturbationSyntaxError(f"|z|^n needs a positive even n: {chunk!r}")
            terms.append(Term("abs", coef, int(m.group("avar") or 1) - 1, p // 2))
        else:
            terms.append(Term("log", coef, int(m.group("lvar") or 1) - 1))
    return Perturbation(tuple(terms), str(text))
