"""Exact exponent bootstrap for ``Delta u + h u = f u^{N-1}`` with ``h, f`` in ``L^p``.

If ``u`` is in ``L^s`` then ``Delta u`` lies in ``L^r`` with ``1/r = 1/p + 1/s``,
and the Sobolev embedding ``H_2^r`` into ``L^{nr/(n-2r)}`` improves the exponent
to

    s' = n p s / (n p + (n - 2p) s).

Starting from ``s_0 = N = 2n/(n-2)`` the exponents increase until they pass
``T = np / (2p - n)``; then ``r > n/2`` and ``u`` lies in ``H_2^p``, which
embeds in ``C^{1 - floor(n/p), beta}``. Landing exactly on ``T`` gives
``u`` in ``L^infinity`` first. All arithmetic uses :class:`fractions.Fraction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .errors import DomainError

__all__ = [
    "Terminal",
    "BootstrapTrace",
    "bootstrap_trace",
    "regularity_class",
    "embedding_oracle",
    "oracle_trace",
]

MAX_STEPS = 100_000


class Terminal(str, Enum):
    SOBOLEV = "SobolevH2p"
    LINF = "LInfinityRoute"
    DIVERGED = "Diverged"


def _rational(p) -> Fraction:
    if isinstance(p, float):
        raise DomainError("pass p as an int, a Fraction or a string such as '7/3'")
    return Fraction(p)


def _check(n: int, p: Fraction) -> None:
    if n < 3:
        raise DomainError(f"dimension must be >= 3, got {n}")
    if p <= Fraction(n, 2):
        raise DomainError(f"p must exceed n/2 = {Fraction(n, 2)}, got {p}")


def regularity_class(n: int, p) -> str:
    """Hoelder label ``C^{1 - floor(n/p), beta}`` of ``H_2^p`` for ``p > n/2``."""
    p = _rational(p)
    _check(n, p)
    return f"C^{{{1 - math.floor(Fraction(n) / p)},beta}}"


def threshold(n: int, p: Fraction) -> Fraction:
    """``np / (2p - n)``: exponents above it give ``Delta u`` in ``L^r`` with ``r > n/2``."""
    return Fraction(n) * p / (2 * p - n)


def _derived_step(n: int, p: Fraction, s: Fraction) -> Fraction:
    return n * p * s / (n * p + (n - 2 * p) * s)


def _descending_step(n: int, p: Fraction, s: Fraction) -> Fraction:
    return n * p * s / (n * p - (p - 2 * n) * s)


@dataclass
class BootstrapTrace:
    """Exponents ``s_0, s_1, ...`` and the terminal regularity.

    ``sequence`` ends with the first exponent that is at or above the
    threshold, or with the step at which the recurrence stopped increasing
    (``Diverged``).
    """

    n: int
    p: Fraction
    sequence: list
    terminal: Terminal
    embedding_class: str
    threshold: Fraction
    recurrence: str = "derived"
    sobolev_space: str = field(default="H^2_p")

    def to_dict(self) -> dict:
        pair = lambda q: [q.numerator, q.denominator]  # noqa: E731
        return {
            "n": self.n,
            "p": pair(self.p),
            "sequence": [pair(s) for s in self.sequence],
            "threshold": pair(self.threshold),
            "terminal": self.terminal.value,
            "embedding_class": self.embedding_class,
            "sobolev_space": self.sobolev_space,
            "recurrence": self.recurrence,
            "steps": len(self.sequence) - 1,
        }


def bootstrap_trace(n: int, p, descending: bool = False, max_steps: int = MAX_STEPS) -> BootstrapTrace:
    """Run the exponent recurrence from ``s_0 = 2n/(n-2)``.

    Parameters
    ----------
    n : int
        Dimension, at least 3.
    p : int, Fraction or str
        Integrability of the coefficients, ``p > n/2``.
    descending : bool
        Use ``s' = nps / (np - (p - 2n) s)`` instead of the embedding chain.
        That variant decreases for ``p < 2n`` and is kept for comparison; such
        runs end as ``Diverged``.
    max_steps : int
        Safety bound; reaching it also ends as ``Diverged``.

    Raises
    ------
    DomainError
        If ``n < 3`` or ``p <= n/2``.
    """
    p = _rational(p)
    _check(n, p)
    T = threshold(n, p)
    step = _descending_step if descending else _derived_step
    s = Fraction(2 * n, n - 2)
    seq = [s]
    label = regularity_class(n, p)
    name = "descending" if descending else "derived"
    for _ in range(max_steps):
        if s == T:
            return BootstrapTrace(n, p, seq, Terminal.LINF, label, T, name)
        if s > T:
            return BootstrapTrace(n, p, seq, Terminal.SOBOLEV, label, T, name)
        nxt = step(n, p, s)
        if nxt <= s:
            seq.append(nxt)
            return BootstrapTrace(n, p, seq, Terminal.DIVERGED, label, T, name)
        s = nxt
        seq.append(s)
    return BootstrapTrace(n, p, seq, Terminal.DIVERGED, label, T, name)


def embedding_oracle(n: int, p, s) -> tuple[Fraction, Fraction | None]:
    """One Hoelder-then-Sobolev step: ``r = ps/(p+s)`` and ``nr/(n-2r)``.

    The second entry is ``None`` when ``r >= n/2`` (no Lebesgue target).
    """
    p = Fraction(p)
    s = Fraction(s)
    r = p * s / (p + s)
    if 2 * r >= n:
        return r, None
    return r, n * r / (n - 2 * r)


def oracle_trace(n: int, p) -> tuple[list, str]:
    """Exponent chain built from :func:`embedding_oracle` alone.

    Returns the sequence and the terminal name, using the Sobolev index
    ``r`` to decide termination: ``r > n/2`` ends in ``H_2^p``, ``r = n/2``
    is the borderline case.
    """
    p = Fraction(p)
    s = Fraction(2 * n, n - 2)
    seq = [s]
    while True:
        r, nxt = embedding_oracle(n, p, s)
        if 2 * r == n:
            return seq, Terminal.LINF.value
        if nxt is None:
            return seq, Terminal.SOBOLEV.value
        s = nxt
        seq.append(s)
