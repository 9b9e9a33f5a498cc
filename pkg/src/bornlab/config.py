"""Numerical tolerances shared by every module.

All defaults live in one record so a harness can tighten or loosen them
uniformly::

    with using_tolerances(replace(tolerances(), equality=1e-7)):
        ...
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-12
    significant: float = 1e-12
    orthonormality: float = 1e-10
    unitarity: float = 1e-10
    hermitian: float = 1e-10
    psd: float = 1e-10
    trace: float = 1e-10
    povm: float = 1e-9
    probability: float = 1e-12
    projection_input: float = 1e-8
    # harness checks
    equality: float = 1e-9
    discontinuity: float = 0.01
    tie_epsilon: float = 1e-9
    g_zero: float = 1e-12
    g_nonnegative: float = 1e-12
    zero_denominator: float = 1e-14
    opf: float = 1e-12
    conditioning: float = 1e8

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()

_current: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "bornlab_tolerances", default=DEFAULT_TOLERANCES
)


def tolerances() -> Tolerances:
    """Return the tolerance record active in this context."""
    return _current.get()


@contextlib.contextmanager
def using_tolerances(tol: Tolerances):
    token = _current.set(tol)
    try:
        yield tol
    finally:
        _current.reset(token)
