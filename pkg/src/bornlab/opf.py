"""Operational preparation functions in operator form.

An OPF is a map from rays to [0, 1]. Here it is carried by an operator
``0 <= F <= I`` with ``f(psi) = <psi|F|psi>``, which is the form the
composition axioms end up forcing. Convex mixing is the convex combination
of operators, and the star product of two OPFs is the Kronecker product of
their operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import tolerances
from .errors import DimensionError, InvariantError
from .linalg import Ray, decode_matrix, encode_matrix
from .sampling import SeededRng, random_effect

__all__ = [
    "OPF",
    "opf_eval",
    "convex_mix",
    "star_product",
    "identity_opf",
    "sharp_opf",
    "random_opf",
]


@dataclass(frozen=True, eq=False)
class OPF:
    operator: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.array(self.operator, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvariantError("OPF operator must be square")
        tol = tolerances()
        if np.max(np.abs(m - m.conj().T)) > tol.hermitian:
            raise InvariantError("OPF operator must be Hermitian")
        ev = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if ev[0] < -tol.psd or ev[-1] > 1 + tol.psd:
            raise InvariantError(f"OPF spectrum [{ev[0]:.3g}, {ev[-1]:.3g}] not within [0, 1]")
        m.flags.writeable = False
        object.__setattr__(self, "operator", m)

    @property
    def dim(self) -> int:
        return self.operator.shape[0]

    def __call__(self, psi: Ray) -> float:
        return opf_eval(self, psi)

    def to_json(self) -> dict:
        return {"type": "opf", "label": self.label, "dim": self.dim, "entries": encode_matrix(self.operator)}

    @classmethod
    def from_json(cls, data: dict) -> "OPF":
        f = cls(decode_matrix(data["entries"]), data.get("label", ""))
        if f.dim != data["dim"]:
            raise DimensionError("OPF 'dim' does not match its entries")
        return f


def opf_eval(f: OPF, psi: Ray) -> float:
    """``<psi|F|psi>`` clamped to [0, 1] (values within 1e-12 outside are rounding)."""
    if f.dim != psi.dim:
        raise DimensionError(f"OPF has dim {f.dim}, ray has dim {psi.dim}")
    v = psi.amplitudes
    value = float(np.real(np.vdot(v, f.operator @ v)))
    slack = tolerances().probability
    if value < -slack or value > 1 + slack:
        raise InvariantError(f"OPF value {value!r} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def convex_mix(p: float, f1: OPF, f2: OPF) -> OPF:
    if f1.dim != f2.dim:
        raise DimensionError(f"cannot mix OPFs of dims {f1.dim} and {f2.dim}")
    if not 0 <= p <= 1:
        raise ValueError("mixing weight must lie in [0, 1]")
    return OPF(p * f1.operator + (1 - p) * f2.operator, f"{p}*{f1.label}+{1 - p}*{f2.label}")


def star_product(f: OPF, g: OPF) -> OPF:
    """Uncorrelated joint preparation: operator F (x) G (row-major Kronecker)."""
    return OPF(np.kron(f.operator, g.operator), f"({f.label}*{g.label})")


def identity_opf(d: int) -> OPF:
    return OPF(np.eye(d, dtype=complex), f"I{d}")


def sharp_opf(phi: Ray, label: str = "sharp") -> OPF:
    return OPF(phi.projector(), label)


def random_opf(d: int, rng: SeededRng, label: str = "random") -> OPF:
    """Random effect operator, scaled by a uniform factor in (0, 1]."""
    e = random_effect(d, rng).entries
    scale = 1.0 - rng.generator.uniform(0.0, 1.0)
    return OPF(scale * e, label)
