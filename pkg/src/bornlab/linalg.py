"""Rays, bases, unitaries and operators on C^d.

Conventions used throughout the package:

* inner products are linear in the first argument and conjugate-linear in
  the second, ``<a|b> = sum_k a_k * conj(b_k)``;
* a ray is stored by its canonical representative, whose first component of
  modulus above ``Tolerances.significant`` is real and nonnegative;
* Kronecker products are row-major: ``(a (x) b)[i * len(b) + j] = a[i] * b[j]``.

Every value type is immutable; the backing arrays are flagged read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import tolerances
from .errors import DegenerateProjectionError, DimensionError, InvariantError

__all__ = [
    "Ray",
    "OrthonormalBasis",
    "Unitary",
    "DensityMatrix",
    "Effect",
    "POVM",
    "canonical_phase",
    "canonical_columns",
    "inner_product",
    "overlaps",
    "tensor",
    "kron",
    "complete_basis",
    "standard_basis",
    "basis_ray",
    "project_to_density",
    "trace_distance",
    "apply",
    "encode_complex",
    "decode_complex",
    "encode_matrix",
    "decode_matrix",
]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.flags.writeable = False
    return arr


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its first significant component is real and >= 0."""
    v = np.array(v, dtype=complex)
    mags = np.abs(v)
    k = int(np.argmax(mags > tolerances().significant))
    if mags[k] <= tolerances().significant:
        return v
    c = v[k]
    v *= np.conj(c) / mags[k]
    v[k] = mags[k]
    return v


def canonical_columns(m: np.ndarray) -> np.ndarray:
    """Normalise and canonicalise every column of ``m`` at once.

    Works on stacks too: the columns are along axis -2.
    """
    m = np.array(m, dtype=complex)
    m /= np.sqrt(np.sum(m.real**2 + m.imag**2, axis=-2, keepdims=True))
    mags = np.abs(m)
    idx = np.argmax(mags > tolerances().significant, axis=-2)[..., None, :]
    lead = np.take_along_axis(mags, idx, axis=-2)
    m *= np.conj(np.take_along_axis(m, idx, axis=-2)) / lead
    np.put_along_axis(m, idx, lead, axis=-2)
    return m


@dataclass(frozen=True, eq=False)
class Ray:
    """Unit vector in C^d modulo a global phase, held in canonical form.

    The constructor only validates; use :meth:`from_vector` to normalise and
    canonicalise an arbitrary nonzero vector.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size == 0:
            raise InvariantError("ray amplitudes must be a nonempty 1-d array")
        tol = tolerances()
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > tol.norm:
            raise InvariantError(f"ray is not unit norm (|v| = {norm!r})")
        idx = np.flatnonzero(np.abs(amps) > tol.significant)
        lead = amps[idx[0]]
        if abs(lead.imag) > tol.norm or lead.real < 0:
            raise InvariantError("ray is not in canonical phase")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def _trusted(cls, amps: np.ndarray) -> "Ray":
        # skips validation; callers guarantee unit norm and canonical phase
        ray = object.__new__(cls)
        amps.flags.writeable = False
        object.__setattr__(ray, "amplitudes", amps)
        return ray

    @classmethod
    def from_vector(cls, v: Sequence[complex] | np.ndarray) -> "Ray":
        v = np.asarray(v, dtype=complex).ravel()
        norm = math.sqrt(float(np.vdot(v, v).real))
        if not math.isfinite(norm) or norm == 0.0:
            raise InvariantError("cannot normalise a zero or non-finite vector")
        return cls._trusted(canonical_phase(v / norm))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def isclose(self, other: "Ray", atol: float = 1e-12) -> bool:
        return self.dim == other.dim and bool(np.allclose(self.amplitudes, other.amplitudes, rtol=0, atol=atol))

    def to_json(self) -> dict:
        return {"type": "ray", "dim": self.dim, "amplitudes": [encode_complex(z) for z in self.amplitudes]}

    @classmethod
    def from_json(cls, data: dict) -> "Ray":
        amps = np.array([decode_complex(z) for z in data["amplitudes"]], dtype=complex)
        if amps.shape[0] != data["dim"]:
            raise DimensionError("ray 'dim' does not match its amplitudes")
        return cls(amps)

    def __repr__(self) -> str:
        return f"Ray({np.array2string(self.amplitudes, precision=6)})"


def basis_ray(d: int, k: int) -> Ray:
    """The standard basis ray e_k (0-based) in C^d."""
    v = np.zeros(d, dtype=complex)
    v[k] = 1.0
    return Ray(v)


def _check_dims(a: Ray, b: Ray) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


def inner_product(a: Ray, b: Ray) -> complex:
    """``<a|b>`` on canonical representatives, linear in ``a``."""
    _check_dims(a, b)
    return complex(np.vdot(b.amplitudes, a.amplitudes))


def tensor(a: Ray, b: Ray) -> Ray:
    return Ray.from_vector(np.kron(a.amplitudes, b.amplitudes))


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    vectors: tuple[Ray, ...]

    def __post_init__(self):
        vectors = tuple(self.vectors)
        if not vectors:
            raise InvariantError("basis must be nonempty")
        d = vectors[0].dim
        if len(vectors) != d or any(v.dim != d for v in vectors):
            raise DimensionError(f"a basis of C^{d} needs exactly {d} vectors of dim {d}")
        object.__setattr__(self, "vectors", vectors)
        m = np.column_stack([v.amplitudes for v in vectors])
        m.flags.writeable = False
        object.__setattr__(self, "_matrix", m)
        gram = m.conj().T @ m
        err = np.max(np.abs(gram - np.eye(d)))
        if err > tolerances().orthonormality:
            raise InvariantError(f"vectors are not orthonormal (max deviation {err:.3g})")

    @classmethod
    def from_matrix(cls, m: np.ndarray, check: bool = True) -> "OrthonormalBasis":
        """Basis from the columns of ``m``, each normalised and canonicalised.

        ``check=False`` skips the orthonormality test for matrices that are
        unitary by construction.
        """
        m = canonical_columns(m)
        if check:
            return cls(tuple(Ray._trusted(m[:, k].copy()) for k in range(m.shape[1])))
        return cls._trusted(m)

    @classmethod
    def _trusted(cls, m: np.ndarray) -> "OrthonormalBasis":
        # skips validation; columns must already be canonical and orthonormal
        m = np.array(m, dtype=complex)
        vectors = tuple(Ray._trusted(m[:, k].copy()) for k in range(m.shape[1]))
        basis = object.__new__(cls)
        m.flags.writeable = False
        object.__setattr__(basis, "vectors", vectors)
        object.__setattr__(basis, "_matrix", m)
        return basis

    @property
    def dim(self) -> int:
        return len(self.vectors)

    @property
    def matrix(self) -> np.ndarray:
        """Columns are the basis vectors."""
        return self._matrix

    def __len__(self) -> int:
        return len(self.vectors)

    def __getitem__(self, k: int) -> Ray:
        return self.vectors[k]

    def __iter__(self):
        return iter(self.vectors)

    def to_json(self) -> dict:
        return {
            "type": "basis",
            "dim": self.dim,
            "vectors": [[encode_complex(z) for z in v.amplitudes] for v in self.vectors],
        }

    @classmethod
    def from_json(cls, data: dict) -> "OrthonormalBasis":
        vecs = tuple(Ray(np.array([decode_complex(z) for z in v], dtype=complex)) for v in data["vectors"])
        if len(vecs) != data["dim"]:
            raise DimensionError("basis 'dim' does not match its vectors")
        return cls(vecs)


def standard_basis(d: int) -> OrthonormalBasis:
    return OrthonormalBasis(tuple(basis_ray(d, k) for k in range(d)))


def overlaps(psi: Ray, basis: OrthonormalBasis) -> np.ndarray:
    """``|<psi|Phi_i>|`` for every basis vector."""
    if psi.dim != basis.dim:
        raise DimensionError(f"dimension mismatch: {psi.dim} vs {basis.dim}")
    return np.abs(basis.matrix.conj().T @ psi.amplitudes)


class _Operator:
    """Shared plumbing for the square-matrix value types."""

    kind = "operator"
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def _validate_square(self):
        m = _frozen(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvariantError(f"{self.kind} must be a nonempty square matrix")
        object.__setattr__(self, "entries", m)
        return m

    def _validate_hermitian(self, m):
        err = np.max(np.abs(m - m.conj().T))
        if err > tolerances().hermitian:
            raise InvariantError(f"{self.kind} is not Hermitian (deviation {err:.3g})")
        return np.linalg.eigvalsh((m + m.conj().T) / 2)

    def to_json(self) -> dict:
        return {"type": self.kind, "dim": self.dim, "entries": encode_matrix(self.entries)}

    @classmethod
    def from_json(cls, data: dict):
        m = decode_matrix(data["entries"])
        if m.shape[0] != data["dim"]:
            raise DimensionError(f"{cls.kind} 'dim' does not match its entries")
        return cls(m)


@dataclass(frozen=True, eq=False)
class Unitary(_Operator):
    entries: np.ndarray
    kind = "unitary"

    def __post_init__(self):
        m = self._validate_square()
        err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if err > tolerances().unitarity:
            raise InvariantError(f"matrix is not unitary (deviation {err:.3g})")

    @property
    def dagger(self) -> "Unitary":
        return Unitary(self.entries.conj().T)


@dataclass(frozen=True, eq=False)
class DensityMatrix(_Operator):
    entries: np.ndarray
    kind = "density"

    def __post_init__(self):
        m = self._validate_square()
        tol = tolerances()
        ev = self._validate_hermitian(m)
        if ev[0] < -tol.psd:
            raise InvariantError(f"density has negative eigenvalue {ev[0]:.3g}")
        tr = np.trace(m)
        if abs(tr - 1.0) > tol.trace:
            raise InvariantError(f"density has trace {tr!r}")

    @classmethod
    def pure(cls, psi: Ray) -> "DensityMatrix":
        return cls(psi.projector())

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def expectation(self, psi: Ray) -> float:
        """``<psi|rho|psi>``."""
        v = psi.amplitudes
        return float(np.real(np.vdot(v, self.entries @ v)))

    def conjugate(self, u: Unitary) -> "DensityMatrix":
        return DensityMatrix(u.entries @ self.entries @ u.entries.conj().T)


@dataclass(frozen=True, eq=False)
class Effect(_Operator):
    entries: np.ndarray
    kind = "effect"

    def __post_init__(self):
        m = self._validate_square()
        tol = tolerances()
        ev = self._validate_hermitian(m)
        if ev[0] < -tol.psd or ev[-1] > 1 + tol.psd:
            raise InvariantError(f"effect spectrum [{ev[0]:.3g}, {ev[-1]:.3g}] not within [0, 1]")


@dataclass(frozen=True, eq=False)
class POVM:
    effects: tuple[Effect, ...]

    def __post_init__(self):
        effects = tuple(self.effects)
        if not effects:
            raise InvariantError("POVM needs at least one effect")
        d = effects[0].dim
        if any(e.dim != d for e in effects):
            raise DimensionError("POVM effects must share one dimension")
        total = sum(e.entries for e in effects)
        err = np.max(np.abs(total - np.eye(d)))
        if err > tolerances().povm:
            raise InvariantError(f"effects do not sum to the identity (deviation {err:.3g})")
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    def __len__(self) -> int:
        return len(self.effects)

    def __iter__(self):
        return iter(self.effects)

    def to_json(self) -> dict:
        return {"type": "povm", "dim": self.dim, "effects": [encode_matrix(e.entries) for e in self.effects]}

    @classmethod
    def from_json(cls, data: dict) -> "POVM":
        povm = cls(tuple(Effect(decode_matrix(e)) for e in data["effects"]))
        if povm.dim != data["dim"]:
            raise DimensionError("POVM 'dim' does not match its effects")
        return povm


def apply(u: Unitary, psi: Ray) -> Ray:
    if u.dim != psi.dim:
        raise DimensionError(f"dimension mismatch: {u.dim} vs {psi.dim}")
    return Ray.from_vector(u.entries @ psi.amplitudes)


def complete_basis(phi: Ray, rng) -> OrthonormalBasis:
    """Extend ``phi`` to an orthonormal basis with ``phi`` as element 0.

    The other vectors are Gram-Schmidt applied to the columns of a Haar
    unitary drawn from ``rng``, after ``phi``. A QR factorisation of
    ``[phi, u_1, ..., u_{d-1}]`` performs exactly that orthogonalisation (up
    to phases, which canonicalisation removes), so the completion is random
    but fixed by the seed.
    """
    from .sampling import haar_unitary

    d = phi.dim
    u = haar_unitary(d, rng).entries
    stacked = np.column_stack([phi.amplitudes, u[:, : d - 1]])
    q, r = np.linalg.qr(stacked)
    if np.min(np.abs(np.diagonal(r))) < 1e-8:  # pragma: no cover - measure-zero draw
        q, _ = np.linalg.qr(np.column_stack([phi.amplitudes, u]))
        q = q[:, :d]
    rest = canonical_columns(q[:, 1:])
    vectors = (phi,) + tuple(Ray._trusted(rest[:, k].copy()) for k in range(d - 1))
    return OrthonormalBasis(vectors)


def project_to_density(h: np.ndarray) -> DensityMatrix:
    """Nearest density in the clipped-spectrum sense.

    Symmetrises ``h``, zeroes its negative eigenvalues and rescales the
    spectrum to unit trace.
    """
    h = np.asarray(h, dtype=complex)
    tol = tolerances()
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError("expected a square matrix")
    if np.max(np.abs(h - h.conj().T)) > tol.projection_input:
        raise InvariantError("input to project_to_density is not Hermitian")
    h = (h + h.conj().T) / 2
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0.0:
        raise DegenerateProjectionError("clipped spectrum is identically zero")
    w = w / total
    rho = (v * w) @ v.conj().T
    return DensityMatrix((rho + rho.conj().T) / 2)


def trace_distance(a, b) -> float:
    """Half the sum of absolute eigenvalues of ``a - b``."""
    a = a.entries if hasattr(a, "entries") else np.asarray(a)
    b = b.entries if hasattr(b, "entries") else np.asarray(b)
    diff = a - b
    diff = (diff + diff.conj().T) / 2
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def encode_complex(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def decode_complex(pair) -> complex:
    re, im = pair
    return complex(float(re), float(im))


def encode_matrix(m: np.ndarray) -> list[list[list[float]]]:
    return [[encode_complex(z) for z in row] for row in np.asarray(m)]


def decode_matrix(rows) -> np.ndarray:
    return np.array([[decode_complex(z) for z in row] for row in rows], dtype=complex)
