"""Seeded random states, unitaries and measurements.

Random streams use numpy's PCG64 bit generator keyed by a
``numpy.random.SeedSequence(seed, spawn_key=stream)``. Both algorithms are
covered by numpy's stream-compatibility policy, so a ``(seed, stream)`` pair
names the same sequence of draws on every platform.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .linalg import (
    POVM,
    DensityMatrix,
    Effect,
    OrthonormalBasis,
    Ray,
    Unitary,
    canonical_columns,
)

GENERATOR_NAME = "numpy.random.PCG64 seeded by SeedSequence(seed, spawn_key=stream)"


class SeededRng:
    """Single-owner random stream identified by ``(seed, stream)``.

    ``stream`` is a tuple of nonnegative integers. Workers never share an
    instance; they derive independent children with :meth:`substream`.
    """

    __slots__ = ("seed", "stream", "generator")

    def __init__(self, seed: int, stream: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.stream = tuple(int(s) for s in stream)
        seq = np.random.SeedSequence(seed, spawn_key=self.stream)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def substream(self, *keys: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream + tuple(keys))

    def describe(self) -> dict:
        return {"seed": self.seed, "stream": list(self.stream), "generator": GENERATOR_NAME}

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def as_rng(rng) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    return SeededRng(0 if rng is None else int(rng))


def ginibre(rows: int, cols: int, rng: SeededRng) -> np.ndarray:
    """Matrix of i.i.d. standard complex normals (E|z|^2 = 1)."""
    g = rng.generator
    return (g.standard_normal((rows, cols)) + 1j * g.standard_normal((rows, cols))) / np.sqrt(2.0)


def _haar_matrix(d: int, rng: SeededRng) -> np.ndarray:
    z = ginibre(d, d, rng)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def haar_unitary(d: int, rng: SeededRng) -> Unitary:
    """Haar-distributed element of U(d) via Ginibre + QR with phase fix."""
    if d < 1:
        raise DimensionError("d must be >= 1")
    return Unitary(_haar_matrix(d, rng))


def random_ray(d: int, rng: SeededRng) -> Ray:
    """First column of a Haar unitary, canonicalised.

    Column 0 of the phase-corrected QR factor is exactly the normalised
    first Ginibre column, so the factorisation itself is skipped; the draw
    consumes the same d x d normals as :func:`haar_unitary`.
    """
    if d < 1:
        raise DimensionError("d must be >= 1")
    z = ginibre(d, d, rng)[:, 0]
    return Ray.from_vector(z)


def haar_batch(n: int, d: int, rng: SeededRng) -> np.ndarray:
    """``n`` independent Haar unitaries as an (n, d, d) array."""
    g = rng.generator
    z = (g.standard_normal((n, d, d)) + 1j * g.standard_normal((n, d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[:, None, :]


def ray_batch(n: int, d: int, rng: SeededRng) -> np.ndarray:
    """``n`` Haar-random canonical rays as rows of an (n, d) array."""
    g = rng.generator
    z = (g.standard_normal((n, d)) + 1j * g.standard_normal((n, d))) / np.sqrt(2.0)
    return canonical_columns(z[:, :, None])[:, :, 0]


def random_basis(d: int, rng: SeededRng) -> OrthonormalBasis:
    return OrthonormalBasis.from_matrix(_haar_matrix(d, rng), check=False)


def random_density(d: int, rank: int, rng: SeededRng) -> DensityMatrix:
    """Induced-measure density G G^dag / tr(G G^dag) with G a d x rank Ginibre matrix."""
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}]")
    g = ginibre(d, rank, rng)
    m = g @ g.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.real(np.trace(m)))


def random_effect(d: int, rng: SeededRng) -> Effect:
    """Ginibre-squared PSD operator scaled so its largest eigenvalue is 1."""
    g = ginibre(d, d, rng)
    m = g @ g.conj().T
    m = (m + m.conj().T) / 2
    return Effect(m / np.linalg.eigvalsh(m)[-1])


def random_povm(d: int, outcomes: int, rng: SeededRng) -> POVM:
    """POVM E_i = S^{-1/2} A_i S^{-1/2} from Ginibre-squared A_i, S = sum A_i."""
    if outcomes < 1:
        raise ValueError("need at least one outcome")
    parts = []
    for _ in range(outcomes):
        g = ginibre(d, d, rng)
        parts.append(g @ g.conj().T)
    s = sum(parts)
    w, v = np.linalg.eigh((s + s.conj().T) / 2)
    s_inv_half = (v / np.sqrt(w)) @ v.conj().T
    effects = []
    for a in parts:
        e = s_inv_half @ a @ s_inv_half
        effects.append(Effect((e + e.conj().T) / 2))
    return POVM(tuple(effects))


def random_orthogonal_direction(psi: Ray, rng: SeededRng) -> np.ndarray:
    d = psi.dim
    if d < 2:
        raise DimensionError("no direction orthogonal to a ray in C^1")
    v = psi.amplitudes
    eta = ginibre(d, 1, rng)[:, 0]
    eta = eta - np.vdot(v, eta) * v
    return eta / np.linalg.norm(eta)


def perturb_ray(psi: Ray, epsilon: float, rng: SeededRng | None = None, direction=None) -> Ray:
    """``normalize(psi + epsilon * eta)`` with ``eta`` a unit vector orthogonal to ``psi``.

    ``eta`` is drawn from ``rng`` unless ``direction`` is given, in which case
    its component along ``psi`` is removed first.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    v = psi.amplitudes
    if direction is None:
        eta = random_orthogonal_direction(psi, rng)
    else:
        eta = np.asarray(direction, dtype=complex)
        eta = eta - np.vdot(v, eta) * v
        eta = eta / np.linalg.norm(eta)
    return Ray.from_vector(v + epsilon * eta)
