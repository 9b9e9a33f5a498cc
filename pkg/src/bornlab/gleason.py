"""Reconstruct the density operator behind a frame function or effect assignment.

A context-free rule is queried as a frame function ``f`` on an
informationally complete ray set; ``<phi|rho|phi> = f(phi)`` is solved by
linear least squares over Hermitian ``rho`` and the result is projected onto
the density matrices. How well the fitted ``rho`` explains fresh rays and
fresh bases tells whether ``f`` was a frame function of Born form.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import tolerances
from .errors import ConditioningError
from .linalg import (
    DensityMatrix,
    Effect,
    Ray,
    Unitary,
    apply,
    complete_basis,
    encode_matrix,
    project_to_density,
)
from .rules import ProbabilityRule, RuleContext
from .sampling import SeededRng, random_basis, random_effect, random_povm, random_ray

__all__ = [
    "FrameOracle",
    "ReconstructionResult",
    "hermitian_basis",
    "ic_ray_set",
    "born_frame",
    "rule_frame",
    "conjugated_frame",
    "reconstruct_density",
    "born_assignment",
    "povm_gleason_fit",
]

# substream keys, fixed so reports can name them
STREAM_VALIDATION = 1
STREAM_COMPLETION = 2
STREAM_EFFECTS = 3


@dataclass(frozen=True)
class FrameOracle:
    query: Callable[[Ray], float]
    dim: int
    provenance: dict = field(default_factory=dict)

    def __call__(self, phi: Ray) -> float:
        return float(self.query(phi))


@dataclass
class ReconstructionResult:
    rho_hat: DensityMatrix
    residual_max: float
    residual_basis_sum: float
    dim: int
    condition_number: float
    provenance: dict = field(default_factory=dict)
    rng: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "rho_hat": {"type": "density", "dim": self.dim, "entries": encode_matrix(self.rho_hat.entries)},
            "residual_max": self.residual_max,
            "residual_basis_sum": self.residual_basis_sum,
            "condition_number": self.condition_number,
            "provenance": self.provenance,
            "rng": self.rng,
        }


def hermitian_basis(d: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal basis of the d x d Hermitian matrices, shape (d^2, d, d)."""
    mats = []
    for j in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[j, j] = 1
        mats.append(m)
    s = 1 / np.sqrt(2)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = s
            mats.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j * s
            m[k, j] = 1j * s
            mats.append(m)
    return np.array(mats)


def ic_ray_set(d: int) -> list[Ray]:
    """``{e_j} + {(e_j + e_k)/sqrt2} + {(e_j + i e_k)/sqrt2}``, j < k: d^2 rays."""
    if d < 2:
        raise ValueError("d must be >= 2")
    eye = np.eye(d, dtype=complex)
    rays = [Ray(eye[j]) for j in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            rays.append(Ray.from_vector(eye[j] + eye[k]))
    for j in range(d):
        for k in range(j + 1, d):
            rays.append(Ray.from_vector(eye[j] + 1j * eye[k]))
    return rays


def _design(ops: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows Re tr(H_a O_m) for measurement operators O_m."""
    herm = hermitian_basis(d)
    return np.einsum("aij,mji->ma", herm, ops).real, herm


def _solve(a: np.ndarray, b: np.ndarray, herm: np.ndarray) -> tuple[DensityMatrix, float]:
    cond = float(np.linalg.cond(a))
    limit = tolerances().conditioning
    if not np.isfinite(cond) or cond > limit:
        raise ConditioningError(cond, limit)
    coords, *_ = np.linalg.lstsq(a, b, rcond=None)
    h = np.einsum("a,aij->ij", coords, herm)
    return project_to_density(h), cond


def born_frame(rho: DensityMatrix, label: str = "hidden density") -> FrameOracle:
    return FrameOracle(rho.expectation, rho.dim, {"rule": "born", "preparation": label})


def _query_key(phi: Ray) -> int:
    digest = hashlib.blake2b(phi.amplitudes.tobytes(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rule_frame(rule: ProbabilityRule, rho: DensityMatrix, seed: int = 0, label: str = "hidden density") -> FrameOracle:
    """Coerce a rule plus a preparation into a frame oracle.

    The preparation is the eigen-ensemble of ``rho``; a query ``phi`` is
    completed to a basis with a seed derived from ``phi``'s bytes, so repeated
    queries agree. For a context-dependent rule this coercion is our choice,
    and the provenance says so.
    """
    w, v = np.linalg.eigh(rho.entries)
    ensemble = [(float(p), Ray.from_vector(v[:, k])) for k, p in enumerate(w) if p > 1e-15]

    def query(phi: Ray) -> float:
        basis = complete_basis(phi, SeededRng(seed, (STREAM_COMPLETION, _query_key(phi))))
        ctx = RuleContext(basis, 0)
        return sum(p * rule.evaluate(psi, ctx) for p, psi in ensemble)

    prov = {"rule": rule.identifier, "preparation": label, "completion_seed": seed}
    if not rule.claims_context_free:
        prov["coercion"] = "context-dependent rule: each query completed to a seeded random basis"
    return FrameOracle(query, rho.dim, prov)


def conjugated_frame(oracle: FrameOracle, u: Unitary) -> FrameOracle:
    """The oracle ``phi -> f(U^dag phi)``; its density is ``U rho U^dag``."""
    udag = u.dagger
    prov = dict(oracle.provenance, conjugated=True)
    return FrameOracle(lambda phi: oracle(apply(udag, phi)), oracle.dim, prov)


def reconstruct_density(
    oracle: FrameOracle, rng: SeededRng | None = None, n_rays: int = 200, n_bases: int = 50
) -> ReconstructionResult:
    """Fit rho from the frame oracle on the IC ray set, then validate.

    ``residual_max`` is the worst ``|f(phi) - <phi|rho_hat|phi>|`` over
    ``n_rays`` random rays; ``residual_basis_sum`` the worst
    ``|sum_i f(Phi_i) - 1|`` over ``n_bases`` random bases.
    """
    d = oracle.dim
    if d < 2:
        raise ValueError("reconstruction needs d >= 2")
    rng = rng if rng is not None else SeededRng(0)
    rays = ic_ray_set(d)
    a, herm = _design(np.array([r.projector() for r in rays]), d)
    b = np.array([oracle(r) for r in rays])
    rho_hat, cond = _solve(a, b, herm)

    vrng = rng.substream(STREAM_VALIDATION)
    residual_max = 0.0
    for _ in range(n_rays):
        phi = random_ray(d, vrng)
        residual_max = max(residual_max, abs(oracle(phi) - rho_hat.expectation(phi)))
    residual_basis = 0.0
    for _ in range(n_bases):
        basis = random_basis(d, vrng)
        residual_basis = max(residual_basis, abs(sum(oracle(v) for v in basis) - 1.0))
    return ReconstructionResult(
        rho_hat, float(residual_max), float(residual_basis), d, cond, dict(oracle.provenance), rng.describe()
    )


def born_assignment(rho: DensityMatrix) -> Callable[[Effect], float]:
    return lambda e: float(np.real(np.trace(rho.entries @ e.entries)))


def povm_gleason_fit(
    assignment: Callable[[Effect], float],
    d: int,
    rng: SeededRng,
    n_povms: int = 100,
    provenance: dict | None = None,
) -> ReconstructionResult:
    """Fit rho from ``p(E) = tr(rho E)`` on 4 d^2 random effects, then validate.

    Validation uses ``n_povms`` fresh random POVMs with 2..d+2 outcomes.
    ``residual_basis_sum`` is the worst ``|sum_i p(E_i) - 1|``;
    ``residual_max`` the worst ``|p(E) - tr(rho_hat E)|`` over their effects.
    """
    if d < 2:
        raise ValueError("reconstruction needs d >= 2")
    erng = rng.substream(STREAM_EFFECTS)
    effects = [random_effect(d, erng) for _ in range(4 * d * d)]
    a, herm = _design(np.array([e.entries for e in effects]), d)
    b = np.array([assignment(e) for e in effects])
    rho_hat, cond = _solve(a, b, herm)

    vrng = rng.substream(STREAM_VALIDATION)
    residual_max = 0.0
    residual_sum = 0.0
    fitted = born_assignment(rho_hat)
    for _ in range(n_povms):
        k = int(vrng.generator.integers(2, d + 3))
        povm = random_povm(d, k, vrng)
        probs = [assignment(e) for e in povm]
        residual_sum = max(residual_sum, abs(sum(probs) - 1.0))
        residual_max = max(residual_max, max(abs(p - fitted(e)) for p, e in zip(probs, povm)))
    return ReconstructionResult(
        rho_hat, float(residual_max), float(residual_sum), d, cond, dict(provenance or {}), rng.describe()
    )
