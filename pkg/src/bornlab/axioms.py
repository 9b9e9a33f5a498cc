"""Monte-Carlo checks of transition-probability rules against the desiderata.

A rule is probed for seven properties: well-definedness, the two
consistency conditions over an orthonormal basis, unitary invariance,
continuity, independence of the dimension N, and independence of the basis
an outcome is embedded in.

"Fail" is existential: one witness above tolerance suffices, and the worst
witness is kept with every input needed to replay it. "Pass" only means no
witness was found in the trials run. Each trial draws from its own random
substream ``(seed, (check, dim, trial))``, so a run with more trials
reproduces every trial of a shorter one.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .config import Tolerances, tolerances, using_tolerances
from .errors import BornLabError, DimensionError
from .linalg import (
    OrthonormalBasis,
    Ray,
    Unitary,
    apply,
    canonical_columns,
    complete_basis,
    inner_product,
    tensor,
)
from .opf import OPF, convex_mix, opf_eval, random_opf, sharp_opf, star_product
from .rules import ProbabilityRule, RuleContext, born_evaluate, parse_rule
from .sampling import GENERATOR_NAME, SeededRng, haar_batch, random_ray, ray_batch

__all__ = [
    "Desideratum",
    "ViolationWitness",
    "CheckResult",
    "AxiomReport",
    "EPSILON_LADDER",
    "check_consistency",
    "check_unitary_invariance",
    "check_dimension_independence",
    "probe_continuity",
    "detect_context_dependence",
    "replay",
    "run_desiderata",
    "bargmann_invariant",
    "bargmann_context_scan",
    "scan_to_csv",
    "check_opf_algebra",
    "swapped_star_product",
]


class Desideratum(str, Enum):
    WELL_DEFINED = "WellDefined"
    CONSISTENCY_SUM = "ConsistencySum"
    CONSISTENCY_DELTA = "ConsistencyDelta"
    UNITARY_INVARIANCE = "UnitaryInvariance"
    CONTINUITY = "Continuity"
    DIMENSION_INDEPENDENCE = "DimensionIndependence"
    CONTEXT_INDEPENDENCE = "ContextIndependence"


EPSILON_LADDER = tuple(10.0**-k for k in range(2, 11))
PERSISTENCE_STEPS = 3
BISECTION_RESOLUTION = 1e-13


def _tolerance_for(des: Desideratum, tol: Tolerances) -> float:
    if des is Desideratum.WELL_DEFINED:
        return tol.probability
    if des is Desideratum.CONTINUITY:
        return tol.discontinuity
    return tol.equality


@dataclass
class ViolationWitness:
    desideratum: Desideratum
    inputs: dict
    lhs: float
    rhs: float
    discrepancy: float
    trial: int
    seed: int
    stream: list[int]

    def to_json(self) -> dict:
        return {
            "desideratum": self.desideratum.value,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "discrepancy": self.discrepancy,
            "trial": self.trial,
            "seed": self.seed,
            "stream": list(self.stream),
            "inputs": self.inputs,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ViolationWitness":
        return cls(
            Desideratum(data["desideratum"]),
            data["inputs"],
            data["lhs"],
            data["rhs"],
            data["discrepancy"],
            data["trial"],
            data["seed"],
            list(data["stream"]),
        )


@dataclass
class CheckResult:
    desideratum: Desideratum
    dim: int
    tolerance: float
    trials_run: int = 0
    max_discrepancy: float = 0.0
    failures: int = 0
    witness: ViolationWitness | None = None

    @property
    def failed(self) -> bool:
        return self.failures > 0

    def record(self, trial: int, discrepancy: float, build: Callable[[], ViolationWitness]) -> None:
        """Fold in one trial; ``build`` is only called for a new worst failure."""
        discrepancy = float(discrepancy)
        self.max_discrepancy = max(self.max_discrepancy, discrepancy)
        if discrepancy > self.tolerance:
            self.failures += 1
            if self.witness is None or discrepancy > self.witness.discrepancy:
                self.witness = build()

    def merge(self, other: "CheckResult") -> "CheckResult":
        out = replace(self)
        out.trials_run += other.trials_run
        out.max_discrepancy = max(self.max_discrepancy, other.max_discrepancy)
        out.failures += other.failures
        candidates = [w for w in (self.witness, other.witness) if w is not None]
        if candidates:
            out.witness = min(candidates, key=lambda w: (-w.discrepancy, w.trial))
        return out


def _outside_unit(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        return 1.0
    return float(max(0.0, -values.min(), values.max() - 1.0))


def _embed(psi: Ray, basis: OrthonormalBasis, k: int) -> tuple[Ray, OrthonormalBasis]:
    d = psi.dim
    pad = np.zeros(k, dtype=complex)
    big_psi = Ray._trusted(np.concatenate([psi.amplitudes, pad]))
    m = np.zeros((d + k, d + k), dtype=complex)
    m[:d, :d] = basis.matrix
    m[d:, d:] = np.eye(k)
    return big_psi, OrthonormalBasis.from_matrix(m, check=False)


def _conjugate_basis(u: Unitary, basis: OrthonormalBasis) -> OrthonormalBasis:
    return OrthonormalBasis.from_matrix(u.entries @ basis.matrix, check=False)


# -- individual measurements, shared by the checks and by replay -------------


def _measure_sum(rule, psi, basis):
    total = float(np.sum(rule.distribution(psi, basis)))
    return total, 1.0


def _measure_delta(rule, basis, i, j):
    p = rule.evaluate(basis[i], RuleContext(basis, j))
    return p, 1.0 if i == j else 0.0


def _measure_well_defined(rule, psi, basis, outcome):
    p = rule.evaluate(psi, RuleContext(basis, outcome))
    return p, min(max(p, 0.0), 1.0)


def _measure_unitary(rule, psi, basis, u, outcome):
    p = rule.evaluate(psi, RuleContext(basis, outcome))
    q = rule.evaluate(apply(u, psi), RuleContext(_conjugate_basis(u, basis), outcome))
    return p, q


def _measure_dimension(rule, psi, basis, outcome, k):
    p = rule.evaluate(psi, RuleContext(basis, outcome))
    big_psi, big_basis = _embed(psi, basis, k)
    return p, rule.evaluate(big_psi, RuleContext(big_basis, outcome))


def _measure_context(rule, psi, basis_a, basis_b):
    return rule.evaluate(psi, RuleContext(basis_a, 0)), rule.evaluate(psi, RuleContext(basis_b, 0))


def _measure_continuity(rule, psi, basis, outcome, perturbed):
    ctx = RuleContext(basis, outcome)
    p = rule.evaluate(psi, ctx)
    jumps = [abs(rule.evaluate(q, ctx) - p) for q in perturbed]
    return p, rule.evaluate(perturbed[-1], ctx), float(min(jumps))


def _j(x) -> dict:
    return x.to_json()


# -- checks ------------------------------------------------------------------

CHECK_STREAMS = {
    "consistency": 0,
    "unitary": 1,
    "dimension": 2,
    "continuity": 3,
    "context": 4,
}

# trials per random block; every block is always drawn in full
BLOCK = 64


def _complete_many(targets: np.ndarray, unitaries: np.ndarray) -> np.ndarray:
    """Batched :func:`complete_basis`: QR of ``[phi, u_1, ..., u_{d-1}]`` per row."""
    d = targets.shape[1]
    stacked = np.concatenate([targets[:, :, None], unitaries[:, :, : d - 1]], axis=2)
    q, _ = np.linalg.qr(stacked)
    rest = canonical_columns(q[:, :, 1:])
    return np.concatenate([targets[:, :, None], rest], axis=2)


class _Block:
    """Random inputs for BLOCK consecutive trials of one check at one dimension."""

    def __init__(self, check: str, d: int, rng: SeededRng, index: int):
        r = rng.substream(index)
        self.seed = r.seed
        self.stream = list(r.stream)
        n = BLOCK
        self.psi = ray_batch(n, d, r)
        if check == "context":
            self.target = ray_batch(n, d, r)
            self.basis_a = _complete_many(self.target, haar_batch(n, d, r))
            self.basis_b = _complete_many(self.target, haar_batch(n, d, r))
            return
        self.basis = canonical_columns(haar_batch(n, d, r))
        self.outcome = r.generator.integers(d, size=n)
        if check == "unitary":
            self.unitary = haar_batch(n, d, r)
        if check == "continuity":
            g = r.generator
            eta = g.standard_normal((n, d)) + 1j * g.standard_normal((n, d))
            eta -= np.sum(self.psi.conj() * eta, axis=1, keepdims=True) * self.psi
            self.eta = eta / np.linalg.norm(eta, axis=1, keepdims=True)
            self.other = ray_batch(n, d, r)


def _trials(check: str, d: int, trials: int, rng: SeededRng, start: int, stop: int | None):
    """Yield ``(t, block, j)``: trial index, its block of draws, and its row in the block."""
    stop = trials if stop is None else stop
    block = None
    for t in range(start, stop):
        index, j = divmod(t, BLOCK)
        if block is None or block.index != index:
            block = _Block(check, d, rng, index)
            block.index = index
        yield t, block, j


def _new(des, d, tol):
    return CheckResult(des, d, _tolerance_for(des, tol))


def _witness(des, inputs, lhs, rhs, disc, trial, block):
    return lambda: ViolationWitness(des, inputs(), float(lhs), float(rhs), float(disc), trial, block.seed, block.stream)


def _error_witness(des, exc, inputs, trial, block):
    return lambda: ViolationWitness(
        des,
        dict(inputs(), error=f"{type(exc).__name__}: {exc}"),
        float("nan"),
        float("nan"),
        1.0,
        trial,
        block.seed,
        block.stream,
    )


_RULE_ERRORS = (BornLabError, ArithmeticError)


def check_consistency(rule: ProbabilityRule, d: int, trials: int, rng: SeededRng, start: int = 0, stop: int | None = None):
    """Well-definedness, sum-to-one over a basis, and P(Phi_i -> Phi_j) = delta_ij.

    Returns a dict of three :class:`CheckResult`. A rule that raises while
    being evaluated is recorded as not well defined.
    """
    tol = tolerances()
    wd = _new(Desideratum.WELL_DEFINED, d, tol)
    sm = _new(Desideratum.CONSISTENCY_SUM, d, tol)
    dl = _new(Desideratum.CONSISTENCY_DELTA, d, tol)
    target = np.zeros(d)
    for t, blk, j in _trials("consistency", d, trials, rng, start, stop):
        psi = Ray._trusted(blk.psi[j].copy())
        basis = OrthonormalBasis._trusted(blk.basis[j])
        i = int(blk.outcome[j])
        for res in (wd, sm, dl):
            res.trials_run += 1
        try:
            dist = np.asarray(rule.distribution(psi, basis), dtype=float)
            from_basis = np.asarray(rule.distribution(basis[i], basis), dtype=float)
        except _RULE_ERRORS as exc:
            inputs = lambda: {"psi": _j(psi), "basis": _j(basis), "outcome": 0}
            wd.record(t, 1.0, _error_witness(Desideratum.WELL_DEFINED, exc, inputs, t, blk))
            continue

        both = np.concatenate([dist, from_basis])
        outside = _outside_unit(both)
        if outside > wd.tolerance:
            if np.all(np.isfinite(both)):
                k = int(np.argmax(np.maximum(-both, both - 1.0)))
            else:
                k = int(np.flatnonzero(~np.isfinite(both))[0])
            src, outcome = (psi, k) if k < d else (basis[i], k - d)
            lhs, rhs = _measure_well_defined(rule, src, basis, outcome)
            inputs = lambda: {"psi": _j(src), "basis": _j(basis), "outcome": outcome}
            wd.record(t, outside, _witness(Desideratum.WELL_DEFINED, inputs, lhs, rhs, outside, t, blk))
        else:
            wd.record(t, outside, None)

        total = float(np.sum(dist))
        inputs = lambda: {"psi": _j(psi), "basis": _j(basis)}
        sm.record(t, abs(total - 1.0), _witness(Desideratum.CONSISTENCY_SUM, inputs, total, 1.0, abs(total - 1.0), t, blk))

        target[:] = 0.0
        target[i] = 1.0
        dev = np.abs(from_basis - target)
        k = int(np.argmax(dev))
        inputs = lambda: {"basis": _j(basis), "i": i, "j": k}
        dl.record(t, dev[k], _witness(Desideratum.CONSISTENCY_DELTA, inputs, from_basis[k], target[k], dev[k], t, blk))
    return {wd.desideratum: wd, sm.desideratum: sm, dl.desideratum: dl}


def check_unitary_invariance(rule, d, trials, rng, start=0, stop=None) -> CheckResult:
    """|P(psi -> Phi_i | B) - P(U psi -> U Phi_i | U B)| for Haar U."""
    res = _new(Desideratum.UNITARY_INVARIANCE, d, tolerances())
    for t, blk, j in _trials("unitary", d, trials, rng, start, stop):
        psi = Ray._trusted(blk.psi[j].copy())
        basis = OrthonormalBasis._trusted(blk.basis[j])
        u = Unitary(blk.unitary[j])
        i = int(blk.outcome[j])
        res.trials_run += 1
        inputs = lambda: {"psi": _j(psi), "basis": _j(basis), "unitary": _j(u), "outcome": i}
        try:
            p, q = _measure_unitary(rule, psi, basis, u, i)
        except _RULE_ERRORS as exc:
            res.record(t, 1.0, _error_witness(res.desideratum, exc, inputs, t, blk))
            continue
        res.record(t, abs(p - q), _witness(res.desideratum, inputs, p, q, abs(p - q), t, blk))
    return res


def check_dimension_independence(rule, d, trials, rng, start=0, stop=None) -> CheckResult:
    """Zero-pad psi and the basis into d + k (k = 1, 2 alternately) and compare."""
    res = _new(Desideratum.DIMENSION_INDEPENDENCE, d, tolerances())
    for t, blk, j in _trials("dimension", d, trials, rng, start, stop):
        psi = Ray._trusted(blk.psi[j].copy())
        basis = OrthonormalBasis._trusted(blk.basis[j])
        i = int(blk.outcome[j])
        k = 1 + t % 2
        res.trials_run += 1
        inputs = lambda: {"psi": _j(psi), "basis": _j(basis), "outcome": i, "k": k}
        try:
            p, q = _measure_dimension(rule, psi, basis, i, k)
        except _RULE_ERRORS as exc:
            res.record(t, 1.0, _error_witness(res.desideratum, exc, inputs, t, blk))
            continue
        res.record(t, abs(p - q), _witness(res.desideratum, inputs, p, q, abs(p - q), t, blk))
    return res


def _geodesic(a: np.ndarray, b: np.ndarray, s: float) -> Ray:
    return Ray.from_vector((1.0 - s) * a + s * b)


def _locate_jump(rule, ctx, psi: Ray, other: Ray, threshold: float):
    """Bisect the path psi -> other down to a jump that survives refinement.

    Returns ``(base, direction)`` or None when the difference dies out, as it
    does for continuous rules.
    """
    a = psi.amplitudes
    c = np.vdot(a, other.amplitudes)
    b = other.amplitudes * (np.conj(c) / abs(c)) if abs(c) > 0 else other.amplitudes
    lo, hi = 0.0, 1.0
    p_lo, p_hi = rule.evaluate(psi, ctx), rule.evaluate(_geodesic(a, b, 1.0), ctx)
    if abs(p_lo - p_hi) <= threshold:
        return None
    while hi - lo > BISECTION_RESOLUTION:
        mid = 0.5 * (lo + hi)
        p_mid = rule.evaluate(_geodesic(a, b, mid), ctx)
        left, right = abs(p_lo - p_mid), abs(p_mid - p_hi)
        if max(left, right) <= threshold:
            return None
        if left >= right:
            hi, p_hi = mid, p_mid
        else:
            lo, p_lo = mid, p_mid
    base = _geodesic(a, b, lo)
    direction = _geodesic(a, b, hi).amplitudes - base.amplitudes
    direction = direction - np.vdot(base.amplitudes, direction) * base.amplitudes
    n = np.linalg.norm(direction)
    if n == 0.0:
        return None
    return base, direction / n


def probe_continuity(rule, d, trials, rng, start=0, stop=None) -> CheckResult:
    """Look for jumps that persist as the perturbation shrinks.

    Each trial probes a random point along a random direction over
    ``EPSILON_LADDER``, then bisects the path to a second random point to
    find a jump, if there is one, and probes across it. A point is a witness
    when ``|P(psi_eps) - P(psi)|`` exceeds the discontinuity threshold at
    each of the three smallest epsilons; the recorded discrepancy is the
    smallest of those three jumps.
    """
    res = _new(Desideratum.CONTINUITY, d, tolerances())
    small = EPSILON_LADDER[-PERSISTENCE_STEPS:]
    for t, blk, j in _trials("continuity", d, trials, rng, start, stop):
        psi = Ray._trusted(blk.psi[j].copy())
        basis = OrthonormalBasis._trusted(blk.basis[j])
        i = int(blk.outcome[j])
        other = Ray._trusted(blk.other[j].copy())
        ctx = RuleContext(basis, i)
        res.trials_run += 1
        candidates = [(psi, blk.eta[j])]
        try:
            located = _locate_jump(rule, ctx, psi, other, res.tolerance)
            if located is not None:
                candidates.append(located)
            best = None
            for base, direction in candidates:
                perturbed = [Ray.from_vector(base.amplitudes + eps * direction) for eps in small]
                lhs, rhs, jump = _measure_continuity(rule, base, basis, i, perturbed)
                if best is None or jump > best[3]:
                    best = (base, perturbed, lhs, jump, rhs)
        except _RULE_ERRORS as exc:
            inputs = lambda: {"psi": _j(psi), "basis": _j(basis), "outcome": i}
            res.record(t, 1.0, _error_witness(res.desideratum, exc, inputs, t, blk))
            continue
        base, perturbed, lhs, jump, rhs = best
        inputs = lambda: {
            "psi": _j(base),
            "basis": _j(basis),
            "outcome": i,
            "epsilons": list(small),
            "perturbed": [_j(q) for q in perturbed],
        }
        res.record(t, jump, _witness(res.desideratum, inputs, lhs, rhs, jump, t, blk))
    return res


def detect_context_dependence(rule, d, trials, rng, start=0, stop=None) -> CheckResult:
    """|P(psi -> phi | B1) - P(psi -> phi | B2)| for two random completions of phi."""
    res = _new(Desideratum.CONTEXT_INDEPENDENCE, d, tolerances())
    for t, blk, j in _trials("context", d, trials, rng, start, stop):
        psi = Ray._trusted(blk.psi[j].copy())
        phi = Ray._trusted(blk.target[j].copy())
        b1 = OrthonormalBasis._trusted(blk.basis_a[j])
        b2 = OrthonormalBasis._trusted(blk.basis_b[j])
        res.trials_run += 1
        inputs = lambda: {"psi": _j(psi), "target": _j(phi), "basis_a": _j(b1), "basis_b": _j(b2)}
        try:
            p, q = _measure_context(rule, psi, b1, b2)
        except _RULE_ERRORS as exc:
            res.record(t, 1.0, _error_witness(res.desideratum, exc, inputs, t, blk))
            continue
        res.record(t, abs(p - q), _witness(res.desideratum, inputs, p, q, abs(p - q), t, blk))
    return res


def replay(witness: ViolationWitness | dict, rule: ProbabilityRule) -> tuple[float, float, float]:
    """Re-evaluate a witness from its serialized inputs: ``(lhs, rhs, discrepancy)``."""
    if isinstance(witness, dict):
        witness = ViolationWitness.from_json(witness)
    x = witness.inputs
    des = witness.desideratum
    ray = lambda key: Ray.from_json(x[key])
    basis = lambda key: OrthonormalBasis.from_json(x[key])
    if des is Desideratum.WELL_DEFINED:
        lhs, rhs = _measure_well_defined(rule, ray("psi"), basis("basis"), x["outcome"])
        return lhs, rhs, _outside_unit([lhs])
    if des is Desideratum.CONSISTENCY_SUM:
        lhs, rhs = _measure_sum(rule, ray("psi"), basis("basis"))
    elif des is Desideratum.CONSISTENCY_DELTA:
        lhs, rhs = _measure_delta(rule, basis("basis"), x["i"], x["j"])
    elif des is Desideratum.UNITARY_INVARIANCE:
        u = Unitary.from_json(x["unitary"])
        lhs, rhs = _measure_unitary(rule, ray("psi"), basis("basis"), u, x["outcome"])
    elif des is Desideratum.DIMENSION_INDEPENDENCE:
        lhs, rhs = _measure_dimension(rule, ray("psi"), basis("basis"), x["outcome"], x["k"])
    elif des is Desideratum.CONTEXT_INDEPENDENCE:
        lhs, rhs = _measure_context(rule, ray("psi"), basis("basis_a"), basis("basis_b"))
    else:
        perturbed = [Ray.from_json(q) for q in x["perturbed"]]
        return _measure_continuity(rule, ray("psi"), basis("basis"), x["outcome"], perturbed)
    return lhs, rhs, abs(lhs - rhs)


# -- reports -----------------------------------------------------------------

_CHECKS = {
    "consistency": check_consistency,
    "unitary": check_unitary_invariance,
    "dimension": check_dimension_independence,
    "continuity": probe_continuity,
    "context": detect_context_dependence,
}


def verdict_for(rule: ProbabilityRule, result: CheckResult) -> str:
    found = "witness found" if result.failed else "witness not found"
    if result.desideratum is Desideratum.CONTEXT_INDEPENDENCE and not rule.claims_context_free:
        return f"declared-context-dependent, {found}"
    if result.desideratum is Desideratum.CONTINUITY and not rule.claims_continuous:
        return f"declared-discontinuous, {found}"
    return "fail" if result.failed else "pass"


@dataclass
class AxiomReport:
    rule: ProbabilityRule
    dims: list[int]
    trials: int
    seed: int
    tolerances: Tolerances
    per_dim: dict[int, dict[Desideratum, CheckResult]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def combined(self, des: Desideratum) -> CheckResult:
        merged = None
        for d in self.dims:
            r = self.per_dim[d][des]
            merged = r if merged is None else merged.merge(r)
        return merged

    def verdicts(self) -> dict[Desideratum, str]:
        return {des: verdict_for(self.rule, self.combined(des)) for des in Desideratum}

    @property
    def undeclared_violation(self) -> bool:
        return any(v == "fail" for v in self.verdicts().values())

    @property
    def exit_code(self) -> int:
        return 1 if self.undeclared_violation else 0

    def to_json(self) -> dict:
        tol = self.tolerances
        results = {}
        for des in Desideratum:
            comb = self.combined(des)
            entry = {
                "verdict": verdict_for(self.rule, comb),
                "max_discrepancy": comb.max_discrepancy,
                "trials_run": comb.trials_run,
                "tolerance": comb.tolerance,
                "failures": comb.failures,
                "per_dim": {
                    str(d): {
                        "max_discrepancy": self.per_dim[d][des].max_discrepancy,
                        "failures": self.per_dim[d][des].failures,
                    }
                    for d in self.dims
                },
            }
            if comb.witness is not None:
                entry["witness"] = comb.witness.to_json()
            results[des.value] = entry
        return {
            "rule": self.rule.identifier,
            "claims": {
                "context_free": self.rule.claims_context_free,
                "continuous": self.rule.claims_continuous,
            },
            "dims": list(self.dims),
            "trials": self.trials,
            "seed": self.seed,
            "rng": {
                "generator": GENERATOR_NAME,
                "stream_layout": f"(check, dim, block) with {BLOCK} trials per block and check "
                + ", ".join(f"{k}={v}" for k, v in CHECK_STREAMS.items()),
            },
            "tolerances": {
                "equality": tol.equality,
                "well_defined": tol.probability,
                "discontinuity": tol.discontinuity,
                "tie_epsilon": tol.tie_epsilon,
                "epsilon_ladder": list(EPSILON_LADDER),
            },
            "results": results,
            "notes": list(self.notes),
        }


def _chunks(trials: int, parts: int) -> list[tuple[int, int]]:
    # split on block boundaries so no block is drawn twice
    blocks = -(-trials // BLOCK)
    parts = max(1, min(parts, blocks))
    edges = np.linspace(0, blocks, parts + 1).astype(int) * BLOCK
    edges[-1] = trials
    return [(int(a), int(min(b, trials))) for a, b in zip(edges[:-1], edges[1:]) if min(b, trials) > a]


def _run_unit(rule, check: str, d: int, trials: int, start: int, stop: int, seed: int, tol: Tolerances):
    if isinstance(rule, str):
        rule = parse_rule(rule)
    with using_tolerances(tol):
        rng = SeededRng(seed, (CHECK_STREAMS[check], d))
        out = _CHECKS[check](rule, d, trials, rng, start, stop)
    return out if isinstance(out, dict) else {out.desideratum: out}


def run_desiderata(
    rule: ProbabilityRule,
    dims: list[int],
    trials: int,
    seed: int,
    jobs: int = 1,
    tol: Tolerances | None = None,
) -> AxiomReport:
    """Run every check at every dimension and assemble the report.

    With ``jobs > 1`` trials fan out over worker processes; results are
    merged by trial index, so the report does not depend on ``jobs``.
    """
    tol = tol or tolerances()
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if any(d < 1 for d in dims):
        raise DimensionError("dims must be positive")
    units = [
        (check, d, a, b)
        for d in dims
        for check in _CHECKS
        for a, b in _chunks(trials, max(1, jobs))
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_unit, rule.identifier, c, d, trials, a, b, seed, tol) for c, d, a, b in units]
            outputs = [f.result() for f in futures]
    else:
        outputs = [_run_unit(rule, c, d, trials, a, b, seed, tol) for c, d, a, b in units]

    per_dim: dict[int, dict[Desideratum, CheckResult]] = {d: {} for d in dims}
    for (check, d, a, b), out in zip(units, outputs):
        for des, res in out.items():
            prev = per_dim[d].get(des)
            per_dim[d][des] = res if prev is None else prev.merge(res)
    notes = []
    if 2 in dims:
        notes.append("d=2 included: Gleason's theorem needs d >= 3, so d=2 results carry no uniqueness claim")
    return AxiomReport(rule, list(dims), trials, seed, tol, per_dim, notes)


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# -- Bargmann invariants -----------------------------------------------------


def bargmann_invariant(psi: Ray, phi_i: Ray, phi_j: Ray) -> complex:
    """``<psi|phi_i><phi_i|phi_j><phi_j|psi>``; invariant under a common unitary and rephasing."""
    if not psi.dim == phi_i.dim == phi_j.dim:
        raise DimensionError("Bargmann invariant needs rays of equal dimension")
    return inner_product(psi, phi_i) * inner_product(phi_i, phi_j) * inner_product(phi_j, psi)


def _max_offdiag_bargmann(psi: Ray, basis: OrthonormalBasis) -> float:
    if basis.dim < 2:
        return 0.0
    m = basis.matrix
    ov = np.abs(m.conj().T @ psi.amplitudes)
    gram = np.abs(m.T @ m.conj())
    trip = ov[:, None] * gram * ov[None, :]
    np.fill_diagonal(trip, 0.0)
    return float(np.max(trip))


@dataclass(frozen=True)
class BargmannRow:
    trial: int
    discrepancy: float
    max_bargmann_offdiag: float


def bargmann_context_scan(rule: ProbabilityRule, d: int, trials: int, rng: SeededRng) -> list[BargmannRow]:
    """Per trial: the context discrepancy and the largest off-diagonal triple product.

    Draws exactly as :func:`detect_context_dependence` does, so trial ``t``
    here is trial ``t`` there for the same ``rng``. Tabulation only; no verdict.
    """
    rows = []
    for t, blk, j in _trials("context", d, trials, rng, 0, None):
        psi = Ray._trusted(blk.psi[j].copy())
        b1 = OrthonormalBasis._trusted(blk.basis_a[j])
        b2 = OrthonormalBasis._trusted(blk.basis_b[j])
        p, q = _measure_context(rule, psi, b1, b2)
        barg = max(_max_offdiag_bargmann(psi, b1), _max_offdiag_bargmann(psi, b2))
        rows.append(BargmannRow(t, abs(p - q), barg))
    return rows


def scan_to_csv(rows: list[BargmannRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "discrepancy", "max_bargmann_offdiag"])
    for row in rows:
        w.writerow([row.trial, repr(row.discrepancy), repr(row.max_bargmann_offdiag)])
    return buf.getvalue()


# -- OPF algebra -------------------------------------------------------------


def swapped_star_product(f: OPF, g: OPF) -> OPF:
    """Deliberately wrong composition (G (x) F), used to self-test the OPF checks."""
    return OPF(np.kron(g.operator, f.operator), f"({g.label}*{f.label})")


@dataclass
class OpfCheck:
    name: str
    tolerance: float
    trials_run: int = 0
    max_discrepancy: float = 0.0
    witness: dict | None = None
    extension: bool = False

    def record(self, discrepancy: float, build: Callable[[], dict]) -> None:
        discrepancy = float(discrepancy)
        self.trials_run += 1
        if discrepancy > self.max_discrepancy:
            self.max_discrepancy = discrepancy
            if discrepancy > self.tolerance:
                self.witness = build()

    @property
    def failed(self) -> bool:
        return self.max_discrepancy > self.tolerance

    def to_json(self) -> dict:
        out = {
            "verdict": "fail" if self.failed else "pass",
            "max_discrepancy": self.max_discrepancy,
            "trials_run": self.trials_run,
            "tolerance": self.tolerance,
        }
        if self.extension:
            out["note"] = "operator-form extension beyond the product-law axiom"
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _raw_eval(f: OPF, psi: Ray) -> float:
    v = psi.amplitudes
    return float(np.real(np.vdot(v, f.operator @ v)))


def check_opf_algebra(dims: list[int], trials: int, rng: SeededRng, star=star_product) -> dict[str, OpfCheck]:
    """Product law, associativity, convex affinity and duality over random OPFs.

    ``dims`` lists subsystem dimensions; it is cycled to the two factors of
    the product law and the three factors of the associativity check.
    Entangled inputs to a composite OPF are checked separately for staying
    in [0, 1], which the operator form provides and the axioms do not.
    """
    tol = tolerances().opf
    dims = list(dims)
    if not dims or any(d < 1 for d in dims):
        raise DimensionError("dims must be a nonempty list of positive integers")
    pair = (dims[0], dims[1 % len(dims)])
    triple = tuple(dims[k % len(dims)] for k in range(3))
    checks = {
        "product_law": OpfCheck("product_law", tol),
        "associativity": OpfCheck("associativity", tol),
        "convexity": OpfCheck("convexity", tol),
        "duality": OpfCheck("duality", tol),
        "entangled_range": OpfCheck("entangled_range", tol, extension=True),
    }
    for t in range(trials):
        r = rng.substream(t)
        d1, d2 = pair
        f, g = random_opf(d1, r, "f"), random_opf(d2, r, "g")
        psi, phi = random_ray(d1, r), random_ray(d2, r)
        fg = star(f, g)
        lhs = _raw_eval(fg, tensor(psi, phi))
        rhs = opf_eval(f, psi) * opf_eval(g, phi)
        checks["product_law"].record(
            abs(lhs - rhs),
            lambda: {"f": f.to_json(), "g": g.to_json(), "psi": psi.to_json(), "phi": phi.to_json(), "lhs": lhs, "rhs": rhs},
        )

        chi = random_ray(d1 * d2, r)
        value = _raw_eval(fg, chi)
        checks["entangled_range"].record(
            max(0.0, -value, value - 1.0), lambda: {"f": f.to_json(), "g": g.to_json(), "ray": chi.to_json(), "value": value}
        )

        a, b, c = (random_opf(d, r, name) for d, name in zip(triple, "fgh"))
        rays = [random_ray(d, r) for d in triple]
        left, right = star(star(a, b), c), star(a, star(b, c))
        op_diff = float(np.max(np.abs(left.operator - right.operator)))
        joint = tensor(tensor(rays[0], rays[1]), rays[2])
        fn_diff = abs(_raw_eval(left, joint) - _raw_eval(right, joint))
        checks["associativity"].record(
            max(op_diff, fn_diff),
            lambda: {"opfs": [a.to_json(), b.to_json(), c.to_json()], "rays": [x.to_json() for x in rays], "operator_diff": op_diff},
        )

        d = dims[t % len(dims)]
        p = float(r.generator.uniform())
        f1, f2 = random_opf(d, r, "f1"), random_opf(d, r, "f2")
        x = random_ray(d, r)
        mixed = opf_eval(convex_mix(p, f1, f2), x)
        affine = p * opf_eval(f1, x) + (1 - p) * opf_eval(f2, x)
        checks["convexity"].record(
            abs(mixed - affine), lambda: {"p": p, "f1": f1.to_json(), "f2": f2.to_json(), "psi": x.to_json()}
        )

        target, prep = random_ray(d, r), random_ray(d, r)
        as_opf = opf_eval(sharp_opf(target), prep)
        as_rule = born_evaluate(target, RuleContext(complete_basis(prep, r), 0))
        checks["duality"].record(
            abs(as_opf - as_rule), lambda: {"effect": target.to_json(), "preparation": prep.to_json()}
        )
    return checks
