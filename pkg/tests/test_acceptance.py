"""Acceptance gate: one pass/fail line per criterion, at the stated tolerances.

Lines are printed as each criterion finishes and repeated in the pytest
terminal summary. Run ``python3 -m pytest tests/test_acceptance.py -v``.
"""

import json
import time

import numpy as np

from bornlab.axioms import (
    CHECK_STREAMS,
    Desideratum,
    bargmann_invariant,
    check_opf_algebra,
    default_jobs,
    detect_context_dependence,
    probe_continuity,
    replay,
    run_desiderata,
)
from bornlab.cli import main
from bornlab.gleason import born_assignment, born_frame, conjugated_frame, povm_gleason_fit, reconstruct_density
from bornlab.linalg import OrthonormalBasis, Ray, apply, standard_basis, trace_distance
from bornlab.rules import BornRule, RuleContext, parse_rule
from bornlab.sampling import SeededRng, haar_batch, haar_unitary, random_basis, random_density, random_ray, ray_batch

from conftest import ACCEPTANCE_LINES, ray

REPORTS: dict[str, bytes] = {}


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def cli_report(argv: list[str], path) -> tuple[int, bytes]:
    code = main(argv + ["--deterministic", "-o", str(path)])
    return code, path.read_bytes()


BORN_SUITE = ["check", "--rule", "born", "--dims", "2..8", "--trials", "10000", "--seed", "42"]


def test_criterion_01_born_suite(tmp_path):
    start = time.perf_counter()
    code, data = cli_report(BORN_SUITE + ["--jobs", str(default_jobs())], tmp_path / "born.json")
    elapsed = time.perf_counter() - start
    REPORTS["born"] = data
    report = json.loads(data)
    verdicts = {name: r["verdict"] for name, r in report["results"].items()}
    consistency = max(report["results"][k]["max_discrepancy"] for k in ("ConsistencySum", "ConsistencyDelta"))
    ok = code == 0 and set(verdicts.values()) == {"pass"} and consistency < 1e-9 and elapsed < 60
    verdict(
        1,
        "Born passes all seven desiderata, d=2..8, 1e4 trials",
        ok,
        f"consistency dev {consistency:.2e} < 1e-9; {elapsed:.1f} s on {default_jobs()} core(s) (< 60 s)",
    )


def test_criterion_02_preskill_square_is_born():
    rule, born = parse_rule("preskill:g=x^2"), BornRule()
    worst, n = 0.0, 0
    for d in (2, 3, 4):
        rng = SeededRng(2, (d,))
        total = 3334 if d < 4 else 10_000 - 2 * 3334
        psis, bases = ray_batch(total, d, rng), haar_batch(total, d, rng)
        outcomes = rng.generator.integers(d, size=total)
        for psi, m, i in zip(psis, bases, outcomes):
            psi, ctx = Ray(psi), RuleContext(OrthonormalBasis.from_matrix(m), int(i))
            worst = max(worst, abs(rule.evaluate(psi, ctx) - born.evaluate(psi, ctx)))
            n += 1
    verdict(2, "preskill:g=x^2 equals Born pointwise", n == 10_000 and worst < 1e-12, f"max |diff| {worst:.2e} over {n} triples (< 1e-12)")


def test_criterion_03_preskill_context_witness():
    rule = parse_rule("preskill:g=x")
    psi = ray(1, 1, 1)
    rotated = OrthonormalBasis((ray(1, 0, 0), ray(0, 1, 1), ray(0, 1, -1)))
    doc = abs(rule.evaluate(psi, RuleContext(standard_basis(3), 0)) - rule.evaluate(psi, RuleContext(rotated, 0)))
    exact = abs(1 / 3 - 1 / (1 + np.sqrt(2)))
    res = detect_context_dependence(rule, 3, 1000, SeededRng(7, (CHECK_STREAMS["context"], 3)))
    found = res.witness is not None and res.witness.discrepancy > 0.01
    ok = abs(doc - exact) < 1e-9 and abs(doc - 0.0809) < 5e-5 and found
    first = res.witness.trial if found else None
    verdict(
        3,
        "Preskill g=x context dependence, d=3",
        ok,
        f"documented {doc:.6f} vs {exact:.6f}; random search max {res.max_discrepancy:.4f} "
        f"(> 0.01, worst at trial {first} of 1000, seed 7)",
    )


def test_criterion_04_max_overlap_profile():
    rule = parse_rule("maxoverlap")
    report = run_desiderata(rule, [2, 3, 4], 10_000, 42, jobs=default_jobs())
    names = [Desideratum.CONSISTENCY_SUM, Desideratum.CONSISTENCY_DELTA, Desideratum.UNITARY_INVARIANCE,
             Desideratum.DIMENSION_INDEPENDENCE]
    worst = max(report.combined(d).max_discrepancy for d in names)
    passes = all(report.verdicts()[d] == "pass" for d in names) and worst <= 1e-9
    jump = probe_continuity(rule, 2, 1000, SeededRng(42, (CHECK_STREAMS["continuity"], 2)))
    ctx = detect_context_dependence(rule, 3, 1000, SeededRng(42, (CHECK_STREAMS["context"], 3)))
    ok = passes and jump.failures > 0 and jump.max_discrepancy >= 0.49 and ctx.failures > 0
    verdict(
        4,
        "max-overlap profile",
        ok,
        f"four invariance checks max dev {worst:.1e} over 1e4 trials x d=2..4; "
        f"continuity jump {jump.max_discrepancy:.3f} in d=2; context witness {ctx.max_discrepancy:.3f} in d=3",
    )


def test_criterion_05_gleason_reconstruction():
    start = time.perf_counter()
    worst_td = worst_res = worst_cov = 0.0
    rng = SeededRng(5)
    for k in range(50):
        d = 2 + k % 5
        r = rng.substream(k)
        rho = random_density(d, 1 + (k // 5) % d, r)
        oracle = born_frame(rho)
        fit = reconstruct_density(oracle, r)
        u = haar_unitary(d, r.substream(9))
        moved = reconstruct_density(conjugated_frame(oracle, u), r)
        worst_td = max(worst_td, trace_distance(fit.rho_hat, rho))
        worst_res = max(worst_res, fit.residual_max)
        worst_cov = max(worst_cov, trace_distance(moved.rho_hat, fit.rho_hat.conjugate(u)))
    elapsed = time.perf_counter() - start
    ok = worst_td < 1e-7 and worst_res < 1e-8 and worst_cov < 1e-7 and elapsed < 30
    verdict(
        5,
        "Gleason reconstruction, 50 hidden densities, d=2..6",
        ok,
        f"trace dist {worst_td:.1e}, residual {worst_res:.1e}, covariance {worst_cov:.1e}; {elapsed:.1f} s (< 30 s)",
    )


def test_criterion_06_povm_fit():
    worst_td, least_sum = 0.0, np.inf
    rng = SeededRng(6)
    for k in range(20):
        d = 2 + k % 3
        r = rng.substream(k)
        rho = random_density(d, 1 + k % d, r)
        born = born_assignment(rho)
        worst_td = max(worst_td, trace_distance(povm_gleason_fit(born, d, r).rho_hat, rho))
        squared = povm_gleason_fit(lambda e: born(e) ** 2, d, r)
        least_sum = min(least_sum, squared.residual_basis_sum)
    ok = worst_td < 1e-7 and least_sum > 0.05
    verdict(6, "POVM-form fit, 20 densities, d=2..4", ok,
            f"trace dist {worst_td:.1e} (< 1e-7); squared assignment min residual_basis_sum {least_sum:.3f} (> 0.05)")


def test_criterion_07_opf_algebra():
    details, ok = [], True
    for dims in ([2, 3], [2, 2, 2]):
        checks = check_opf_algebra(dims, 1000, SeededRng(7))
        for name in ("product_law", "associativity", "convexity", "duality"):
            c = checks[name]
            ok &= c.trials_run == 1000 and c.max_discrepancy < 1e-12
        details.append(f"{tuple(dims)}: max {max(c.max_discrepancy for c in checks.values()):.1e}")
    verdict(7, "OPF identities over 1e3 instances", ok, "; ".join(details) + " (< 1e-12)")


def test_criterion_08_bargmann():
    rng = SeededRng(8)
    worst_off = worst_inv = 0.0
    for t in range(10_000):
        d = 2 + t % 5
        basis = random_basis(d, rng)
        psi = random_ray(d, rng)
        i, j = rng.generator.choice(d, size=2, replace=False)
        worst_off = max(worst_off, abs(bargmann_invariant(psi, basis[int(i)], basis[int(j)])))
        a, b, c = (random_ray(d, rng) for _ in range(3))
        u = haar_unitary(d, rng)
        diff = bargmann_invariant(a, b, c) - bargmann_invariant(apply(u, a), apply(u, b), apply(u, c))
        worst_inv = max(worst_inv, abs(diff))
    doc = bargmann_invariant(ray(1, 0), ray(1, 1), ray(1, 1j))
    doc_err = abs(doc - (1 - 1j) / 4)
    ok = worst_off < 1e-12 and worst_inv < 1e-12 and doc_err < 1e-12
    verdict(8, "Bargmann invariants", ok,
            f"off-diagonal {worst_off:.1e}, unitary change {worst_inv:.1e}, (1-i)/4 error {doc_err:.1e} (< 1e-12)")


SELF_TESTS = {
    "first-coordinate": ["check", "--rule", "first-coordinate", "--dims", "2..4", "--trials", "1000", "--seed", "9"],
    "n-scaled": ["check", "--rule", "n-scaled", "--dims", "2..4", "--trials", "1000", "--seed", "9"],
}


def test_criterion_09_self_test(tmp_path):
    ok, details = True, []
    for name, argv in SELF_TESTS.items():
        code, data = cli_report(argv, tmp_path / f"{name}.json")
        REPORTS[name] = data
        rule = parse_rule(name)
        worst = 0.0
        failed = []
        for des, entry in json.loads(data)["results"].items():
            if entry["verdict"] == "fail":
                failed.append(des)
            if "witness" in entry:
                w = entry["witness"]
                worst = max(worst, abs(replay(w, rule)[2] - w["discrepancy"]))
        ok &= code == 1 and bool(failed) and worst < 1e-12
        details.append(f"{name}: exit {code}, failed {'+'.join(failed)}, replay err {worst:.1e}")
    verdict(9, "broken builtin rules are caught", ok, "; ".join(details))


DETERMINISM_RUNS = {
    "born": BORN_SUITE,
    "preskill": ["check", "--rule", "preskill:g=x", "--dims", "3", "--trials", "1000", "--seed", "7"],
    "maxoverlap": ["check", "--rule", "maxoverlap", "--dims", "2..3", "--trials", "1000", "--seed", "42"],
    "reconstruct": ["reconstruct", "--rule", "born", "--dim", "4", "--hidden", "random", "--seed", "5"],
    "povm": ["reconstruct", "--povm", "--dim", "3", "--hidden", "mixed:2", "--assignment", "squared", "--seed", "6"],
    "opf": ["opf-check", "--dims", "2", "2", "2", "--trials", "1000", "--seed", "7"],
    "bargmann": ["bargmann-scan", "--rule", "preskill:g=x", "--dim", "3", "--trials", "200", "--seed", "8"],
    **SELF_TESTS,
}


def test_criterion_10_determinism(tmp_path):
    mismatched = []
    for name, argv in DETERMINISM_RUNS.items():
        runs = [REPORTS[name]] if name in REPORTS else [cli_report(argv, tmp_path / f"{name}-0")[1]]
        runs.append(cli_report(argv, tmp_path / f"{name}-1")[1])
        if runs[0] != runs[1]:
            mismatched.append(name)
    verdict(10, "deterministic reports are byte-identical", not mismatched,
            f"{len(DETERMINISM_RUNS)} commands rerun; mismatches: {mismatched or 'none'}")
