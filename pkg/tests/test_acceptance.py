"""Acceptance suite: one test per acceptance criterion, each printing a
single pass/fail line.

The two physical-driver sweeps are expensive; they run once in
session-scoped fixtures and every criterion that needs them reads from the
cached results.  Run with ``pytest -s tests/test_acceptance.py`` to see the
per-criterion lines as they happen.
"""

import time

import numpy as np
import pytest

from proxyrb.linalg import cpqr_select, project_out
from proxyrb.offline import (
    Thresholds,
    additional_skeletons,
    get_skeletons,
    run_offline,
    solve_fine_skeletons,
)
from proxyrb.online import assemble_reduced_operator, batch_evaluate
from proxyrb.oracle import choose_column_plan, choose_entry_plan, coarse_sweep, sample_operators
from proxyrb.problems.affine import AffineConfig, AffineFamilyProblem
from proxyrb.problems.laplace_bie import (
    BieConfig,
    LaplaceBieProblem,
    PolarDomain,
    discretize_boundary,
    double_layer_block,
)
from proxyrb.problems.transport import RteConfig, RteMedium, TransportProblem, attenuation_kernel

BIE_EPSILONS = (2e-3, 1e-3, 5e-4, 2e-4, 1e-4)
RTE_EPSILONS = (1e-2, 5e-3, 2e-3, 1e-3)


def _line(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    tail = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {num} {name}: {status}{tail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def _run_sweep(problem, epsilons, seed=0):
    omega = problem.sample_space()
    t0 = time.perf_counter()
    reference = np.column_stack([problem.fine_solve(s).solution for s in omega])
    t_fine = time.perf_counter() - t0
    results = {}
    for eps in epsilons:
        model = run_offline(problem, Thresholds(eps), seed=seed)
        report = batch_evaluate(
            model, problem, omega, with_reference=True, reference=reference, t_fine=t_fine
        )
        results[eps] = {"model": model, "report": report}
    return {
        "problem": problem,
        "omega": omega,
        "reference": reference,
        "t_fine": t_fine,
        "results": results,
        "elapsed": time.perf_counter() - t0,
    }


@pytest.fixture(scope="session")
def bie_sweep():
    problem = LaplaceBieProblem(
        BieConfig(n_fine=512, n_coarse=64, n_samples=1024, kappa=0.4, seed=0)
    )
    return _run_sweep(problem, BIE_EPSILONS)


@pytest.fixture(scope="session")
def rte_sweep():
    return _run_sweep(TransportProblem(RteConfig()), RTE_EPSILONS)


class TestCriterion1AffineExactness:
    def test_affine_exactness(self):
        t0 = time.perf_counter()
        problem = AffineFamilyProblem(
            AffineConfig(dimension=64, rank=3, n_samples=200, seed=0)
        )
        model = run_offline(problem, Thresholds(1e-8), seed=0, operator_columns=4)
        omega = problem.sample_space()
        report = batch_evaluate(model, problem, omega, with_reference=True)
        worst_op = 0.0
        q = model.basis
        for i in range(omega.size):
            dense = problem.operator_handle(omega[i]).project(q)
            interp = assemble_reduced_operator(model, i)
            worst_op = max(
                worst_op, np.linalg.norm(interp - dense) / np.linalg.norm(dense)
            )
        elapsed = time.perf_counter() - t0
        ok = report.mean_error <= 1e-7 and worst_op <= 1e-9 and elapsed < 30.0
        _line(
            1,
            "affine exactness",
            ok,
            f"mean={report.mean_error:.2e} op={worst_op:.2e} t={elapsed:.1f}s",
        )


class TestCriterion2SkeletonSelfConsistency:
    def test_skeleton_self_consistency(self, bie_sweep, rte_sweep):
        worst = []
        ok = True
        # The skeleton set here is the CPQR selection from the coarse sweep.
        # Enrichment additions are excluded: they are chosen for operator
        # coverage, and their solutions may sit far below the leading
        # singular value, so relative-to-sigma_1 basis truncation does not
        # bound their individual relative errors.
        for label, sweep in (("bie", bie_sweep), ("rte", rte_sweep)):
            for eps, res in sweep["results"].items():
                idx = res["model"].skeleton_indices
                errs = res["report"].errors[idx]
                worst.append(f"{label}@{eps:g}:{np.max(errs):.2e}")
                ok = ok and np.all(errs <= 10.0 * eps)
        _line(2, "skeleton self-consistency", ok, " ".join(worst))


class TestCriterion3BieConvergence:
    def test_bie_convergence_trend(self, bie_sweep):
        errs = [bie_sweep["results"][eps]["report"].mean_error for eps in BIE_EPSILONS]
        strictly_decreasing = all(b < a for a, b in zip(errs, errs[1:]))
        slope = float(
            np.polyfit(np.log(np.array(BIE_EPSILONS)), np.log(errs), 1)[0]
        )
        ok = (
            strictly_decreasing
            and 0.5 <= slope <= 1.5
            and bie_sweep["elapsed"] < 20 * 60
        )
        _line(
            3,
            "BIE convergence trend",
            ok,
            f"errors={['%.2e' % e for e in errs]} slope={slope:.2f} "
            f"t={bie_sweep['elapsed']:.0f}s",
        )


class TestCriterion4RteConvergence:
    def test_rte_convergence_trend(self, rte_sweep):
        errs = [rte_sweep["results"][eps]["report"].mean_error for eps in RTE_EPSILONS]
        monotone = all(b <= a for a, b in zip(errs, errs[1:]))
        ok = monotone and rte_sweep["elapsed"] < 30 * 60
        _line(
            4,
            "RTE convergence trend",
            ok,
            f"errors={['%.2e' % e for e in errs]} t={rte_sweep['elapsed']:.0f}s",
        )


class TestCriterion5Speedup:
    def test_speedup_at_loosest_epsilon(self, bie_sweep, rte_sweep):
        speedups = {}
        for label, sweep, eps in (
            ("bie", bie_sweep, BIE_EPSILONS[0]),
            ("rte", rte_sweep, RTE_EPSILONS[0]),
        ):
            res = sweep["results"][eps]
            total = res["model"].timings["t_offline"] + res["report"].t_online
            speedups[label] = sweep["t_fine"] / total
        ok = all(v > 2.0 for v in speedups.values())
        _line(
            5,
            "speedup > 2",
            ok,
            " ".join(f"{k}={v:.1f}x" for k, v in speedups.items()),
        )


class TestCriterion6EnrichmentFixedPoint:
    @staticmethod
    def _fixed_point(problem, eps, plan_builder):
        omega = problem.sample_space()
        coarse = coarse_sweep(problem, omega)
        skeletons = solve_fine_skeletons(problem, omega, get_skeletons(coarse, eps))
        rng = np.random.default_rng(0)
        plan = plan_builder(problem.fine_dim, skeletons.size, rng)
        samples = sample_operators(problem, omega, plan)
        thresholds = Thresholds(eps)
        once = additional_skeletons(samples, skeletons, thresholds, problem, omega)
        twice = additional_skeletons(samples, once, thresholds, problem, omega)
        return twice.additional_indices.size == once.additional_indices.size

    def test_second_pass_selects_nothing(self):
        entry_plan = lambda n, s, rng: choose_entry_plan(n, max(8 * s, 8), rng)
        cases = {
            "affine": self._fixed_point(
                AffineFamilyProblem(AffineConfig(dimension=64, rank=3, n_samples=200)),
                1e-8,
                lambda n, s, rng: choose_column_plan(n, 4, rng),
            ),
            "bie": self._fixed_point(
                LaplaceBieProblem(
                    BieConfig(n_fine=256, n_coarse=64, n_samples=256, seed=0)
                ),
                1e-3,
                entry_plan,
            ),
            "rte": self._fixed_point(
                TransportProblem(RteConfig(n_fine=16, n_coarse=8)),
                5e-3,
                entry_plan,
            ),
        }
        ok = all(cases.values())
        _line(
            6,
            "enrichment fixed point",
            ok,
            " ".join(f"{k}={'ok' if v else 'grew'}" for k, v in cases.items()),
        )


class TestCriterion7KernelOracles:
    def test_kernel_oracles(self):
        t0 = time.perf_counter()
        # Attenuation kernel vs brute-force line integral on 100 triples.
        rng = np.random.default_rng(7)
        taus = np.linspace(0.0, 1.0, 100_000)
        worst_rte = 0.0
        for _ in range(100):
            medium = RteMedium(
                float(rng.uniform(0, 10)),
                (float(rng.uniform(0, 1)), float(rng.uniform(0, 1))),
                float(rng.uniform(0.2, 0.6)),
            )
            x, y = rng.uniform(0, 1, 2), rng.uniform(0, 1, 2)
            r = np.linalg.norm(x - y)
            if r < 1e-6:
                continue
            pts = x[None, :] - taus[:, None] * (x - y)[None, :]
            line = np.trapezoid(medium.mu(pts), taus)
            oracle = np.exp(-r * line) / (2 * np.pi * r)
            rel = abs(float(attenuation_kernel(x, y, medium)) - oracle) / oracle
            worst_rte = max(worst_rte, rel)

        # BIE circle Gauss identity vs a 16x-refined quadrature.
        disc = discretize_boundary(PolarDomain(np.ones(8)), 64)
        fine = discretize_boundary(PolarDomain(np.ones(8)), 16 * 64)
        sums = double_layer_block(disc).sum(axis=1)
        oracle_sum = double_layer_block(fine).sum(axis=1)[0]
        worst_bie = float(np.max(np.abs(sums - oracle_sum)))
        elapsed = time.perf_counter() - t0
        ok = worst_rte <= 1e-8 and worst_bie <= 1e-8 and elapsed < 60.0
        _line(
            7,
            "kernel oracles",
            ok,
            f"rte={worst_rte:.2e} bie={worst_bie:.2e} t={elapsed:.1f}s",
        )


class TestCriterion8Determinism:
    def test_sweep_csv_determinism(self, tmp_path):
        import csv

        from proxyrb.cli import SWEEP_HEADER, main

        cfg = tmp_path / "run.ini"
        cfg.write_text(
            """
[run]
problem = synthetic_affine
seed = 0

[thresholds]
epsilon = 1e-4, 1e-6, 1e-8

[pipeline]
operator_columns = 4

[synthetic_affine]
dimension = 32
rank = 3
samples = 60
"""
        )
        timing_cols = {
            SWEEP_HEADER.index(c) for c in ("t_offline", "t_online", "t_fine", "speedup")
        }
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
            rows = list(csv.reader(open(out / "sweep.csv", newline="")))
            outputs.append(
                [[v for k, v in enumerate(r) if k not in timing_cols] for r in rows]
            )
            conv = (out / "convergence.csv").read_bytes()
            outputs.append(conv)
        ok = outputs[0] == outputs[2] and outputs[1] == outputs[3]
        _line(8, "CSV determinism", ok)


class TestCriterion9NumericsSuite:
    def test_cpqr_against_greedy_oracle(self):
        # The [TRIVIAL]/[DERIVED] numerics examples run in test_linalg.py as
        # part of the same session; here the greedy column-selection oracle
        # check is repeated explicitly as the acceptance gate.
        rng = np.random.default_rng(42)
        ok = True
        worst = 0.0
        for _ in range(50):
            rows = int(rng.integers(2, 21))
            cols = int(rng.integers(2, 21))
            m = rng.standard_normal((rows, cols))
            eps = 10.0 ** rng.uniform(-8, -1)
            sel = cpqr_select(m, eps)
            residual = m.copy()
            chosen = []
            for _ in range(sel.kept):
                norms = np.linalg.norm(residual, axis=0)
                norms[chosen] = -1.0
                j = int(np.argmax(norms))
                chosen.append(j)
                u = residual[:, j] / norms[j]
                residual -= np.outer(u, u @ residual)
            r_cpqr = np.linalg.norm(project_out(m, m[:, sel.permutation[: sel.kept]]))
            r_oracle = np.linalg.norm(project_out(m, m[:, chosen]))
            ratio = r_cpqr / max(r_oracle, 1e-12 * np.linalg.norm(m))
            worst = max(worst, ratio)
            ok = ok and r_cpqr <= max(2.0 * r_oracle, 1e-12 * np.linalg.norm(m))
        _line(9, "numerics suite vs greedy CPQR oracle", ok, f"worst ratio={worst:.2f}")
