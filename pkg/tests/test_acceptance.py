"""Acceptance suite: every shipped config run through the command line front end.

Each criterion runs its config once (shared through a module fixture),
checks the exit status, the runtime budget and the row content of the CSVs,
and records one line that ``conftest.py`` prints at the end of the session.
The determinism criterion runs the whole suite a second time and compares
bytes.
"""

import csv
import time

import pytest

import conftest
from multiinterp import cli

pytestmark = pytest.mark.acceptance

CONFIGS = {
    1: "boyd_indices.cfg",
    2: "k_functional.cfg",
    3: "phi_analytic.cfg",
    4: "structural.cfg",
    5: "reiteration.cfg",
    6: "sobolev_besov.cfg",
    7: "lorentz.cfg",
}

# runtime budgets in seconds
BUDGET = {1: 5.0, 2: 60.0, 3: 10.0, 4: 300.0, 5: 300.0, 6: 600.0, 7: 300.0}


def run_config(number, out):
    lines = []
    t0 = time.perf_counter()
    status = cli.run(overrides=["--config", str(cli.shipped_config(CONFIGS[number])), "--out", str(out)],
                     log=lambda *args, **kwargs: lines.append(" ".join(map(str, args))))
    return status, time.perf_counter() - t0, lines


class Run:
    def __init__(self, root):
        self.root = root
        self.results = {}

    def get(self, number):
        if number not in self.results:
            self.results[number] = run_config(number, self.root / str(number))
        return self.results[number]

    def rows(self, number, block):
        with open(self.root / str(number) / f"{block}.csv", newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def first(tmp_path_factory):
    return Run(tmp_path_factory.mktemp("first"))


def record(number, ok, message):
    conftest.ACCEPTANCE_LINES[number] = (ok, message)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {message}")


def passing(rows, name):
    sel = [r for r in rows if r["check_name"] == name]
    return sel, all(r["pass"] == "true" for r in sel)


def check_criterion(first, number, content):
    """Run, evaluate ``content(first) -> (ok, detail)`` and record the verdict."""
    status, seconds, lines = first.get(number)
    ok, detail = content(first) if status == cli.EXIT_OK else (False, "; ".join(lines[-3:]))
    ok = ok and status == cli.EXIT_OK and seconds < BUDGET[number]
    record(number, ok, f"{CONFIGS[number]}: exit {status}, {seconds:.1f} s (budget {BUDGET[number]:.0f} s), {detail}")
    assert status == cli.EXIT_OK, lines
    assert seconds < BUDGET[number]
    assert ok, detail


class TestAcceptance:
    def test_criterion_1_boyd(self, first):
        def content(run):
            idx, ok1 = passing(run.rows(1, "indices"), "indices")
            dil, ok2 = passing(run.rows(1, "dilation"), "dilation")
            worst = max(float(r["ratio"]) for r in idx)
            ok = ok1 and ok2 and len(idx) == 40 and len(dil) == 20
            return ok, f"20 atoms, worst index deviation {worst:.2e}"

        check_criterion(first, 1, content)

    def test_criterion_2_k_functional(self, first):
        def content(run):
            rows = run.rows(2, "oracle")
            val, ok1 = passing(rows, "oracle")
            gap, ok2 = passing(rows, "oracle_gap")
            ok = ok1 and ok2 and len(val) == 50 and len(gap) == 50
            ok = ok and all(float(r["tolerance"]) == 1e-6 for r in gap)
            return ok, f"50 instances, worst relative error {max(abs(float(r['ratio']) - 1) for r in val):.2e}"

        check_criterion(first, 2, content)

    def test_criterion_3_phi_analytic(self, first):
        def content(run):
            rows, ok = passing(run.rows(3, "phi_analytic"), "phi_analytic")
            ok = ok and len(rows) == 3 and all(float(r["tolerance"]) == 1e-6 for r in rows)
            return ok, f"3 analytic cases, worst relative error {max(abs(float(r['ratio']) - 1) for r in rows):.2e}"

        check_criterion(first, 3, content)

    def test_criterion_4_structural(self, first):
        def content(run):
            counts = {}
            ok = True
            for block in ("permutation", "reduction", "power", "p_monotone", "j_into_k", "operator"):
                rows, good = passing(run.rows(4, block), block)
                counts[block] = len(rows)
                ok = ok and good
            ok = ok and all(counts[b] == 20 for b in ("permutation", "reduction", "power"))
            ok = ok and counts["operator"] == 50
            return ok, ", ".join(f"{b} {c}" for b, c in counts.items())

        check_criterion(first, 4, content)

    def test_criterion_5_reiteration(self, first):
        def content(run):
            couple, ok1 = passing(run.rows(5, "couple"), "couple")
            quad, ok2 = passing(run.rows(5, "quadrilateral"), "quadrilateral")
            ok = ok1 and ok2 and len(couple) >= 1 and len(quad) >= 1
            ok = ok and all(float(r["tolerance"]) == 10.0 for r in couple + quad)
            return ok, f"couple {len(couple)} rows, triple of four points {len(quad)} row"

        check_criterion(first, 5, content)

    def test_criterion_6_sobolev_besov(self, first):
        def content(run):
            ok = True
            drifts = []
            for block in ("classical", "triple_increasing", "triple_mixed"):
                rows = run.rows(6, block)
                main, good1 = passing(rows, block)
                width, good2 = passing(rows, f"{block}_width")
                sizes = {r["instance_id"].split("-")[0] for r in main}
                ok = ok and good1 and good2 and len(main) >= 3 * 20 and len(width) >= 1 and len(sizes) == 3
                drifts += [float(r["ratio"]) - 1.0 for r in width]
            return ok, f"3 cases, {len(main) // 3} signals per size, worst drift {max(drifts):.3f}"

        check_criterion(first, 6, content)

    def test_criterion_7_lorentz(self, first):
        def content(run):
            lam, ok1 = passing(run.rows(7, "lambda_oracle"), "lambda_oracle")
            sw, ok2 = passing(run.rows(7, "stein_weiss"), "stein_weiss")
            three = run.rows(7, "three_space")
            t_rows, ok3 = passing(three, "three_space")
            col, ok4 = passing(three, "three_space_collinear")
            two = run.rows(7, "two_space")
            main, ok5 = passing(two, "two_space")
            control, ok6 = passing(two, "two_space_control")
            naive = [r for r in two if r["check_name"] == "two_space_naive"]
            naive_failed = sum(r["pass"] == "false" for r in naive)
            ok = all((ok1, ok2, ok3, ok4, ok5, ok6)) and len(lam) == 100 and len(main) == 10
            ok = ok and len(col) >= 1 and len(naive) == 10 and naive_failed >= 8
            return ok, (f"oracle worst {max(abs(float(r['ratio']) - 1) for r in lam):.1e}, three-space {len(t_rows)} rows, "
                        f"collinear rejected {len(col)}, naive control failed {naive_failed}/10")

        check_criterion(first, 7, content)

    def test_criterion_8_determinism(self, first, tmp_path):
        second = Run(tmp_path)
        differing = []
        files = 0
        for number in CONFIGS:
            first.get(number)
            second.get(number)
            for path in sorted((first.root / str(number)).glob("*.csv")):
                files += 1
                other = second.root / str(number) / path.name
                if not other.exists() or other.read_bytes() != path.read_bytes():
                    differing.append(f"{number}/{path.name}")
        ok = files > 0 and not differing
        record(8, ok, f"{files} CSV files compared, {len(differing)} differ {differing}")
        assert ok, differing
