"""Command-line driver: configuration ingestion, suites and reports.

Suites re-run the library's verification checks on a configured instance
and emit one record per check: identifier, law tag, defect, tolerance and
verdict.  Records go to stdout as a table and to one CSV file per suite.
Outputs are deterministic: randomized checks draw from a seeded generator
recorded in the report header.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .algebra import (
    Algebra,
    diagonal_state,
    make_algebra,
    make_state,
    standard_form,
    uniform_state,
)
from .bimodule import (
    gns_tensor,
    left_element_of,
    pi_phi,
    product_formula_defect,
    verify_map,
)
from .cells import (
    CellSystem,
    canonical_unit,
    cp_from_unit,
    generating_rank,
    semigroup_defect,
    unit_report,
)
from .classify import (
    block_permutation_semigroup,
    cocycle_equivalence,
    identity_semigroup,
    inner_semigroup,
)
from .cpdyn import (
    evaluate,
    identity_generator,
    lindblad_generator,
    semigroup_from_generator,
    stochastic_pair_generator,
    unitary_conjugation_generator,
    verify_ucp,
)
from .dilation import (
    TruncationError,
    build_truncation,
    cocycle_from_unit,
    compression_defect,
    continuity_profile,
    corner_isometry_defect,
    minimality_evidence,
    unit_from_cocycle,
    unit_level_vectors,
)
from .heatmarkov import (
    cell_match_defect,
    embed_base_adjoint,
    graph_model,
    heat_dilation_defect,
    heat_kernel,
    make_model,
    path_measure,
)
from .partition import Partition, parse_partition, uniform

DEFAULT_SEED = 20250808

SUITES = ("check-cp", "cells", "refine", "roundtrip", "dilate", "classify", "heat")


@dataclass
class Check:
    suite: str
    check_id: str
    anchor: str
    defect: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.defect <= self.tolerance


@dataclass
class Report:
    suite: str
    seed: int
    checks: list[Check] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def add(self, check_id: str, anchor: str, defect: float, tolerance: float):
        self.checks.append(Check(self.suite, check_id, anchor, float(defect), tolerance))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def complex_matrix(data) -> np.ndarray:
    """Row-major nested lists of [re, im] pairs to a complex matrix."""
    rows = []
    for row in data:
        rows.append([complex(entry[0], entry[1]) for entry in row])
    return np.array(rows, dtype=complex)


def element_from_config(algebra: Algebra, data):
    if len(algebra.blocks) == 1 and data and not isinstance(data[0][0][0], list):
        return algebra.element([complex_matrix(data)])
    return algebra.element([complex_matrix(b) for b in data])


@dataclass
class ExperimentConfig:
    algebra: Algebra
    sf: object
    semigroup: object
    partitions: list[Partition]
    delta: Fraction
    levels: int
    seed: int
    tol_scale: float
    markov_graph: str
    markov_states: int
    markov_model: object
    raw: dict

    def tol(self, value: float) -> float:
        return value * self.tol_scale


def load_config(path: str | None, seed: int | None, tol_scale: float) -> ExperimentConfig:
    raw = {}
    if path:
        with open(path) as fh:
            raw = json.load(fh)
    blocks = raw.get("algebra", [1, 1])
    algebra = make_algebra(blocks)
    state_cfg = raw.get("state", {"weights": [1.0 / len(blocks)] * len(blocks)})
    if "weights" in state_cfg:
        state = diagonal_state(algebra, state_cfg["weights"])
    else:
        state = make_state(algebra, [complex_matrix(b) for b in state_cfg["density"]])
    sf = standard_form(algebra, state)

    sg_cfg = raw.get("semigroup", {"builtin": "stochastic_pair"})
    builtin = sg_cfg.get("builtin")
    if builtin == "stochastic_pair":
        algebra, gen = stochastic_pair_generator()
        state = diagonal_state(algebra, raw.get("state", {}).get("weights", [0.5, 0.5]))
        sf = standard_form(algebra, state)
    elif builtin == "identity":
        gen = identity_generator(algebra)
    elif builtin == "unitary_conjugation":
        h = element_from_config(algebra, sg_cfg["hamiltonian"])
        gen = unitary_conjugation_generator(algebra, h)
    elif builtin == "lindblad":
        jumps = [element_from_config(algebra, j) for j in sg_cfg["jumps"]]
        ham = element_from_config(algebra, sg_cfg["hamiltonian"]) if "hamiltonian" in sg_cfg else None
        gen = lindblad_generator(algebra, jumps, ham)
    elif builtin is None and "generator" in sg_cfg:
        gen = complex_matrix(sg_cfg["generator"])
    else:
        raise ValueError(f"unknown semigroup specification {sg_cfg}")
    semigroup = semigroup_from_generator(algebra, gen)

    partitions = [parse_partition(p) for p in raw.get("partitions", ["1", "1/2,1/2", "1/4,1/4,1/4,1/4"])]
    grid = raw.get("grid", {})
    delta = Fraction(grid.get("delta", "1/4"))
    levels = int(grid.get("levels", 4))
    markov = raw.get("markov", {})
    graph = markov.get("graph", "cycle")
    states = int(markov.get("states", 5))
    model = None
    if "laplacian" in markov:
        model = make_model(markov["mu"], np.array(markov["laplacian"], dtype=float))
    return ExperimentConfig(
        algebra=algebra, sf=sf, semigroup=semigroup, partitions=partitions,
        delta=delta, levels=levels,
        seed=seed if seed is not None else int(raw.get("seed", DEFAULT_SEED)),
        tol_scale=tol_scale, markov_graph=graph, markov_states=states,
        markov_model=model, raw=raw,
    )


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def suite_check_cp(cfg: ExperimentConfig) -> Report:
    rep = Report("check-cp", cfg.seed)
    for k in range(0, cfg.levels + 1):
        t = k * cfg.delta
        u = verify_ucp(evaluate(cfg.semigroup, t), cfg.tol(1e-10))
        rep.add(f"unital[{t}]", "ucp-map", u.unital_defect, cfg.tol(1e-10))
        rep.add(f"choi[{t}]", "ucp-map", max(0.0, -u.choi_min_eigenvalue), cfg.tol(1e-10))
    worst = 0.0
    for s in [cfg.delta, 2 * cfg.delta]:
        for t in [cfg.delta, 3 * cfg.delta]:
            d = np.linalg.norm(
                evaluate(cfg.semigroup, s).action @ evaluate(cfg.semigroup, t).action
                - evaluate(cfg.semigroup, s + t).action, 2)
            worst = max(worst, float(d))
    rep.add("semigroup-law", "semigroup-law", worst, cfg.tol(1e-10))
    return rep


def suite_cells(cfg: ExperimentConfig) -> Report:
    rep = Report("cells", cfg.seed)
    cs = CellSystem(cfg.semigroup, cfg.sf)
    for p in cfg.partitions:
        cell = cs.cell(p)
        rep.add(f"dim{p}={cell.dim}", "cell-construction", 0.0, 1.0)
        if cell.gram_eigs is not None and cell.gram_eigs.size:
            ratio = float(cell.gram_eigs.min() / cell.gram_eigs.max())
            rep.add(f"gram-spread{p}", "cell-construction", 0.0 if ratio > 0 else 1.0, 0.5)
        # composition checked on generator vectors (spanning-family images)
        rng = np.random.default_rng(cfg.seed)
        cols = rng.choice(cell.embed.shape[1], size=min(4, cell.embed.shape[1]), replace=False)
        worst_res = 0.0
        for i in cols:
            for j in cols:
                comp = (pi_phi(cell, cell.embed[:, i], cfg.sf).conj().T
                        @ pi_phi(cell, cell.embed[:, j], cfg.sf))
                _, res = left_element_of(comp, cfg.sf)
                worst_res = max(worst_res, res)
        rep.add(f"bounded-vector{p}", "bounded-vector-composition", worst_res, cfg.tol(1e-10))
    g = gns_tensor(evaluate(cfg.semigroup, cfg.delta), cfg.sf)
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(20):
        xs = []
        for _ in range(4):
            mats = [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
                    for n in cfg.algebra.blocks]
            xs.append(cfg.algebra.element(mats))
        worst = max(worst, product_formula_defect(
            evaluate(cfg.semigroup, cfg.delta), xs[0], xs[1], xs[2], xs[3], cfg.sf, g=g))
    rep.add("product-formula", "bounded-vector-composition", worst, cfg.tol(1e-10))
    return rep


# Largest pre-quotient Gram size a suite is allowed to assemble; generic
# semigroups on matrix blocks grow cell dimensions geometrically in the
# number of parts, so deep chains are only walked while they stay cheap.
_SPACE_BUDGET = 1500


def _build_cell_within_budget(cs: CellSystem, p, budget: int = _SPACE_BUDGET):
    """Build a cell part by part, or return None once an extension is too big."""
    for i in range(1, len(p) + 1):
        if i >= 2:
            prev = cs.cell(Partition(p.parts[:i - 1])).dim
            if prev * cs.gns(p.parts[i - 1]).dim > budget:
                return None
        cell = cs.cell(Partition(p.parts[:i]))
    return cell


def _admissible_dyadic_chain(cs: CellSystem, max_parts: int = 16) -> list:
    chain = [uniform(1, 1)]
    parts = 1
    while parts * 2 <= max_parts:
        if _build_cell_within_budget(cs, uniform(1, parts * 2)) is None:
            break
        chain.append(uniform(1, parts * 2))
        parts *= 2
    return chain


def suite_refine(cfg: ExperimentConfig) -> Report:
    rep = Report("refine", cfg.seed)
    cs = CellSystem(cfg.semigroup, cfg.sf)
    chain = _admissible_dyadic_chain(cs)
    rep.meta["chain-depth"] = str(len(chain[-1]))
    for i in range(len(chain) - 1):
        a = cs.refinement(chain[i + 1], chain[i])
        r = verify_map(a, bilinear=True, isometric=True, tol=cfg.tol(1e-10))
        rep.add(f"isometry[{len(chain[i + 1])}]", "refinement-isometry",
                max(r.bilinear_defect, r.isometry_defect), cfg.tol(1e-10))
    worst = 0.0
    for i in range(len(chain) - 2):
        a10 = cs.refinement(chain[i + 1], chain[i]).matrix
        a21 = cs.refinement(chain[i + 2], chain[i + 1]).matrix
        a20 = cs.refinement(chain[i + 2], chain[i]).matrix
        worst = max(worst, float(np.linalg.norm(a21 @ a10 - a20, 2)))
    rep.add("composition-law", "refinement-functoriality", worst, cfg.tol(1e-10))
    return rep


def suite_roundtrip(cfg: ExperimentConfig) -> Report:
    rep = Report("roundtrip", cfg.seed)
    cs = CellSystem(cfg.semigroup, cfg.sf)
    grid = [k * cfg.delta for k in range(cfg.levels + 1)]
    unit = canonical_unit(cs, grid)
    ur = unit_report(unit)
    rep.add("unit-unital", "unit-axioms", ur.unital_defect, cfg.tol(1e-10))
    rep.add("unit-factorization", "unit-axioms", ur.factorization_defect, cfg.tol(1e-10))
    family = cp_from_unit(unit)
    worst = max(
        float(np.linalg.norm(tm.action - evaluate(cfg.semigroup, t).action, 2))
        for t, tm in family.items()
    )
    rep.add("induced-semigroup", "unit-semigroup-correspondence", worst, cfg.tol(1e-10))
    rep.add("induced-law", "semigroup-law", semigroup_defect(family), cfg.tol(1e-10))
    rank, dim = generating_rank(unit, uniform(cfg.delta * min(cfg.levels, 3),
                                              min(cfg.levels, 3)))
    rep.add("generating-rank", "generating-unit", float(dim - rank), 0.5)
    return rep


def suite_dilate(cfg: ExperimentConfig) -> Report:
    cs = CellSystem(cfg.semigroup, cfg.sf)
    levels = min(cfg.levels, 1)
    while levels < cfg.levels:
        nxt = uniform((levels + 1) * cfg.delta, levels + 1)
        if _build_cell_within_budget(cs, nxt) is None:
            break
        levels += 1
    rep = Report("dilate", cfg.seed,
                 meta={"delta": str(cfg.delta), "levels": str(levels),
                       "horizon": str(levels * cfg.delta)})
    grid = [k * cfg.delta for k in range(levels + 1)]
    unit = canonical_unit(cs, grid)
    tl = build_truncation(cs, unit, cfg.delta, levels)
    worst = 0.0
    residual_rows = [["t", "basis_index", "defect"]]
    for mu, x in enumerate(cfg.algebra.basis()):
        for k in range(1, levels + 1):
            d = compression_defect(tl, k * cfg.delta, x)
            residual_rows.append([str(k * cfg.delta), str(mu), f"{d:.6e}"])
            worst = max(worst, d)
    rep.artifacts["dilate_residuals"] = residual_rows
    rep.add("compression", "dilation-compression", worst, cfg.tol(1e-9))
    mini = minimality_evidence(tl)
    rep.add("minimality", "orbit-span", float(mini.top_dim - mini.span_rank), 0.5)
    prof = continuity_profile(tl)
    rep.add("continuity-sup", "unit-continuity", max(prof.values()), 10.0)
    w = cocycle_from_unit(tl, unit)
    rep.add("cocycle-law", "cocycle-unit-correspondence", w.law_defect(), cfg.tol(1e-9))
    back = unit_from_cocycle(tl, w)
    expected = unit_level_vectors(tl, unit)
    round_defect = max(float(np.linalg.norm(back[t] - expected[t])) for t in back)
    rep.add("cocycle-roundtrip", "cocycle-unit-correspondence", round_defect, cfg.tol(1e-9))
    rep.add("corner-isometry", "cocycle-unit-correspondence",
            corner_isometry_defect(tl, w), cfg.tol(1e-9))
    return rep


def suite_classify(cfg: ExperimentConfig) -> Report:
    rep = Report("classify", cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    alg = make_algebra([2])
    sf = standard_form(alg, uniform_state(alg))
    h = alg.element([_hermitian(rng, 2)])
    g = alg.element([_hermitian(rng, 2)])
    alpha = inner_semigroup(alg, h)
    beta = inner_semigroup(alg, g)
    res = cocycle_equivalence(alpha, beta, cfg.delta, cfg.levels, sf, tol=cfg.tol(1e-9))
    rep.add("perturbed-pair", "cocycle-equivalence",
            res.conjugation_defect if res.equivalent else np.inf, cfg.tol(1e-9))
    if res.equivalent:
        for t, wt in sorted(res.cocycle.items()):
            worst = max((beta.apply(t, x) - wt.adjoint() * alpha.apply(t, x) * wt).norm()
                        for x in alg.basis())
            rep.add(f"conjugation[{t}]", "cocycle-equivalence", worst, cfg.tol(1e-9))
    res_rev = cocycle_equivalence(beta, alpha, cfg.delta, cfg.levels, sf, tol=cfg.tol(1e-9))
    rep.add("symmetric", "cocycle-equivalence",
            0.0 if res_rev.equivalent == res.equivalent else np.inf, 0.5)
    alg2 = make_algebra([1, 1])
    sf2 = standard_form(alg2, diagonal_state(alg2, [0.5, 0.5]))
    swap = block_permutation_semigroup(alg2, (1, 0), cfg.delta)
    res2 = cocycle_equivalence(identity_semigroup(alg2), swap, cfg.delta, cfg.levels, sf2)
    rep.add("distinguishes-permutation", "cocycle-equivalence",
            np.inf if res2.equivalent else 0.0, 0.5)
    return rep


def _hermitian(rng, n):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (x + x.conj().T) / 2


def suite_heat(cfg: ExperimentConfig) -> Report:
    rep = Report("heat", cfg.seed)
    mdl = cfg.markov_model or graph_model(cfg.markov_graph, cfg.markov_states)
    kernel_delta, _ = heat_kernel(mdl, float(cfg.delta))
    rep.artifacts["heat_kernel"] = (
        [["t", str(cfg.delta)]] + [[f"{v:.12e}" for v in row] for row in kernel_delta]
    )
    for t in [float(cfg.delta), 1.0]:
        _, kr = heat_kernel(mdl, t)
        rep.add(f"kernel-symmetry[{t}]", "kernel-properties", kr.symmetry_defect, cfg.tol(1e-12))
        rep.add(f"kernel-mass[{t}]", "kernel-properties", kr.mass_defect, cfg.tol(1e-12))
        rep.add(f"kernel-composition[{t}]", "kernel-properties", kr.composition_defect, cfg.tol(1e-12))
    pm = path_measure(mdl, uniform(1, 2))
    rep.add("path-mass", "path-measure", abs(pm.mass - 1.0), cfg.tol(1e-12))
    sf = mdl.standard_form()
    sg = semigroup_from_generator(sf.algebra, -mdl.laplacian.astype(complex))
    cs = CellSystem(sg, sf)
    for p in [Partition((Fraction(1),)), uniform(1, 2)]:
        defect, dc, dp = cell_match_defect(mdl, p, cs)
        rep.add(f"cell-match{p}", "path-space-cells", defect, cfg.tol(1e-10))
        rep.add(f"cell-dims{p}", "path-space-cells", float(abs(dc - dp)), 0.5)
    rng = np.random.default_rng(cfg.seed)
    f = rng.standard_normal((mdl.states,) * 3)
    p2 = uniform(1, 2)
    base = embed_base_adjoint(mdl, p2, np.ones((mdl.states,) * 3))
    rep.add("adjoint-mass", "base-projection", float(np.abs(base - 1.0).max()), cfg.tol(1e-12))
    direct, formula = heat_dilation_defect(mdl, cfg.delta, min(cfg.levels, 3),
                                           cfg.delta, rng.standard_normal(mdl.states))
    rep.add("dilation-direct", "dilation-compression", direct, cfg.tol(1e-10))
    rep.add("dilation-formula", "base-projection", formula, cfg.tol(1e-10))
    return rep


RUNNERS = {
    "check-cp": suite_check_cp,
    "cells": suite_cells,
    "refine": suite_refine,
    "roundtrip": suite_roundtrip,
    "dilate": suite_dilate,
    "classify": suite_classify,
    "heat": suite_heat,
}


def write_csv(report: Report, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{report.suite}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# seed", report.seed])
        for key, value in sorted(report.meta.items()):
            writer.writerow([f"# {key}", value])
        writer.writerow(["suite", "check_id", "anchor", "defect", "tolerance", "pass"])
        for c in report.checks:
            writer.writerow([c.suite, c.check_id, c.anchor,
                             f"{c.defect:.6e}", f"{c.tolerance:.6e}",
                             "pass" if c.passed else "FAIL"])
    for name, rows in report.artifacts.items():
        with open(out_dir / f"{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerows(rows)
    return path


def print_report(report: Report):
    print(f"== suite {report.suite} (seed {report.seed}) ==")
    width = max((len(c.check_id) for c in report.checks), default=10)
    for c in report.checks:
        verdict = "pass" if c.passed else "FAIL"
        print(f"  {c.check_id:<{width}}  {c.anchor:<32} defect {c.defect:.3e}"
              f"  tol {c.tolerance:.1e}  {verdict}")
    print(f"  -> {'all passed' if report.passed else 'FAILURES PRESENT'}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="prodsys",
        description="Verification suites for cells, dilations and cocycle classification",
    )
    parser.add_argument("suite", choices=SUITES + ("all",))
    parser.add_argument("--config", default=None, help="JSON experiment configuration")
    parser.add_argument("--out", default="reports", help="output directory for CSV reports")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    parser.add_argument("--tol-scale", type=float, default=1.0,
                        help="multiply every tolerance by this factor")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.seed, args.tol_scale)
    except (ValueError, OSError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        try:
            report = RUNNERS[name](cfg)
        except TruncationError as exc:
            print(f"suite {name}: truncation error: {exc}", file=sys.stderr)
            if exc.max_time is not None:
                print(f"  max admissible time: {exc.max_time}", file=sys.stderr)
            ok = False
            continue
        print_report(report)
        path = write_csv(report, Path(args.out))
        print(f"  csv: {path}")
        ok = ok and report.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
