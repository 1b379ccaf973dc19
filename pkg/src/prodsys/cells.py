"""Partition-indexed cells of a CP-semigroup and their product structure.

For a partition p = (t_1, ..., t_n) the cell is the iterated relative
tensor product of the GNS couplings at the part values, built left to
right.  Cells are cached per partition, so the first k intermediate spaces
of a cell coincide (as objects) with the cell of the length-k prefix.
That makes the canonical collapse of cell(prefix) (x) cell(suffix) onto
cell(p) computable by a short recursion over the stored quotient maps.

On top of the cells this module provides the coarse-to-fine refinement
isometries, the multiplication unitaries joining two cells into the cell
of the concatenated partition, canonical units, the completely positive
semigroup induced by a unit, and the isomorphism sending the cells of an
induced semigroup onto any system carrying a generating unital unit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .algebra import AlgebraElement, StandardForm
from .bimodule import (
    Bimodule,
    BimoduleMap,
    gns_tensor,
    l2_bimodule,
    left_element_of,
    pi_phi,
    relative_tensor,
    tensor_vec,
)
from .cpdyn import CpMap, CpSemigroup, evaluate
from .partition import Partition, coarsenings, grouping, join, refines


class CellSystem:
    """Cells, collapses and refinement isometries for one semigroup."""

    def __init__(self, semigroup: CpSemigroup, sf: StandardForm):
        self.semigroup = semigroup
        self.sf = sf
        self.l2 = l2_bimodule(sf)
        self._gns: dict[Fraction, Bimodule] = {}
        self._cells: dict[tuple, Bimodule] = {}
        self._collapse: dict[tuple, np.ndarray] = {}

    # -- spaces -------------------------------------------------------

    def gns(self, t) -> Bimodule:
        t = Fraction(t)
        if t not in self._gns:
            self._gns[t] = gns_tensor(evaluate(self.semigroup, t), self.sf)
        return self._gns[t]

    def cell(self, p: Partition) -> Bimodule:
        """The cell at a partition; the empty partition gives the standard space."""
        key = p.parts
        if key in self._cells:
            return self._cells[key]
        if len(p) == 0:
            space = self.l2
        elif len(p) == 1:
            space = self.gns(p.parts[0])
        else:
            prefix = self.cell(Partition(p.parts[:-1]))
            space = relative_tensor(prefix, self.gns(p.parts[-1]), self.sf)
        self._cells[key] = space
        return space

    def elementary(self, p: Partition, xs: Sequence[AlgebraElement],
                   vs: Sequence[np.ndarray]) -> np.ndarray:
        """Image in cell(p) of the elementary tensor with the given factors.

        xs are the algebra slots, vs the standard-space slots, one pair per
        part of p.
        """
        if len(xs) != len(p) or len(vs) != len(p):
            raise ValueError("one algebra and one vector slot per part expected")
        u = tensor_vec(self.gns(p.parts[0]), xs[0], vs[0])
        for i in range(1, len(p)):
            g = tensor_vec(self.gns(p.parts[i]), xs[i], vs[i])
            u = self.cell(Partition(p.parts[:i + 1])).embed @ np.kron(u, g)
        return u

    # -- canonical collapse -------------------------------------------

    def collapse(self, p: Partition, a: int) -> np.ndarray:
        """Matrix of the canonical map cell(p[:a]) (x) cell(p[a:]) -> cell(p).

        Acts on kron coordinates (prefix index major).  For a = 0 or
        a = len(p) this is the canonical identification with the standard
        space acting through left, respectively right, materialization.
        """
        key = (p.parts, a)
        if key in self._collapse:
            return self._collapse[key]
        n = len(p)
        cellp = self.cell(p)
        d = self.sf.dim
        if a == 0:
            blocks = []
            for j in range(d):
                e = np.zeros(d, dtype=complex)
                e[j] = 1.0
                blocks.append(cellp.left_matrix(self.sf.solve_left(e)))
            m = np.hstack(blocks)
        elif a == n:
            m = np.zeros((cellp.dim, cellp.dim * d), dtype=complex)
            for j in range(d):
                e = np.zeros(d, dtype=complex)
                e[j] = 1.0
                r = cellp.right_matrix(self.sf.solve_right(e))
                m[:, j::d] = r
        else:
            da = self.cell(Partition(p.parts[:a])).dim
            m = self.cell(Partition(p.parts[:a + 1])).embed
            for j in range(a + 2, n + 1):
                g = self.gns(p.parts[j - 1])
                sub = self.cell(Partition(p.parts[a:j]))
                ej = self.cell(Partition(p.parts[:j])).embed
                m = ej @ np.kron(m, np.eye(g.dim)) @ np.kron(np.eye(da), sub.lift)
        self._collapse[key] = m
        return m

    # -- product structure --------------------------------------------

    def multiply(self, q: Partition, p: Partition) -> BimoduleMap:
        """Unitary from cell(q) (x)_M cell(p) onto cell(q joined with p)."""
        r = relative_tensor(self.cell(q), self.cell(p), self.sf)
        j = self.collapse(join(q, p), len(q))
        return BimoduleMap(r, self.cell(join(q, p)), j @ r.lift)

    def refinement(self, p: Partition, q: Partition) -> BimoduleMap:
        """Isometry from the coarse cell(q) into the fine cell(p)."""
        if not refines(p, q):
            raise ValueError(f"{p} does not refine {q}")
        groups = grouping(p, q)
        if not groups:
            return BimoduleMap(self.l2, self.l2, np.eye(self.sf.dim, dtype=complex))
        factor_maps = [self._group_map(g) for g in groups]
        a = factor_maps[0]
        parts_done = len(groups[0])
        for i in range(1, len(groups)):
            jmat = self.collapse(Partition(p.parts[:parts_done + len(groups[i])]), parts_done)
            lift = self.cell(Partition(q.parts[:i + 1])).lift
            a = jmat @ np.kron(a, factor_maps[i]) @ lift
            parts_done += len(groups[i])
        return BimoduleMap(self.cell(q), self.cell(p), a)

    def _group_map(self, sub: Partition) -> np.ndarray:
        """Isometry of one GNS coupling into the cell of a sub-partition.

        An elementary tensor with slots (x, eta) goes to the elementary
        tensor of the sub-partition with x in the first algebra slot, the
        cyclic vector in every intermediate slot and eta in the last one.
        """
        g = self.gns(sub.total)
        if len(sub) == 1:
            return np.eye(g.dim, dtype=complex)
        d = self.sf.dim
        one = self.sf.algebra.identity()
        cyc = self.sf.cyclic
        cols = []
        for mu, x in enumerate(self.sf.algebra.basis()):
            xs = [x] + [one] * (len(sub) - 1)
            for j in range(d):
                e = np.zeros(d, dtype=complex)
                e[j] = 1.0
                vs = [cyc] * (len(sub) - 1) + [e]
                cols.append(self.elementary(sub, xs, vs))
        w = np.column_stack(cols)
        return w @ g.lift


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------

@dataclass
class Unit:
    """A section of single-part cells, with the cyclic vector at time zero."""

    system: CellSystem
    vectors: dict[Fraction, np.ndarray]

    @property
    def times(self) -> list[Fraction]:
        return sorted(t for t in self.vectors if t > 0)

    def scaled(self, rate: float) -> "Unit":
        """Damped unit t -> exp(-rate t) xi(t); contractive for rate >= 0."""
        out = {t: np.exp(-rate * float(t)) * v for t, v in self.vectors.items()}
        out[Fraction(0)] = self.vectors[Fraction(0)]
        return Unit(self.system, out)


def canonical_unit(cs: CellSystem, grid: Sequence) -> Unit:
    """The unit generated by the identity slot over the cyclic vector."""
    vectors: dict[Fraction, np.ndarray] = {Fraction(0): cs.sf.cyclic.copy()}
    one = cs.sf.algebra.identity()
    for t in grid:
        t = Fraction(t)
        if t == 0:
            continue
        vectors[t] = tensor_vec(cs.gns(t), one, cs.sf.cyclic)
    return Unit(cs, vectors)


@dataclass(frozen=True)
class UnitReport:
    unital_defect: float
    contraction_excess: float
    factorization_defect: float


def unit_report(unit: Unit) -> UnitReport:
    """Unitality, contractivity and multiplicativity defects of a unit."""
    cs, sf = unit.system, unit.system.sf
    one = sf.algebra.identity()
    unital, excess, fact = 0.0, 0.0, 0.0
    times = unit.times
    for t in times:
        p = pi_phi(cs.cell(Partition((t,))), unit.vectors[t], sf)
        m, res = left_element_of(p.conj().T @ p, sf)
        unital = max(unital, (m - one).norm(), res)
        excess = max(excess, m.norm() - 1.0)
    for s in times:
        for t in times:
            if (s + t) not in unit.vectors:
                continue
            pair = Partition((s, t))
            v = cs.cell(pair).embed @ np.kron(unit.vectors[s], unit.vectors[t])
            w = cs.refinement(pair, Partition((s + t,))).matrix @ unit.vectors[s + t]
            fact = max(fact, float(np.linalg.norm(v - w)))
    return UnitReport(unital, excess, fact)


def cp_from_unit(unit: Unit) -> dict[Fraction, CpMap]:
    """The completely positive family induced by a unit.

    T_t(x) is the algebra element implementing the composition of the
    bounded-vector maps of xi(t) and of x acting on xi(t).
    """
    cs, sf = unit.system, unit.system.sf
    alg = sf.algebra
    out: dict[Fraction, CpMap] = {}
    for t in unit.vectors:
        if t == 0:
            out[t] = CpMap(alg, np.eye(alg.dim, dtype=complex))
            continue
        cell = cs.cell(Partition((t,)))
        xi = unit.vectors[t]
        p_xi = pi_phi(cell, xi, sf)
        cols = []
        for x in alg.basis():
            p_x = pi_phi(cell, cell.act_left(x, xi), sf)
            m, res = left_element_of(p_xi.conj().T @ p_x, sf)
            if res > 1e-8:
                raise ValueError(f"induced map is not well defined (residual {res:.3e})")
            cols.append(m.vec())
        out[t] = CpMap(alg, np.column_stack(cols))
    return out


def semigroup_defect(maps: dict[Fraction, CpMap]) -> float:
    """Largest composition defect over grid pairs with representable sums."""
    worst = 0.0
    times = [t for t in maps if t > 0]
    for s in times:
        for t in times:
            if (s + t) in maps:
                d = np.linalg.norm(maps[s].action @ maps[t].action - maps[s + t].action, 2)
                worst = max(worst, float(d))
    return worst


def generating_rank(unit: Unit, p: Partition, rtol: float = 1e-10) -> tuple[int, int]:
    """Rank of the span produced by the unit at one partition level.

    Collects, over every coarsening of p, the vectors obtained by filling
    the unit's slots with algebra basis elements and a final right factor,
    refined into cell(p).  Returns (rank, dim of the cell).
    """
    cs, sf = unit.system, unit.system.sf
    basis = list(sf.algebra.basis())
    cols = []
    for c in coarsenings(p):
        if any(t not in unit.vectors for t in c.parts):
            continue
        ref = cs.refinement(p, c).matrix if c != p else np.eye(cs.cell(p).dim)
        m = len(c)
        for combo in np.ndindex(*([len(basis)] * m)):
            vecs = [cs.cell(Partition((c.parts[i],))).act_left(basis[combo[i]], unit.vectors[c.parts[i]])
                    for i in range(m)]
            for y in basis:
                vecs_y = list(vecs)
                vecs_y[-1] = cs.cell(Partition((c.parts[-1],))).right_matrix(y) @ vecs_y[-1]
                u = vecs_y[0]
                for i in range(1, m):
                    u = cs.cell(Partition(c.parts[:i + 1])).embed @ np.kron(u, vecs_y[i])
                cols.append(ref @ u)
    z = np.column_stack(cols)
    sv = np.linalg.svd(z, compute_uv=False)
    rank = int(np.sum(sv > rtol * max(sv[0], 1e-300)))
    return rank, cs.cell(p).dim


def unit_system_isomorphism(
    cs: CellSystem,
    p: Partition,
    target: Bimodule,
    target_elementary: Callable[[Sequence[AlgebraElement], AlgebraElement], np.ndarray],
) -> tuple[BimoduleMap, float]:
    """Isomorphism from cell(p) onto a unit-bearing target at level p.

    The map sends the elementary tensor with algebra slots xs over cyclic
    vectors, and a final right factor y, to the target's multiplied unit
    vectors with the same slots.  Returns the map together with the
    extension defect on the defining family; a generating target makes the
    map unitary, a rank-deficient family shows up in the defect report.
    """
    sf = cs.sf
    basis = list(sf.algebra.basis())
    n = len(p)
    cyc = sf.cyclic
    zcols, vcols = [], []
    for combo in np.ndindex(*([len(basis)] * n)):
        xs = [basis[i] for i in combo]
        for y in basis:
            vs = [cyc] * (n - 1) + [sf.embed_right(y)]
            zcols.append(cs.elementary(p, xs, vs))
            vcols.append(target_elementary(xs, y))
    z = np.column_stack(zcols)
    v = np.column_stack(vcols)
    u, *_ = np.linalg.lstsq(z.conj().T, v.conj().T, rcond=None)
    u = u.conj().T
    defect = float(np.linalg.norm(u @ z - v, 2))
    return BimoduleMap(cs.cell(p), target, u), defect


def cell_target_elementary(cs: CellSystem, unit: Unit, parts: Sequence[Fraction]):
    """Target-side multiplied unit vectors for a cell system with a unit."""
    sf = cs.sf

    def elem(xs: Sequence[AlgebraElement], y: AlgebraElement) -> np.ndarray:
        vecs = []
        for t, x in zip(parts, xs):
            vecs.append(cs.cell(Partition((t,))).act_left(x, unit.vectors[Fraction(t)]))
        vecs[-1] = cs.cell(Partition((parts[-1],))).right_matrix(y) @ vecs[-1]
        u = vecs[0]
        for i in range(1, len(parts)):
            u = cs.cell(Partition(tuple(parts[:i + 1]))).embed @ np.kron(u, vecs[i])
        return u

    return elem
