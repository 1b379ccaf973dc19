"""Endomorphism semigroups, twisted cells and cocycle classification.

An endomorphism semigroup acting on the standard space by a twisted left
action gives, for each time, a copy of the standard space whose left action
is routed through the endomorphism.  These twisted cells multiply by
materializing the first factor and pushing it through the endomorphism,
which makes the cyclic vectors a generating unital unit.  Two semigroups
are cocycle equivalent exactly when their twisted systems are isomorphic;
the solver looks for the intertwiner at the grid step, extends it by the
cocycle law and certifies the conjugation identity at every grid time.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .algebra import Algebra, AlgebraElement, StandardForm, lmult_matrix, rmult_matrix
from .bimodule import Bimodule, BimoduleMap, left_element_of, pi_phi
from .cells import CellSystem
from .partition import Partition


@dataclass
class E0Semigroup:
    """Family of unital endomorphisms given by a coordinate-action callable."""

    algebra: Algebra
    action_at: Callable[[Fraction], np.ndarray]
    label: str = "custom"

    def map_at(self, t) -> np.ndarray:
        return self.action_at(Fraction(t))

    def apply(self, t, x: AlgebraElement) -> AlgebraElement:
        return self.algebra.from_vec(self.map_at(t) @ x.vec())


def inner_semigroup(algebra: Algebra, h: AlgebraElement) -> E0Semigroup:
    """Conjugation by the unitary group of a Hermitian element."""
    herm = max(np.linalg.norm(m - m.conj().T) for m in h.mats)
    if herm > 1e-12:
        raise ValueError("inner semigroup needs a Hermitian element")

    def action(t: Fraction) -> np.ndarray:
        blocks = []
        for hb, n in zip(h.mats, algebra.blocks):
            u = scipy.linalg.expm(1j * float(t) * hb)
            blocks.append(np.kron(u.conj().T, u.T))
        return scipy.linalg.block_diag(*blocks)

    return E0Semigroup(algebra, action, label="inner")


def identity_semigroup(algebra: Algebra) -> E0Semigroup:
    eye = np.eye(algebra.dim, dtype=complex)
    return E0Semigroup(algebra, lambda t: eye, label="identity")


def block_permutation_semigroup(algebra: Algebra, perm: Sequence[int], delta) -> E0Semigroup:
    """Grid semigroup cycling the blocks by powers of a permutation.

    Only defined at multiples of the grid step.  The permuted blocks must
    have equal sizes so that the coordinate shuffle is a *-endomorphism.
    """
    perm = tuple(perm)
    sizes = algebra.blocks
    if sorted(perm) != list(range(len(sizes))):
        raise ValueError(f"not a permutation of blocks: {perm}")
    if any(sizes[i] != sizes[perm[i]] for i in range(len(sizes))):
        raise ValueError("permuted blocks must have equal sizes")
    delta = Fraction(delta)
    base = np.zeros((algebra.dim, algebra.dim), dtype=complex)
    offs = np.cumsum([0] + [n * n for n in sizes])
    # Output block i carries input block perm[i].
    for i in range(len(sizes)):
        src = perm[i]
        base[offs[i]:offs[i + 1], offs[src]:offs[src + 1]] = np.eye(sizes[i] ** 2)

    def action(t: Fraction) -> np.ndarray:
        k = t / delta
        if k.denominator != 1 or k < 0:
            raise ValueError(f"time {t} is not a multiple of the grid step {delta}")
        return np.linalg.matrix_power(base, int(k))

    return E0Semigroup(algebra, action, label="block_permutation")


@dataclass(frozen=True)
class EndomorphismReport:
    multiplicative_defect: float
    adjoint_defect: float
    unital_defect: float

    def passed(self, tol: float) -> bool:
        return max(self.multiplicative_defect, self.adjoint_defect, self.unital_defect) <= tol


def endomorphism_report(theta: E0Semigroup, t) -> EndomorphismReport:
    alg = theta.algebra
    basis = list(alg.basis())
    mult = 0.0
    adj = 0.0
    for x in basis:
        tx = theta.apply(t, x)
        adj = max(adj, (theta.apply(t, x.adjoint()) - tx.adjoint()).norm())
        for y in basis:
            mult = max(mult, (theta.apply(t, x * y) - tx * theta.apply(t, y)).norm())
    one = alg.identity()
    return EndomorphismReport(mult, adj, (theta.apply(t, one) - one).norm())


def semigroup_law_defect(theta: E0Semigroup, times: Sequence) -> float:
    worst = 0.0
    ts = [Fraction(t) for t in times]
    for s in ts:
        for t in ts:
            d = np.linalg.norm(theta.map_at(s) @ theta.map_at(t) - theta.map_at(s + t), 2)
            worst = max(worst, float(d))
    return worst


# ---------------------------------------------------------------------------
# Twisted cells
# ---------------------------------------------------------------------------

def twisted_cell(theta: E0Semigroup, t, sf: StandardForm) -> Bimodule:
    """Standard space with left action routed through the endomorphism."""
    basis = list(sf.algebra.basis())
    left = np.stack([lmult_matrix(theta.apply(t, x)) for x in basis])
    right = np.stack([rmult_matrix(x) for x in basis])
    d = sf.dim
    return Bimodule(sf.algebra, d, left, right, "twisted",
                    embed=np.eye(d), lift=np.eye(d))


class TwistedSystem:
    """The product system of twisted cells with its explicit multiplication."""

    def __init__(self, theta: E0Semigroup, sf: StandardForm):
        self.theta = theta
        self.sf = sf
        self._cells: dict[Fraction, Bimodule] = {}

    def cell(self, t) -> Bimodule:
        t = Fraction(t)
        if t not in self._cells:
            self._cells[t] = twisted_cell(self.theta, t, self.sf)
        return self._cells[t]

    def unit_vector(self, t) -> np.ndarray:
        return self.sf.cyclic.copy()

    def multiply_kron(self, s, t) -> np.ndarray:
        """Multiplication on kron coordinates of cell(s) (x) cell(t).

        The first factor is materialized from the left against the cyclic
        vector and pushed through the endomorphism at the second time.
        """
        d = self.sf.dim
        cols = np.zeros((d, d * d), dtype=complex)
        for a in range(d):
            e = np.zeros(d, dtype=complex)
            e[a] = 1.0
            m = lmult_matrix(self.theta.apply(t, self.sf.solve_left(e)))
            cols[:, a * d:(a + 1) * d] = m
        return cols

    def fold(self, parts: Sequence[Fraction], xs: Sequence[AlgebraElement],
             ys: Sequence[AlgebraElement]) -> np.ndarray:
        """Multiplied elementary vector with nested endomorphism images."""
        acc = None
        for t, x, y in zip(parts, xs, ys):
            step = self.theta.apply(t, x if acc is None else acc * x)
            acc = step * y
        return self.sf.embed_left(acc)

    def elementary(self, parts: Sequence[Fraction]):
        one = self.sf.algebra.identity()

        def elem(xs: Sequence[AlgebraElement], y: AlgebraElement) -> np.ndarray:
            ys = [one] * (len(parts) - 1) + [y]
            return self.fold(parts, xs, ys)

        return elem


def twisted_cp_defect(ts: TwistedSystem, t, tol: float = 1e-10) -> float:
    """Defect of the unit of the twisted system inducing the endomorphism back."""
    sf = ts.sf
    cell = ts.cell(t)
    xi = ts.unit_vector(t)
    p_xi = pi_phi(cell, xi, sf)
    worst = 0.0
    for x in sf.algebra.basis():
        p_x = pi_phi(cell, cell.act_left(x, xi), sf)
        m, res = left_element_of(p_xi.conj().T @ p_x, sf)
        worst = max(worst, res, (m - ts.theta.apply(t, x)).norm())
    return worst


def canonical_iso(theta: E0Semigroup, cs: CellSystem, p: Partition,
                  ts: TwistedSystem | None = None) -> tuple[BimoduleMap, float]:
    """Collapse of the semigroup cell at p onto the twisted cell of its total.

    Elementary tensors go to the nested endomorphism images of their slots;
    the defect reported is the extension residual on the defining family.
    """
    sf = cs.sf
    if ts is None:
        ts = TwistedSystem(theta, sf)
    basis = list(sf.algebra.basis())
    n = len(p)
    zcols, vcols = [], []
    for combo in np.ndindex(*([len(basis)] * (2 * n))):
        xs = [basis[combo[2 * i]] for i in range(n)]
        ys = [basis[combo[2 * i + 1]] for i in range(n)]
        vs = [sf.embed_left(y) for y in ys]
        zcols.append(cs.elementary(p, xs, vs))
        vcols.append(ts.fold(p.parts, xs, ys))
    z = np.column_stack(zcols)
    v = np.column_stack(vcols)
    u, *_ = np.linalg.lstsq(z.conj().T, v.conj().T, rcond=None)
    u = u.conj().T
    defect = float(np.linalg.norm(u @ z - v, 2))
    return BimoduleMap(cs.cell(p), ts.cell(p.total), u), defect


# ---------------------------------------------------------------------------
# Cocycle equivalence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    cocycle: dict[Fraction, AlgebraElement] | None
    conjugation_defect: float
    cocycle_law_defect: float
    failures: tuple = ()

    @property
    def first_failing_time(self) -> Fraction | None:
        return self.failures[0][0] if self.failures else None


def _intertwiner_space(alpha_t: np.ndarray, beta_t: np.ndarray,
                       algebra: Algebra) -> np.ndarray:
    """Basis of {m : m beta_t(x) = alpha_t(x) m for all x}, as columns."""
    rows = []
    for x in algebra.basis():
        bx = algebra.from_vec(beta_t @ x.vec())
        ax = algebra.from_vec(alpha_t @ x.vec())
        rows.append(rmult_matrix(bx) - lmult_matrix(ax))
    stack = np.vstack(rows)
    _, s, vh = np.linalg.svd(stack)
    tolcut = max(stack.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0)
    null_dim = int(np.sum(s <= tolcut)) + (stack.shape[1] - len(s))
    if null_dim == 0:
        return np.zeros((algebra.dim, 0))
    return vh.conj().T[:, -null_dim:]


def _nearest_unitary(algebra: Algebra, m: AlgebraElement) -> AlgebraElement | None:
    blocks = []
    for b in m.mats:
        u, _ = scipy.linalg.polar(b)
        if not np.isfinite(u).all():
            return None
        blocks.append(u)
    cand = algebra.element(blocks)
    defect = max(np.linalg.norm(c.conj().T @ c - np.eye(c.shape[0])) for c in cand.mats)
    if defect > 1e-8:
        return None
    return cand


def cocycle_equivalence(alpha: E0Semigroup, beta: E0Semigroup,
                        delta, levels: int, sf: StandardForm,
                        tol: float = 1e-9,
                        cocycle: dict | None = None) -> EquivalenceReport:
    """Decide cocycle equivalence on a grid and certify the witness.

    Forward mode solves the twisted-cell intertwiner equation at the grid
    step, corrects to the nearest unitary, extends along the grid by the
    cocycle law, and accepts only if the conjugation identity holds at
    every grid time.  Backward mode verifies a declared cocycle instead.
    Failures carry the first grid time at which certification broke down.
    """
    algebra = alpha.algebra
    delta = Fraction(delta)
    times = [delta * k for k in range(1, levels + 1)]
    failures = []

    for t in times:
        rep = endomorphism_report(beta, t)
        if not rep.passed(1e-9):
            failures.append((t, "beta is not an endomorphism", max(
                rep.multiplicative_defect, rep.adjoint_defect, rep.unital_defect)))
            return EquivalenceReport(False, None, np.inf, np.inf, tuple(failures))

    if cocycle is None:
        space = _intertwiner_space(alpha.map_at(delta), beta.map_at(delta), algebra)
        w_delta = None
        for i in range(space.shape[1]):
            cand = _nearest_unitary(algebra, algebra.from_vec(space[:, i]))
            if cand is not None:
                w_delta = cand
                break
        if w_delta is None and space.shape[1] > 1:
            mixed = algebra.from_vec(space.sum(axis=1))
            w_delta = _nearest_unitary(algebra, mixed)
        if w_delta is None:
            failures.append((delta, "no unitary intertwiner at the grid step", np.inf))
            return EquivalenceReport(False, None, np.inf, np.inf, tuple(failures))
        w = {times[0]: w_delta}
        for k in range(2, levels + 1):
            w[delta * k] = alpha.apply(delta, w[delta * (k - 1)]) * w_delta
    else:
        w = {Fraction(t): v for t, v in cocycle.items()}

    conj_defect = 0.0
    for t in times:
        if t not in w:
            failures.append((t, "cocycle has no value at grid time", np.inf))
            return EquivalenceReport(False, None, np.inf, np.inf, tuple(failures))
        wt = w[t]
        udef = max(np.linalg.norm(b.conj().T @ b - np.eye(b.shape[0]), 2) for b in wt.mats)
        worst = udef
        ws = wt.adjoint()
        for x in algebra.basis():
            lhs = beta.apply(t, x)
            rhs = ws * alpha.apply(t, x) * wt
            worst = max(worst, (lhs - rhs).norm())
        conj_defect = max(conj_defect, worst)
        if worst > tol:
            failures.append((t, "conjugation identity fails", worst))
            return EquivalenceReport(False, None, conj_defect, np.inf, tuple(failures))

    law = 0.0
    for s in times:
        for t in times:
            if (s + t) not in w:
                continue
            d = (w[s + t] - alpha.apply(t, w[s]) * w[t]).norm()
            law = max(law, d)
    if law > tol:
        first = min(s + t for s in times for t in times
                    if (s + t) in w and (w[s + t] - alpha.apply(t, w[s]) * w[t]).norm() > tol)
        failures.append((first, "cocycle law fails", law))
        return EquivalenceReport(False, None, conj_defect, law, tuple(failures))

    return EquivalenceReport(True, w, conj_defect, law)


def unit_to_cocycle(theta: E0Semigroup, xi: dict, sf: StandardForm,
                    tol: float = 1e-9) -> tuple[dict[Fraction, AlgebraElement], float]:
    """Materialize a unit of the twisted system into a cocycle in the algebra.

    Each unit vector is the image of a unique algebra element against the
    cyclic vector; the family then satisfies the cocycle law for theta.
    """
    a = {Fraction(t): sf.solve_left(np.asarray(v, dtype=complex)) for t, v in xi.items()}
    worst = 0.0
    times = sorted(t for t in a if t > 0)
    for s in times:
        for t in times:
            if (s + t) in a:
                worst = max(worst, (theta.apply(t, a[s]) * a[t] - a[s + t]).norm())
    return a, worst


def unit_operator(theta: E0Semigroup, a: dict, sf: StandardForm) -> dict[Fraction, np.ndarray]:
    """Intertwining semigroup on the standard space built from a cocycle.

    Requires the tracial state: the operator sends x against the cyclic
    vector to the endomorphism image of x times the cocycle value.  The
    returned family intertwines left multiplications through theta.
    """
    total = sum(sf.algebra.blocks)
    for dmat, n in zip(sf.state.density, sf.algebra.blocks):
        if np.linalg.norm(dmat - np.eye(n) / total) > 1e-12:
            raise ValueError("unit operators are only provided for the tracial state")
    out = {}
    d = sf.dim
    for t, at in a.items():
        cols = []
        for j in range(d):
            e = np.zeros(d, dtype=complex)
            e[j] = 1.0
            x = sf.solve_left(e)
            cols.append(sf.embed_left(theta.apply(t, x) * at))
        out[Fraction(t)] = np.column_stack(cols)
    return out
