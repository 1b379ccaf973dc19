"""Truncated inductive limit of a unit and the induced endomorphism family.

The limit over ever finer partitions is replaced by a finite tower: level k
is the cell at the uniform partition of k delta into k parts, level 0 is
the standard space, and the connecting isometries multiply the unit vector
of the time gap into the prefix slot.  The top level stands in for the
limit space; every identity is checked where the shifted supports stay
inside the tower, so truncation only restricts domains and never perturbs
values.

Operators are carried with a support level: an operator at level k acts on
the level-k space and is extended to the top through the connecting
isometries.  The endomorphism family splits the level of its argument off
the prefix of a deeper level, which is exact at partition level.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import AlgebraElement, lmult_matrix
from .bimodule import Bimodule, left_element_of, pi_phi, relative_tensor
from .cells import CellSystem, Unit
from .cpdyn import evaluate
from .partition import Partition, uniform


class TruncationError(RuntimeError):
    """Requested time is off the grid or beyond the truncation horizon."""

    def __init__(self, message: str, max_time: Fraction | None = None):
        super().__init__(message)
        self.max_time = max_time


class TruncatedLimit:
    """Finite tower of uniform-partition cells with connecting isometries."""

    def __init__(self, cs: CellSystem, unit: Unit, delta, levels: int):
        self.system = cs
        self.sf = cs.sf
        self.delta = Fraction(delta)
        self.levels = int(levels)
        if self.levels < 1:
            raise TruncationError("at least one level is required")
        self.spaces: list[Bimodule] = [cs.l2]
        self.unit_level: list[np.ndarray] = [cs.sf.cyclic.copy()]
        for k in range(1, self.levels + 1):
            p = uniform(k * self.delta, k)
            self.spaces.append(cs.cell(p))
            t = Fraction(k * self.delta)
            if t not in unit.vectors:
                raise TruncationError(f"unit has no vector at grid time {t}")
            if k == 1:
                self.unit_level.append(unit.vectors[t].copy())
            else:
                ref = cs.refinement(p, Partition((t,)))
                self.unit_level.append(ref.matrix @ unit.vectors[t])
        self._embed: dict[tuple[int, int], np.ndarray] = {}
        self._split: dict[tuple[int, int], tuple] = {}

    # -- bookkeeping ----------------------------------------------------

    def grid_index(self, t) -> int:
        t = Fraction(t)
        k = t / self.delta
        if k.denominator != 1 or k < 0:
            raise TruncationError(f"time {t} is not on the grid of step {self.delta}")
        if k > self.levels:
            raise TruncationError(
                f"time {t} beyond horizon, max admissible {self.levels * self.delta}",
                max_time=self.levels * self.delta,
            )
        return int(k)

    def partition_at(self, k: int) -> Partition:
        return uniform(k * self.delta, k) if k else Partition(())

    def embed_matrix(self, k: int, j: int) -> np.ndarray:
        """Connecting isometry from level j into level k, j <= k."""
        if not 0 <= j <= k <= self.levels:
            raise TruncationError(f"invalid level pair ({k}, {j})")
        if j == k:
            return np.eye(self.spaces[k].dim, dtype=complex)
        key = (k, j)
        if key not in self._embed:
            jmat = self.system.collapse(self.partition_at(k), k - j)
            xi = self.unit_level[k - j]
            self._embed[key] = jmat @ np.kron(xi[:, None], np.eye(self.spaces[j].dim))
        return self._embed[key]

    def embedding_isometry_defect(self) -> float:
        """Largest isometry defect among the connecting maps.

        Zero for unital units; a non-unital unit makes the connecting maps
        strict contractions and the defect reports how far they are from
        preserving norms.
        """
        worst = 0.0
        for k in range(self.levels + 1):
            for j in range(k):
                b = self.embed_matrix(k, j)
                worst = max(worst, float(np.linalg.norm(
                    b.conj().T @ b - np.eye(self.spaces[j].dim), 2)))
        return worst

    def split(self, level: int, j: int):
        """Relative tensor of levels (level - j, j) and its collapse unitary."""
        key = (level, j)
        if key not in self._split:
            r = relative_tensor(self.spaces[level - j], self.spaces[j], self.sf)
            u = self.system.collapse(self.partition_at(level), level - j) @ r.lift
            self._split[key] = (r, u)
        return self._split[key]


@dataclass(frozen=True)
class TruncatedOperator:
    """Right-linear operator on the tower, supported at a level."""

    tl: TruncatedLimit
    level: int
    matrix: np.ndarray

    def at_level(self, m: int) -> np.ndarray:
        if m < self.level:
            raise TruncationError(f"operator lives at level {self.level}, asked for {m}")
        b = self.tl.embed_matrix(m, self.level)
        return b @ self.matrix @ b.conj().T

    def on_top(self) -> np.ndarray:
        return self.at_level(self.tl.levels)

    def compose(self, other: "TruncatedOperator") -> "TruncatedOperator":
        lvl = max(self.level, other.level)
        return TruncatedOperator(self.tl, lvl, self.at_level(lvl) @ other.at_level(lvl))


def build_truncation(cs: CellSystem, unit: Unit, delta, levels: int) -> TruncatedLimit:
    return TruncatedLimit(cs, unit, delta, levels)


def represent(tl: TruncatedLimit, x: AlgebraElement) -> TruncatedOperator:
    """The algebra represented on the tower: compress to level 0, act, re-embed."""
    return TruncatedOperator(tl, 0, lmult_matrix(x))


def corner_projection(tl: TruncatedLimit) -> np.ndarray:
    """Top-level projection onto the embedded standard space."""
    k0 = tl.embed_matrix(tl.levels, 0)
    return k0 @ k0.conj().T


def dilate(tl: TruncatedLimit, t, op: TruncatedOperator) -> TruncatedOperator:
    """Shift an operator by the endomorphism at a grid time.

    The argument's support level moves up by t / delta; the result is only
    defined while that stays inside the tower.
    """
    j = tl.grid_index(t)
    if j == 0:
        return op
    target = op.level + j
    if target > tl.levels:
        max_t = (tl.levels - op.level) * tl.delta
        raise TruncationError(
            f"dilating a level-{op.level} operator by {t} exceeds the horizon, "
            f"max admissible {max_t}",
            max_time=max_t,
        )
    r, u = tl.split(target, j)
    inner = r.embed @ np.kron(op.matrix, np.eye(tl.spaces[j].dim)) @ r.lift
    return TruncatedOperator(tl, target, u @ inner @ u.conj().T)


def compression_defect(tl: TruncatedLimit, t, x: AlgebraElement) -> float:
    """Defect of compressing the dilated representation back to the semigroup."""
    theta = dilate(tl, t, represent(tl, x))
    k0 = tl.embed_matrix(theta.level, 0)
    compressed = k0.conj().T @ theta.matrix @ k0
    expected = lmult_matrix(evaluate(tl.system.semigroup, t)(x))
    return float(np.linalg.norm(compressed - expected, 2))


@dataclass(frozen=True)
class MinimalityReport:
    span_rank: int
    top_dim: int

    @property
    def full(self) -> bool:
        return self.span_rank == self.top_dim


def minimality_evidence(tl: TruncatedLimit, depth: int | None = None,
                        elements=None, rtol: float = 1e-10) -> MinimalityReport:
    """Rank of the orbit of the embedded standard space under the dilation.

    Words are decreasing chains theta at times n delta, (n-1) delta, ...,
    applied to the corner vectors; with the full basis these reach every
    elementary tensor of the top cell.  Restricting `elements` produces an
    honest partial rank.
    """
    n = depth if depth is not None else tl.levels
    basis = list(tl.sf.algebra.basis()) if elements is None else list(elements)
    theta_top = {}
    for k in range(1, n + 1):
        for mu, x in enumerate(basis):
            theta_top[(k, mu)] = dilate(tl, k * tl.delta, represent(tl, x)).on_top()
    k0 = tl.embed_matrix(tl.levels, 0)
    cols = []
    for y in tl.sf.algebra.basis():
        seed = k0 @ tl.sf.embed_left(y)
        for combo in np.ndindex(*([len(basis)] * n)):
            v = seed
            for i in range(n - 1, -1, -1):
                v = theta_top[(n - i, combo[i])] @ v
            cols.append(v)
    z = np.column_stack(cols)
    sv = np.linalg.svd(z, compute_uv=False)
    rank = int(np.sum(sv > rtol * max(sv[0], 1e-300)))
    return MinimalityReport(rank, tl.spaces[tl.levels].dim)


def continuity_profile(tl: TruncatedLimit) -> dict[tuple[Fraction, int], float]:
    """Distance from the shifted unit-multiplied corner to the corner itself.

    Entry (t, mu) is the norm of kappa_t(x_mu xi(t)) - kappa_0(x_mu cyclic)
    at the top level, for every grid time and algebra basis element.
    """
    out = {}
    top = tl.levels
    k0 = tl.embed_matrix(top, 0)
    for k in range(1, top + 1):
        kk = tl.embed_matrix(top, k)
        for mu, x in enumerate(tl.sf.algebra.basis()):
            moved = kk @ tl.spaces[k].act_left(x, tl.unit_level[k])
            base = k0 @ tl.sf.embed_left(x)
            out[(k * tl.delta, mu)] = float(np.linalg.norm(moved - base))
    return out


# ---------------------------------------------------------------------------
# Cocycles
# ---------------------------------------------------------------------------

@dataclass
class Cocycle:
    """Family of level-supported operators indexed by grid times."""

    tl: TruncatedLimit
    values: dict[Fraction, TruncatedOperator]

    def law_defect(self) -> float:
        """Largest defect of w(s + t) = theta_t(w(s)) w(t) inside the horizon."""
        worst = 0.0
        times = sorted(t for t in self.values if t > 0)
        for s in times:
            for t in times:
                ts = s + t
                if ts not in self.values:
                    continue
                ws = self.values[s]
                if ws.level + self.tl.grid_index(t) > self.tl.levels:
                    continue
                lhs = dilate(self.tl, t, ws).compose(self.values[t])
                rhs = self.values[ts]
                lvl = max(lhs.level, rhs.level)
                worst = max(worst, float(np.linalg.norm(
                    lhs.at_level(lvl) - rhs.at_level(lvl), 2)))
        return worst

    def adapted_defect(self) -> float:
        worst = 0.0
        for t, op in self.values.items():
            k = self.tl.grid_index(t)
            top = op.on_top()
            kk = self.tl.embed_matrix(self.tl.levels, k)
            proj = kk @ kk.conj().T
            worst = max(worst, float(np.linalg.norm(proj @ top @ proj - top, 2)))
        return worst


def unit_level_vectors(tl: TruncatedLimit, unit: Unit) -> dict[Fraction, np.ndarray]:
    """Represent a unit on the tower levels."""
    out = {Fraction(0): tl.sf.cyclic.copy()}
    for k in range(1, tl.levels + 1):
        t = k * tl.delta
        if t not in unit.vectors:
            continue
        p = tl.partition_at(k)
        if k == 1:
            out[t] = unit.vectors[t].copy()
        else:
            out[t] = tl.system.refinement(p, Partition((t,))).matrix @ unit.vectors[t]
    return out


def cocycle_from_unit(tl: TruncatedLimit, lam: Unit, tol: float = 1e-10) -> Cocycle:
    """The adapted cocycle of a contractive unit.

    At level k the operator is the bounded-vector map of the unit vector
    composed with the adjoint of the corner embedding; it moves the
    embedded standard space onto the unit's line and kills the complement.
    """
    return cocycle_from_levels(tl, unit_level_vectors(tl, lam), tol=tol)


def cocycle_from_levels(tl: TruncatedLimit, vectors: dict[Fraction, np.ndarray],
                        tol: float = 1e-10) -> Cocycle:
    """Cocycle built from unit vectors already represented on the levels."""
    values: dict[Fraction, TruncatedOperator] = {}
    for t, v in vectors.items():
        k = tl.grid_index(t)
        if k == 0:
            values[t] = TruncatedOperator(tl, 0, np.eye(tl.sf.dim, dtype=complex))
            continue
        space = tl.spaces[k]
        p = pi_phi(space, v, tl.sf)
        m, _ = left_element_of(p.conj().T @ p, tl.sf)
        if m.norm() > 1.0 + tol:
            raise ValueError(f"unit is not contractive at {t} (norm {m.norm():.6f})")
        b = tl.embed_matrix(k, 0)
        values[t] = TruncatedOperator(tl, k, p @ b.conj().T)
    return Cocycle(tl, values)


def unit_from_cocycle(tl: TruncatedLimit, w: Cocycle) -> dict[Fraction, np.ndarray]:
    """Level-represented unit vectors extracted from an adapted cocycle."""
    out: dict[Fraction, np.ndarray] = {}
    for t, op in w.values.items():
        k = tl.grid_index(t)
        if k == 0:
            out[t] = tl.sf.cyclic.copy()
            continue
        b = tl.embed_matrix(k, 0)
        out[t] = op.at_level(k) @ b @ tl.sf.cyclic
    return out


def corner_isometry_defect(tl: TruncatedLimit, w: Cocycle) -> float:
    """How far the cocycle is from preserving inner products on the corner."""
    worst = 0.0
    k0 = tl.embed_matrix(tl.levels, 0)
    for t, op in w.values.items():
        if t == 0:
            continue
        wk = op.on_top() @ k0
        worst = max(worst, float(np.linalg.norm(
            wk.conj().T @ wk - np.eye(tl.sf.dim), 2)))
    return worst
