"""Finite-dimensional von Neumann algebras and their standard representation.

An algebra is a finite direct sum of full complex matrix blocks; elements are
stored blockwise.  A faithful state is a blockwise positive definite density
with unit trace.  The standard representation lives on the block
Hilbert-Schmidt space: the algebra acts by left and right multiplication and
the cyclic vector is the square root of the density.  Coordinates on the
Hilbert-Schmidt space are the row-major matrix entries, so the Euclidean
inner product of coordinate vectors equals the trace inner product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg


class ConfigurationError(ValueError):
    """Raised for structurally invalid algebra or state data."""


class FaithfulnessError(ValueError):
    """Raised when a state density is numerically singular."""


# Relative eigenvalue floor below which a state is rejected as non-faithful.
FAITHFUL_RTOL = 1e-10


@dataclass(frozen=True)
class Algebra:
    """Direct sum of full matrix blocks, identified by the block sizes."""

    blocks: tuple[int, ...]

    def __post_init__(self):
        if not self.blocks:
            raise ConfigurationError("algebra needs at least one block")
        if any(n < 1 for n in self.blocks):
            raise ConfigurationError(f"block sizes must be >= 1, got {self.blocks}")

    @property
    def dim(self) -> int:
        """Coordinate dimension of the algebra, sum of squared block sizes."""
        return sum(n * n for n in self.blocks)

    def element(self, mats: Sequence[np.ndarray]) -> "AlgebraElement":
        mats = tuple(np.asarray(m, dtype=complex) for m in mats)
        if len(mats) != len(self.blocks):
            raise ConfigurationError("wrong number of blocks")
        for m, n in zip(mats, self.blocks):
            if m.shape != (n, n):
                raise ConfigurationError(f"block shape {m.shape} != ({n}, {n})")
        return AlgebraElement(self, mats)

    def identity(self) -> "AlgebraElement":
        return self.element([np.eye(n) for n in self.blocks])

    def zero(self) -> "AlgebraElement":
        return self.element([np.zeros((n, n)) for n in self.blocks])

    def diagonal(self, values: Sequence[complex]) -> "AlgebraElement":
        """Element with the given scalar on each block diagonal."""
        if len(values) != len(self.blocks):
            raise ConfigurationError("one scalar per block expected")
        return self.element([v * np.eye(n) for v, n in zip(values, self.blocks)])

    def basis(self) -> Iterator["AlgebraElement"]:
        """Matrix-unit basis in coordinate order."""
        for b, n in enumerate(self.blocks):
            for r in range(n):
                for c in range(n):
                    mats = [np.zeros((m, m), dtype=complex) for m in self.blocks]
                    mats[b][r, c] = 1.0
                    yield AlgebraElement(self, tuple(mats))

    def from_vec(self, v: np.ndarray) -> "AlgebraElement":
        v = np.asarray(v, dtype=complex).reshape(-1)
        if v.size != self.dim:
            raise ConfigurationError(f"coordinate length {v.size} != {self.dim}")
        mats, k = [], 0
        for n in self.blocks:
            mats.append(v[k:k + n * n].reshape(n, n))
            k += n * n
        return AlgebraElement(self, tuple(mats))


@dataclass(frozen=True)
class AlgebraElement:
    """Blockwise matrix element of an `Algebra`."""

    algebra: Algebra
    mats: tuple[np.ndarray, ...]

    def vec(self) -> np.ndarray:
        return np.concatenate([m.reshape(-1) for m in self.mats])

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(m.conj().T for m in self.mats))

    def norm(self) -> float:
        """Operator norm, the largest block spectral norm."""
        return max(np.linalg.norm(m, 2) for m in self.mats)

    def trace(self) -> complex:
        return sum(np.trace(m) for m in self.mats)

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(a + b for a, b in zip(self.mats, other.mats)))

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(a - b for a, b in zip(self.mats, other.mats)))

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return AlgebraElement(self.algebra, tuple(a @ b for a, b in zip(self.mats, other.mats)))
        return AlgebraElement(self.algebra, tuple(other * m for m in self.mats))

    def __rmul__(self, scalar) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(scalar * m for m in self.mats))


@dataclass(frozen=True)
class State:
    """Faithful normal state, stored as its blockwise density."""

    algebra: Algebra
    density: tuple[np.ndarray, ...]

    def __post_init__(self):
        eigs = np.concatenate([np.linalg.eigvalsh((d + d.conj().T) / 2) for d in self.density])
        if eigs.min() <= FAITHFUL_RTOL * eigs.max():
            raise FaithfulnessError(
                f"state is not faithful: min/max eigenvalue {eigs.min():.3e}/{eigs.max():.3e}"
            )
        total = sum(np.trace(d).real for d in self.density)
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"density trace {total} != 1")

    def __call__(self, x: AlgebraElement) -> complex:
        return sum(np.trace(d @ m) for d, m in zip(self.density, x.mats))


def make_algebra(blocks: Sequence[int]) -> Algebra:
    """Build the direct sum of full matrix blocks of the given sizes."""
    return Algebra(tuple(int(n) for n in blocks))


def make_state(algebra: Algebra, density: Sequence[np.ndarray]) -> State:
    mats = tuple(np.asarray(d, dtype=complex) for d in density)
    herm = max(np.linalg.norm(d - d.conj().T) for d in mats)
    if herm > 1e-12:
        raise ConfigurationError(f"density not Hermitian, defect {herm:.3e}")
    return State(algebra, mats)


def uniform_state(algebra: Algebra) -> State:
    """Normalized trace as a state."""
    total = sum(algebra.blocks)
    return make_state(algebra, [np.eye(n) / total for n in algebra.blocks])


def diagonal_state(algebra: Algebra, weights: Sequence[float]) -> State:
    """State with scalar density on each block; weights are the block traces."""
    if len(weights) != len(algebra.blocks):
        raise ConfigurationError("one weight per block expected")
    return make_state(
        algebra, [w / n * np.eye(n) for w, n in zip(weights, algebra.blocks)]
    )


def lmult_matrix(x: AlgebraElement) -> np.ndarray:
    """Coordinate matrix of left multiplication by x on the Hilbert-Schmidt space."""
    return scipy.linalg.block_diag(
        *[np.kron(m, np.eye(n)) for m, n in zip(x.mats, x.algebra.blocks)]
    )


def rmult_matrix(x: AlgebraElement) -> np.ndarray:
    """Coordinate matrix of right multiplication by x."""
    return scipy.linalg.block_diag(
        *[np.kron(np.eye(n), m.T) for m, n in zip(x.mats, x.algebra.blocks)]
    )


@dataclass(frozen=True)
class StandardForm:
    """The algebra represented on block Hilbert-Schmidt space.

    `cyclic` is the coordinate vector of the square root of the density.
    Left and right multiplication both act on the same coordinate space and
    commute exactly.  For a faithful state both maps ``x -> x . cyclic`` and
    ``x -> cyclic . x`` are linear bijections onto the whole space.
    """

    algebra: Algebra
    state: State
    root: tuple[np.ndarray, ...]
    root_inv: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.algebra.dim

    @property
    def cyclic(self) -> np.ndarray:
        return np.concatenate([r.reshape(-1) for r in self.root])

    def apply_left(self, x: AlgebraElement, xi: np.ndarray) -> np.ndarray:
        return lmult_matrix(x) @ xi

    def apply_right(self, x: AlgebraElement, xi: np.ndarray) -> np.ndarray:
        return rmult_matrix(x) @ xi

    def embed_left(self, x: AlgebraElement) -> np.ndarray:
        """Coordinates of x acting on the cyclic vector from the left."""
        return np.concatenate(
            [(m @ r).reshape(-1) for m, r in zip(x.mats, self.root)]
        )

    def embed_right(self, x: AlgebraElement) -> np.ndarray:
        """Coordinates of the cyclic vector multiplied by x on the right."""
        return np.concatenate(
            [(r @ m).reshape(-1) for m, r in zip(x.mats, self.root)]
        )

    def solve_right(self, eta: np.ndarray) -> AlgebraElement:
        """The unique x with embed_right(x) == eta."""
        el = self.algebra.from_vec(eta)
        return self.algebra.element([ri @ m for ri, m in zip(self.root_inv, el.mats)])

    def solve_left(self, eta: np.ndarray) -> AlgebraElement:
        """The unique x with embed_left(x) == eta."""
        el = self.algebra.from_vec(eta)
        return self.algebra.element([m @ ri for m, ri in zip(el.mats, self.root_inv)])


def standard_form(algebra: Algebra, state: State) -> StandardForm:
    """Standard representation of the algebra for a faithful state.

    The state constructor already rejects non-faithful densities; here the
    blockwise square root and its inverse are precomputed so that solving
    ``cyclic . x = eta`` is a single triangular-free matrix product.
    """
    root, root_inv = [], []
    for d in state.density:
        w, v = np.linalg.eigh((d + d.conj().T) / 2)
        root.append(v @ np.diag(np.sqrt(w)) @ v.conj().T)
        root_inv.append(v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T)
    return StandardForm(algebra, state, tuple(root), tuple(root_inv))
