"""Unital completely positive maps and one-parameter semigroups of them.

Maps act on algebra coordinates as dense complex matrices.  Semigroups are
always of exponential type: they are specified by a generator L with
L(1) = 0 and evaluated as matrix exponentials.  Complete positivity is
verified a posteriori through the Choi matrix, assembled per block pair of
the algebra after extending the map by the block-diagonal conditional
expectation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import Algebra, AlgebraElement, ConfigurationError, lmult_matrix, rmult_matrix

# Condition-number bound above which the eigendecomposition route for the
# matrix exponential is abandoned in favor of scaling-and-squaring (Pade 13).
_EXPM_COND_BOUND = 1e8


def _expm(a: np.ndarray) -> np.ndarray:
    try:
        w, v = np.linalg.eig(a)
        cond = np.linalg.cond(v)
        if np.isfinite(cond) and cond < _EXPM_COND_BOUND:
            return (v * np.exp(w)) @ np.linalg.inv(v)
    except np.linalg.LinAlgError:
        pass
    return scipy.linalg.expm(a)


@dataclass(frozen=True)
class CpMap:
    """A linear map on algebra coordinates, expected to be unital CP."""

    algebra: Algebra
    action: np.ndarray

    def __call__(self, x: AlgebraElement) -> AlgebraElement:
        return self.algebra.from_vec(self.action @ x.vec())

    def compose(self, other: "CpMap") -> "CpMap":
        return CpMap(self.algebra, self.action @ other.action)


@dataclass(frozen=True)
class UcpReport:
    unital_defect: float
    choi_min_eigenvalue: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.unital_defect <= self.tol and self.choi_min_eigenvalue >= -self.tol


def choi_blocks(f: CpMap) -> list[np.ndarray]:
    """Choi matrices of the map, one per ordered pair of algebra blocks.

    The map is first extended from the block-diagonal algebra to the full
    matrix algebra of the containing Hilbert space by the conditional
    expectation that truncates to the diagonal blocks; that extension is CP
    exactly when the original map is.  Off-diagonal matrix units are killed
    by the expectation, so the Choi matrix decomposes over pairs
    (input block, output block).
    """
    alg = f.algebra
    out = []
    for bi, ni in enumerate(alg.blocks):
        images = {}
        for r in range(ni):
            for c in range(ni):
                mats = [np.zeros((m, m), dtype=complex) for m in alg.blocks]
                mats[bi][r, c] = 1.0
                images[(r, c)] = f(AlgebraElement(alg, tuple(mats)))
        for bo, no in enumerate(alg.blocks):
            choi = np.zeros((ni * no, ni * no), dtype=complex)
            for r in range(ni):
                for c in range(ni):
                    block = images[(r, c)].mats[bo]
                    choi[r * no:(r + 1) * no, c * no:(c + 1) * no] = block
            out.append(choi)
    return out


def verify_ucp(f: CpMap, tol: float = 1e-10) -> UcpReport:
    """Check unitality and complete positivity of a map."""
    one = f.algebra.identity()
    unital_defect = (f(one) - one).norm()
    min_eig = min(
        np.linalg.eigvalsh((c + c.conj().T) / 2).min() for c in choi_blocks(f)
    )
    return UcpReport(unital_defect, float(min_eig), tol)


@dataclass
class CpSemigroup:
    """Exponential semigroup of maps on algebra coordinates."""

    algebra: Algebra
    generator: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __call__(self, t) -> CpMap:
        return evaluate(self, t)


def semigroup_from_generator(algebra: Algebra, generator: np.ndarray) -> CpSemigroup:
    """Wrap a coordinate generator as a semigroup; requires L(1) = 0."""
    gen = np.asarray(generator, dtype=complex)
    d = algebra.dim
    if gen.shape != (d, d):
        raise ConfigurationError(f"generator shape {gen.shape} != ({d}, {d})")
    one = algebra.identity().vec()
    defect = np.linalg.norm(gen @ one)
    if defect > 1e-10:
        raise ConfigurationError(f"generator does not annihilate the identity ({defect:.3e})")
    return CpSemigroup(algebra, gen)


def evaluate(sg: CpSemigroup, t) -> CpMap:
    """The semigroup element at time t >= 0."""
    tf = float(t)
    if tf < 0:
        raise ValueError(f"negative time {t}")
    key = tf
    with sg._lock:
        hit = sg._cache.get(key)
    if hit is not None:
        return hit
    if tf == 0.0:
        action = np.eye(sg.algebra.dim, dtype=complex)
    else:
        action = _expm(tf * sg.generator)
    result = CpMap(sg.algebra, action)
    with sg._lock:
        sg._cache[key] = result
    return result


# ---------------------------------------------------------------------------
# Builtin generators
# ---------------------------------------------------------------------------

def identity_generator(algebra: Algebra) -> np.ndarray:
    return np.zeros((algebra.dim, algebra.dim), dtype=complex)


def stochastic_pair_generator() -> tuple[Algebra, np.ndarray]:
    """Two-point commutative algebra with the one-way jump generator.

    On coordinates (a, b) the generator sends (a, b) to (b - a, 0), so the
    semigroup acts as the stochastic matrices
    [[exp(-t), 1 - exp(-t)], [0, 1]].
    """
    algebra = Algebra((1, 1))
    gen = np.array([[-1.0, 1.0], [0.0, 0.0]], dtype=complex)
    return algebra, gen


def unitary_conjugation_generator(algebra: Algebra, h: AlgebraElement) -> np.ndarray:
    """Generator of t -> (x -> exp(-itH) x exp(itH)) for Hermitian H."""
    herm = max(np.linalg.norm(m - m.conj().T) for m in h.mats)
    if herm > 1e-12:
        raise ConfigurationError("conjugation generator needs a Hermitian element")
    return 1j * (rmult_matrix(h) - lmult_matrix(h))


def lindblad_generator(
    algebra: Algebra,
    jumps: list[AlgebraElement],
    hamiltonian: AlgebraElement | None = None,
) -> np.ndarray:
    """Heisenberg-picture generator of a quantum Markov semigroup.

    L(x) = i[H, x] + sum_k V_k* x V_k - (V_k* V_k x + x V_k* V_k) / 2.
    """
    d = algebra.dim
    gen = np.zeros((d, d), dtype=complex)
    if hamiltonian is not None:
        gen += 1j * (lmult_matrix(hamiltonian) - rmult_matrix(hamiltonian))
    for v in jumps:
        vs = v.adjoint()
        vsv = vs * v
        gen += lmult_matrix(vs) @ rmult_matrix(v)
        gen -= 0.5 * (lmult_matrix(vsv) + rmult_matrix(vsv))
    return gen
