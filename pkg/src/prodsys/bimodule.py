"""Bimodule construction kit: Gram quotients and the two tensor products.

Every Hilbert space here is presented in orthonormal coordinates.  New
spaces are produced from a spanning family by assembling its Gram matrix
and discarding null directions: `embed` maps spanning-family coordinates
onto orthonormal coordinates of the quotient, `lift` is the canonical
right inverse supported on the orthogonal complement of the null space.

Two constructions are provided.  The GNS tensor couples the algebra to its
standard space through a UCP map via <x(.)xi, y(.)eta> = <xi, T(x*y) eta>.
The relative tensor product fuses a right module with a left module over
the algebra via <xi1(.)eta1, xi2(.)eta2> = <eta1, m eta2> where m is the
algebra element implementing the bounded-vector composition of xi1, xi2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    Algebra,
    AlgebraElement,
    StandardForm,
    lmult_matrix,
    rmult_matrix,
)

# Relative cutoff for discarding Gram null directions, and the relative
# negativity beyond which a Gram matrix is rejected as non positive.
GRAM_RTOL = 1e-10
GRAM_NEG_RTOL = 1e-8


class NotCompletelyPositiveError(ValueError):
    """Raised when a Gram matrix has a genuinely negative eigenvalue."""


@dataclass(frozen=True)
class Bimodule:
    """Hilbert space with commuting left and right algebra actions.

    `left[k]` / `right[k]` are the action matrices of the k-th coordinate
    basis element of the algebra.  When the space was produced as a
    quotient of a spanning family, `embed` / `lift` translate between
    family coordinates and orthonormal coordinates.
    """

    algebra: Algebra
    dim: int
    left: np.ndarray
    right: np.ndarray
    provenance: str
    embed: np.ndarray | None = None
    lift: np.ndarray | None = None
    factors: tuple = ()
    gram_eigs: np.ndarray | None = None

    def left_matrix(self, x: AlgebraElement) -> np.ndarray:
        return np.tensordot(x.vec(), self.left, axes=1)

    def right_matrix(self, x: AlgebraElement) -> np.ndarray:
        return np.tensordot(x.vec(), self.right, axes=1)

    def act_left(self, x: AlgebraElement, v: np.ndarray) -> np.ndarray:
        return self.left_matrix(x) @ v

    def act_right(self, x: AlgebraElement, v: np.ndarray) -> np.ndarray:
        return self.right_matrix(x) @ v


@dataclass(frozen=True)
class BimoduleMap:
    source: Bimodule
    target: Bimodule
    matrix: np.ndarray


@dataclass(frozen=True)
class MapReport:
    bilinear_defect: float | None
    isometry_defect: float | None
    unitary_defect: float | None
    tol: float

    @property
    def passed(self) -> bool:
        defects = [
            d for d in (self.bilinear_defect, self.isometry_defect, self.unitary_defect)
            if d is not None
        ]
        return all(d <= self.tol for d in defects)


def gram_quotient(gram: np.ndarray, rtol: float = GRAM_RTOL):
    """Orthonormalize a spanning family from its Gram matrix.

    Returns (embed, lift, eigenvalues) where embed maps family coordinates
    to orthonormal coordinates of the quotient space, embed* embed
    reproduces the Gram matrix, and lift embeds the quotient back into the
    family coordinates with embed @ lift = identity.
    """
    g = (gram + gram.conj().T) / 2
    w, v = np.linalg.eigh(g)
    top = max(w.max(), 0.0)
    if top == 0.0:
        return np.zeros((0, g.shape[0])), np.zeros((g.shape[0], 0)), w[:0]
    if w.min() < -GRAM_NEG_RTOL * top:
        raise NotCompletelyPositiveError(
            f"Gram matrix has negative eigenvalue {w.min():.3e} (max {top:.3e})"
        )
    keep = w > rtol * top
    wk, vk = w[keep], v[:, keep]
    embed = (np.sqrt(wk)[:, None]) * vk.conj().T
    lift = vk * (1.0 / np.sqrt(wk))[None, :]
    return embed, lift, wk


def l2_bimodule(sf: StandardForm) -> Bimodule:
    """The standard space itself, acting by two-sided multiplication."""
    basis = list(sf.algebra.basis())
    left = np.stack([lmult_matrix(x) for x in basis])
    right = np.stack([rmult_matrix(x) for x in basis])
    d = sf.dim
    return Bimodule(sf.algebra, d, left, right, "standard_form",
                    embed=np.eye(d), lift=np.eye(d))


def pi_phi(h: Bimodule, xi: np.ndarray, sf: StandardForm) -> np.ndarray:
    """Matrix of the bounded-vector map of xi, from the standard space to h.

    The defining property is that the cyclic vector times x goes to xi
    acted on by x from the right; in finite dimension with a faithful state
    every vector is bounded, so the matrix is assembled column by column by
    solving for x on the coordinate basis of the standard space.
    """
    cols = []
    for j in range(sf.dim):
        e = np.zeros(sf.dim, dtype=complex)
        e[j] = 1.0
        x = sf.solve_right(e)
        cols.append(h.act_right(x, xi))
    return np.column_stack(cols)


def left_element_of(op: np.ndarray, sf: StandardForm) -> tuple[AlgebraElement, float]:
    """Recognize an operator on the standard space as a left multiplication.

    Returns the algebra element and the residual norm between the operator
    and the left multiplication it induces.
    """
    a = sf.solve_left(op @ sf.cyclic)
    residual = float(np.linalg.norm(op - lmult_matrix(a), 2))
    return a, residual


def _push_action(pre: list[np.ndarray], embed: np.ndarray, lift: np.ndarray) -> np.ndarray:
    return np.stack([embed @ m @ lift for m in pre])


def gns_tensor(t_map, sf: StandardForm) -> Bimodule:
    """Couple the algebra to its standard space through a UCP map.

    Spanning family: elementary tensors over the matrix-unit basis of the
    algebra and the coordinate basis of the standard space, in kron order
    (algebra index major).  A non-CP input shows up as a genuinely negative
    Gram eigenvalue and is rejected.
    """
    alg = sf.algebra
    d = sf.dim
    basis = list(alg.basis())
    gram = np.zeros((d * d, d * d), dtype=complex)
    for i, xi in enumerate(basis):
        for k, xk in enumerate(basis):
            w = t_map(xi.adjoint() * xk)
            gram[i * d:(i + 1) * d, k * d:(k + 1) * d] = lmult_matrix(w)
    try:
        embed, lift, eigs = gram_quotient(gram)
    except NotCompletelyPositiveError as exc:
        raise NotCompletelyPositiveError(f"GNS coupling failed, map is not CP: {exc}") from exc
    left_pre = [np.kron(lmult_matrix(x), np.eye(d)) for x in basis]
    right_pre = [np.kron(np.eye(d), rmult_matrix(x)) for x in basis]
    return Bimodule(
        alg, embed.shape[0],
        _push_action(left_pre, embed, lift),
        _push_action(right_pre, embed, lift),
        "gns_tensor", embed=embed, lift=lift, gram_eigs=eigs,
    )


def tensor_vec(g: Bimodule, x: AlgebraElement, xi: np.ndarray) -> np.ndarray:
    """Coordinates of the elementary tensor of x and xi in a GNS coupling."""
    return g.embed @ np.kron(x.vec(), xi)


def relative_tensor(h: Bimodule, k: Bimodule, sf: StandardForm) -> Bimodule:
    """Relative tensor product over the algebra, h fused with k.

    Spanning family: pairs of coordinate basis vectors in kron order
    (h index major).  The inner product routes through the bounded-vector
    composition on h, recognized as a left multiplication and then applied
    through the left action of k.  The whole Gram matrix is assembled in
    one sweep: compositions of bounded-vector maps for every pair of basis
    vectors, their algebra elements, and the left action of those elements.
    """
    d = sf.dim
    basis = list(sf.algebra.basis())
    rights = np.stack([h.right_matrix(sf.solve_right(np.eye(d)[:, j])) for j in range(d)])
    # comp[a, b] is the composition of the bounded-vector maps of basis a, b
    comp = np.einsum("ira,jrb->abij", rights.conj(), rights, optimize=True)
    solve = rmult_matrix(sf.algebra.element(sf.root_inv))
    elements = np.einsum("mi,abi->abm", solve, comp @ sf.cyclic, optimize=True)
    lstack = np.stack([lmult_matrix(x) for x in basis])
    residual = np.abs(comp - np.einsum("abm,mij->abij", elements, lstack,
                                       optimize=True)).max()
    if residual > 1e-8:
        raise NotCompletelyPositiveError(
            f"bounded-vector composition is not a left multiplication ({residual:.3e})"
        )
    gram = np.einsum("abm,mpq->apbq", elements, k.left,
                     optimize=True).reshape(h.dim * k.dim, h.dim * k.dim)
    embed, lift, eigs = gram_quotient(gram)
    left_pre = [np.kron(h.left[i], np.eye(k.dim)) for i in range(len(h.left))]
    right_pre = [np.kron(np.eye(h.dim), k.right[i]) for i in range(len(k.right))]
    return Bimodule(
        sf.algebra, embed.shape[0],
        _push_action(left_pre, embed, lift),
        _push_action(right_pre, embed, lift),
        "relative_tensor", embed=embed, lift=lift, factors=(h, k), gram_eigs=eigs,
    )


def pair_vec(r: Bimodule, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Coordinates of the fused pair of vectors in a relative tensor product."""
    return r.embed @ np.kron(v, w)


def product_formula_defect(
    t_map, x1: AlgebraElement, y1: AlgebraElement,
    x2: AlgebraElement, y2: AlgebraElement, sf: StandardForm,
    g: Bimodule | None = None,
) -> float:
    """Defect of the bounded-vector composition formula in a GNS coupling.

    Composing the bounded-vector maps of two elementary tensors must give
    left multiplication by y1* T(x1* x2) y2 on the standard space.
    """
    if g is None:
        g = gns_tensor(t_map, sf)
    v1 = tensor_vec(g, x1, sf.embed_left(y1))
    v2 = tensor_vec(g, x2, sf.embed_left(y2))
    composed = pi_phi(g, v1, sf).conj().T @ pi_phi(g, v2, sf)
    expected = y1.adjoint() * t_map(x1.adjoint() * x2) * y2
    return float(np.linalg.norm(composed - lmult_matrix(expected), 2))


def verify_map(
    f: BimoduleMap,
    bilinear: bool = False,
    isometric: bool = False,
    unitary: bool = False,
    tol: float = 1e-10,
) -> MapReport:
    """Defect report for the requested structural properties of a map."""
    m = f.matrix
    bilinear_defect = None
    if bilinear:
        defs = []
        for i in range(len(f.source.left)):
            defs.append(np.linalg.norm(m @ f.source.left[i] - f.target.left[i] @ m, 2))
            defs.append(np.linalg.norm(m @ f.source.right[i] - f.target.right[i] @ m, 2))
        bilinear_defect = float(max(defs))
    isometry_defect = None
    if isometric:
        isometry_defect = float(
            np.linalg.norm(m.conj().T @ m - np.eye(f.source.dim), 2)
        )
    unitary_defect = None
    if unitary:
        unitary_defect = float(max(
            np.linalg.norm(m.conj().T @ m - np.eye(f.source.dim), 2),
            np.linalg.norm(m @ m.conj().T - np.eye(f.target.dim), 2),
        ))
    return MapReport(bilinear_defect, isometry_defect, unitary_defect, tol)
