import numpy as np
import pytest

from prodsys.algebra import diagonal_state, make_algebra, make_state, standard_form
from prodsys.cpdyn import (
    lindblad_generator,
    semigroup_from_generator,
    stochastic_pair_generator,
)

SEED = 20250808


def random_element(algebra, rng):
    mats = [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            for n in algebra.blocks]
    return algebra.element(mats)


def random_hermitian(algebra, rng):
    x = random_element(algebra, rng)
    return algebra.element([(m + m.conj().T) / 2 for m in x.mats])


def random_state(algebra, rng):
    mats = []
    for n in algebra.blocks:
        w = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        mats.append(w @ w.conj().T + 0.4 * np.eye(n))
    total = sum(np.trace(m).real for m in mats)
    return make_state(algebra, [m / total for m in mats])


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def pair():
    """Two-point algebra with the one-way jump semigroup and balanced state."""
    algebra, gen = stochastic_pair_generator()
    sf = standard_form(algebra, diagonal_state(algebra, [0.5, 0.5]))
    return semigroup_from_generator(algebra, gen), sf


@pytest.fixture
def m2_lindblad():
    """Seeded dissipative semigroup on one 2x2 block with a seeded state."""
    rng = np.random.default_rng(SEED)
    algebra = make_algebra([2])
    v = random_element(algebra, rng)
    h = random_hermitian(algebra, rng)
    gen = lindblad_generator(algebra, [v], h)
    sf = standard_form(algebra, random_state(algebra, rng))
    return semigroup_from_generator(algebra, gen), sf
