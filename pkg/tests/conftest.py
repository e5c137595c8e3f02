"""Shared randomized-spec generators for the test suite."""

from __future__ import annotations

import numpy as np

from mapexp.laws import (
    BivariateAtoms,
    DiscreteLaw,
    ExponentialLaw,
    LogParetoLaw,
    ParetoLaw,
    PointMass,
    ProductLaw,
    bivariate_atom,
)
from mapexp.model import (
    DenseFiniteChain,
    JumpComponent,
    LevyTripletBiv,
    MapSpec,
    validate,
)


def random_generator_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    """Irreducible generator: a directed ring plus random extra edges."""
    q = np.zeros((n, n))
    if n == 1:
        return q
    for i in range(n):
        q[i, (i + 1) % n] = 0.3 + rng.random()
        j = int(rng.integers(0, n))
        if j != i and rng.random() < 0.6:
            q[i, j] += rng.random()
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def _random_atoms(rng: np.random.Generator) -> BivariateAtoms:
    k = int(rng.integers(1, 4))
    ps = rng.dirichlet(np.ones(k))
    xs = rng.uniform(-1.0, 1.0, k)
    ys = rng.uniform(-1.0, 1.0, k)
    return BivariateAtoms(ps=tuple(ps), xs=tuple(xs), ys=tuple(ys))


def random_jump_only_spec(rng: np.random.Generator, max_states: int = 5) -> MapSpec:
    """Validated spec with compound-Poisson and switch jumps only."""
    while True:
        n = int(rng.integers(1, max_states + 1))
        q = random_generator_matrix(rng, n)
        triplets = {}
        for s in range(n):
            jumps = None
            if rng.random() < 0.8:
                jumps = JumpComponent(rate=float(0.2 + rng.random()),
                                      law=_random_atoms(rng))
            triplets[s] = LevyTripletBiv(jumps=jumps)
        switch_laws = {}
        for i in range(n):
            for j in range(n):
                if i != j and q[i, j] > 0 and rng.random() < 0.7:
                    switch_laws[(i, j)] = bivariate_atom(
                        float(rng.uniform(-0.8, 0.8)),
                        float(rng.uniform(-0.8, 0.8)))
        spec = MapSpec(chain=DenseFiniteChain(q), triplets=triplets,
                       switch_laws=switch_laws)
        if validate(spec).ok:
            return spec


def random_single_state_spec(rng: np.random.Generator,
                             heavy: bool) -> MapSpec:
    """One-state spec with positive xi drift; eta jump law heavy or light.

    heavy means an infinite log-moment of the positive eta jumps (the
    tail-integral test must report divergence); light means finite.
    """
    mu = float(rng.uniform(0.5, 2.0))
    if heavy:
        eta_law = LogParetoLaw(alpha=float(rng.uniform(0.5, 1.0)),
                               xm=float(rng.uniform(0.5, 2.0)))
    else:
        pick = rng.integers(0, 3)
        if pick == 0:
            eta_law = ExponentialLaw(rate=float(rng.uniform(0.5, 2.0)))
        elif pick == 1:
            eta_law = ParetoLaw(alpha=float(rng.uniform(1.5, 3.0)),
                                xm=float(rng.uniform(0.5, 2.0)))
        else:
            eta_law = LogParetoLaw(alpha=float(rng.uniform(1.5, 3.0)),
                                   xm=float(rng.uniform(0.5, 2.0)))
    law = ProductLaw(PointMass(0.0), eta_law)
    trip = LevyTripletBiv(drift_xi=mu, drift_eta=float(rng.uniform(-1.0, 1.0)),
                          jumps=JumpComponent(rate=float(rng.uniform(0.3, 1.0)),
                                              law=law))
    spec = MapSpec(chain=DenseFiniteChain(np.zeros((1, 1))),
                   triplets={0: trip}, switch_laws={})
    validate(spec).raise_if_failed()
    return spec


def diffusive_two_state_spec() -> MapSpec:
    """Fixed 2-state spec with Gaussian parts in both components."""
    q = np.array([[-0.7, 0.7], [1.1, -1.1]])
    t0 = LevyTripletBiv(drift_xi=0.8, drift_eta=0.6, var_xi=0.25,
                        var_eta=0.16, cov=0.1)
    t1 = LevyTripletBiv(drift_xi=1.2, drift_eta=-0.4, var_xi=0.09,
                        var_eta=0.25, cov=-0.05)
    spec = MapSpec(chain=DenseFiniteChain(q), triplets={0: t0, 1: t1},
                   switch_laws={(0, 1): bivariate_atom(0.2, 0.1),
                                (1, 0): bivariate_atom(-0.1, 0.2)})
    validate(spec).raise_if_failed()
    return spec


def random_three_state_spec(rng: np.random.Generator) -> MapSpec:
    """Random validated 3-state spec with drifts and jumps (no Gaussian)."""
    while True:
        q = random_generator_matrix(rng, 3)
        triplets = {}
        for s in range(3):
            triplets[s] = LevyTripletBiv(
                drift_xi=float(rng.uniform(-0.5, 1.0)),
                drift_eta=float(rng.uniform(-1.0, 1.0)),
                jumps=JumpComponent(rate=float(0.3 + rng.random()),
                                    law=_random_atoms(rng)))
        switch_laws = {}
        for i in range(3):
            for j in range(3):
                if i != j and q[i, j] > 0:
                    switch_laws[(i, j)] = bivariate_atom(
                        float(rng.uniform(-0.5, 0.5)),
                        float(rng.uniform(-0.5, 0.5)))
        spec = MapSpec(chain=DenseFiniteChain(q), triplets=triplets,
                       switch_laws=switch_laws)
        if validate(spec).ok:
            return spec
