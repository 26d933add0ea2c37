"""Shared fixtures: small admissible meshes and data sets."""

import pytest

from thermocell.butler_volmer import make_context
from thermocell.mesh import build_sandwich_mesh
from thermocell.params import make_params


# separator 0.4 < half anode 1.0 keeps the size hypothesis satisfied
LENGTHS = (1.0, 0.4, 1.0)
CELLS = (4, 2, 4)


@pytest.fixture
def mesh():
    return build_sandwich_mesh(LENGTHS, CELLS)


@pytest.fixture
def mesh16():
    return build_sandwich_mesh(LENGTHS, (6, 4, 6))


@pytest.fixture
def mesh2d():
    return build_sandwich_mesh(LENGTHS, CELLS, width=(0.5, 3))


def default_params(mesh, **kw):
    base = dict(I_a=0.2)
    base.update(kw)
    return make_params(mesh, **base)


@pytest.fixture
def params(mesh):
    return default_params(mesh)


@pytest.fixture
def ctx(mesh, params):
    return make_context(mesh, params, 1.0)


def random_data(mesh, rng, truncation_eps=1.0):
    """Admissible random coefficient set plus an in-band temperature."""
    n, ns = mesh.n_cells, mesh.n_solid
    params = make_params(
        mesh,
        k=rng.uniform(0.5, 2.0, n),
        sigma_s=rng.uniform(0.5, 2.0, ns),
        sigma_e=rng.uniform(0.5, 2.0, n),
        g1=rng.uniform(0.5, 1.5, ns),
        g0=0.3,
        U=rng.uniform(-0.2, 0.2, ns),
        u0=rng.uniform(1.8, 2.2, n),
        alpha=rng.uniform(0.6, 1.4),
        A_s=rng.uniform(0.5, 1.5),
        d1=rng.uniform(0.05, 0.2),
        f=rng.uniform(-0.3, 0.3),
        I_a=rng.uniform(-0.5, 0.5),
    )
    ctx = make_context(mesh, params, truncation_eps)
    u = params.u0 + rng.uniform(-0.5, 0.5, n) * truncation_eps
    return params, ctx, u
