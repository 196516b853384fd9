"""Reference plant and seeded random systems used by tests and demos."""
import numpy as np

from .lti import ClosedLoop, Controller, Plant, is_stable, is_stabilizing

__all__ = [
    "example_plant",
    "random_stable_closed_loop",
    "random_plant",
    "random_stabilized_pair",
    "random_certified_triple",
]


def example_plant():
    """Scalar-state benchmark with two disturbances and two performance outputs.

    dx/dt = -x + [1 0] w + u,   z = [x; u],   y = x + [0 1] w
    """
    return Plant(
        A=[[-1.0]],
        B1=[[1.0, 0.0]],
        B2=[[1.0]],
        C1=[[1.0], [0.0]],
        D11=np.zeros((2, 2)),
        D12=[[0.0], [1.0]],
        C2=[[1.0]],
        D21=[[0.0, 1.0]],
    )


def _stable_matrix(rng, n, min_decay=0.05):
    # random spectrum shifted to the left half plane
    M = rng.standard_normal((n, n))
    a = np.max(np.linalg.eigvals(M).real)
    return M - (a + min_decay + rng.uniform(0.0, 1.0)) * np.eye(n)


def random_stable_closed_loop(rng, n=None, nw=None, nz=None, feedthrough=True):
    """Random stable realization with moderately damped poles."""
    n = n or int(rng.integers(1, 7))
    nw = nw or int(rng.integers(1, 4))
    nz = nz or int(rng.integers(1, 4))
    A = _stable_matrix(rng, n)
    B = rng.standard_normal((n, nw))
    C = rng.standard_normal((nz, n))
    D = 0.5 * rng.standard_normal((nz, nw)) if feedthrough else np.zeros((nz, nw))
    return ClosedLoop(A, B, C, D)


def random_plant(rng, nx=None, nw=None, nu=None, nz=None, ny=None, stable=False):
    nx = nx or int(rng.integers(1, 4))
    nw = nw or int(rng.integers(1, 3))
    nu = nu or int(rng.integers(1, 3))
    nz = nz or int(rng.integers(1, 3))
    ny = ny or int(rng.integers(1, 3))
    A = _stable_matrix(rng, nx) if stable else rng.standard_normal((nx, nx))
    return Plant(
        A=A,
        B1=rng.standard_normal((nx, nw)),
        B2=rng.standard_normal((nx, nu)),
        C1=rng.standard_normal((nz, nx)),
        D11=0.3 * rng.standard_normal((nz, nw)),
        D12=rng.standard_normal((nz, nu)),
        C2=rng.standard_normal((ny, nx)),
        D21=rng.standard_normal((ny, nw)),
    )


def random_stabilized_pair(rng, max_tries=1000, **dims):
    """Random plant (stable open loop) with a random small stabilizing controller.

    The controller gains are kept small so that the stable plant stays
    stabilized; the controller's own ``AK`` is drawn stable.
    """
    plant = random_plant(rng, stable=True, **dims)
    nx, nu, ny = plant.nx, plant.nu, plant.ny
    for _ in range(max_tries):
        scale = rng.uniform(0.05, 0.6)
        k = Controller.from_blocks(
            scale * rng.standard_normal((nu, ny)),
            scale * rng.standard_normal((nu, nx)),
            scale * rng.standard_normal((nx, ny)),
            _stable_matrix(rng, nx),
        )
        if is_stabilizing(plant, k, margin=1e-3):
            return plant, k
    raise RuntimeError("could not draw a stabilizing controller")


def random_certified_triple(rng, level=1.2, max_cond=1e4, max_tries=50, **dims):
    """Random plant with a certified triple at ``level * J(K)``.

    The certificate comes from a max-margin LMI search. Triples whose ``P``
    has condition number above ``max_cond`` are redrawn: the lifted
    coordinates lose about ``log10(cond(P))`` digits in ``Y - X^-1``.
    Returns ``(plant, triple)``.
    """
    from .errors import DomainError
    from .lifting import certified_triple
    from .norm import J

    for _ in range(max_tries):
        plant, k = random_stabilized_pair(rng, **dims)
        try:
            t = certified_triple(plant, k, gamma=level * J(plant, k), center=True)
        except DomainError:
            continue
        if np.linalg.cond(t.P) <= max_cond:
            return plant, t
    raise RuntimeError("could not draw a well-conditioned certified triple")
