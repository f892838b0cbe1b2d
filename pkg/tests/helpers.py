"""Shared test oracles: brute-force enumerations and finite differences.

Everything here is deliberately independent of the library's own code paths:
the Frechet oracle enumerates couplings, the matrix exponential uses scaling
and squaring, and gradients come from central differences of the value
functions.
"""

import numpy as np

from minaction import (
    FePath,
    Mesh,
    Quadrature,
    action_fixed_T,
    action_optimal,
    linear_field,
    maier_stein_field,
    two_scale_field,
)


def brute_force_frechet(p_pts, q_pts) -> float:
    """Discrete Frechet distance by exhaustive coupling enumeration.

    Only usable for tiny polylines (the coupling count grows exponentially).
    """
    p_pts = np.atleast_2d(np.asarray(p_pts, dtype=float))
    q_pts = np.atleast_2d(np.asarray(q_pts, dtype=float))
    np_, nq = len(p_pts), len(q_pts)
    best = [np.inf]

    def rec(i, j, worst):
        worst = max(worst, float(np.linalg.norm(p_pts[i] - q_pts[j])))
        if worst >= best[0]:
            return
        if i == np_ - 1 and j == nq - 1:
            best[0] = worst
            return
        if i + 1 < np_:
            rec(i + 1, j, worst)
        if j + 1 < nq:
            rec(i, j + 1, worst)
        if i + 1 < np_ and j + 1 < nq:
            rec(i + 1, j + 1, worst)

    rec(0, 0, 0.0)
    return best[0]


def expm_scaling_squaring(matrix, n_square=30, n_taylor=18) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a truncated series."""
    a_mat = np.asarray(matrix, dtype=float)
    scaled = a_mat / 2.0**n_square
    result = np.eye(a_mat.shape[0])
    term = np.eye(a_mat.shape[0])
    for k in range(1, n_taylor + 1):
        term = term @ scaled / k
        result = result + term
    for _ in range(n_square):
        result = result @ result
    return result


def random_mesh(rng, n_lo=4, n_hi=20, nonuniform=False) -> Mesh:
    n = int(rng.integers(n_lo, n_hi + 1))
    if not nonuniform:
        return Mesh(np.linspace(0.0, 1.0, n + 1))
    interior = np.sort(rng.random(n - 1))
    nodes = np.concatenate([[0.0], interior, [1.0]])
    if np.min(np.diff(nodes)) < 1e-4:
        return Mesh(np.linspace(0.0, 1.0, n + 1))
    return Mesh(nodes)


def random_path(rng, dim, scale=1.0, nonuniform=False) -> FePath:
    mesh = random_mesh(rng, nonuniform=nonuniform)
    values = scale * rng.standard_normal((mesh.num_elements + 1, dim))
    return FePath(mesh, values)


def fd_gradient(value_fn, path, step=1e-6) -> np.ndarray:
    """Central finite differences of a value function w.r.t. interior nodes."""
    interior = path.values[1:-1].copy()
    grad = np.zeros_like(interior)
    for i in range(interior.shape[0]):
        for j in range(interior.shape[1]):
            plus = interior.copy()
            plus[i, j] += step
            minus = interior.copy()
            minus[i, j] -= step
            grad[i, j] = (
                value_fn(path.replace_interior(plus)) - value_fn(path.replace_interior(minus))
            ) / (2.0 * step)
    return grad


def fd_grad_fixed_T(path, field, T, quad, step=1e-6) -> np.ndarray:
    return fd_gradient(lambda p: action_fixed_T(p, field, T, quad), path, step)


def fd_grad_optimal(path, field, quad, step=1e-6) -> np.ndarray:
    return fd_gradient(lambda p: action_optimal(p, field, quad).value, path, step)


def builtin_fields():
    """The built-in drift fields exercised by the randomized suites."""
    return {
        "scalar_linear": linear_field([[-1.0]]),
        "general_linear": linear_field([[-1.0, 0.5], [-0.3, -2.0]]),
        "two_scale": two_scale_field(),
        "maier_stein": maier_stein_field(),
    }


DEFAULT_QUAD = Quadrature(3)
