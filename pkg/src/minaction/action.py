"""Action functionals on scaled time, their gradients, and stationarity diagnostics.

For a path written on the unit interval with scaled time s = t/T, the rate
functional of the small-noise transition problem is

    S(T, p) = (T/2) * int_0^1 | p'(s)/T - b(p(s)) |^2 ds.

For a fixed path shape, S(T, .) has a unique minimizer in T,

    T_opt(p) = |p'|_L2 / |b(p)|_L2,

and substituting it gives the reduced, time-free functional

    S_opt(p) = |p'|_L2 * |b(p)|_L2 - <p', b(p)>_L2,

which is nonnegative by Cauchy-Schwarz and vanishes exactly when p' is a
positive multiple of b(p) almost everywhere (a rescaled flow trajectory).
Everything here evaluates these quantities and their exact gradients with
respect to the interior nodal values of a piecewise-linear path, using
Gauss-Legendre quadrature per element (exact for linear drift when the rule
has >= 2 points per element).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drift import DriftField
from .pathcore import FePath

__all__ = [
    "Quadrature",
    "ActionReport",
    "ActionError",
    "DegeneratePathError",
    "DriftVanishesError",
    "EPS_DEGENERATE",
    "action_fixed_T",
    "optimal_time",
    "action_optimal",
    "grad_action_fixed_T",
    "grad_action_optimal",
    "hamiltonian_violation",
    "el_residual",
]

# Degeneracy guard on the L2 seminorms |p'| and |b(p)|; below this the
# optimal-time ratio is meaningless and a typed error is raised instead.
EPS_DEGENERATE = 1e-14


class ActionError(ValueError):
    """Typed numeric failure; ``code`` is the stable machine-readable name."""

    code = "ActionError"


class DegeneratePathError(ActionError):
    """|p'|_L2 vanished: the path is (numerically) constant."""

    code = "DegeneratePath"


class DriftVanishesError(ActionError):
    """|b(p)|_L2 vanished: the drift is zero along the whole path."""

    code = "DriftVanishes"


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre rule mapped to each element.

    ``points_per_element`` q integrates polynomials of degree <= 2q - 1
    exactly; q = 2 is exact for quadratic integrands, hence for every
    functional here when the drift is linear.  Default used by the solvers
    is q = 3.
    """

    points_per_element: int = 3

    def __post_init__(self):
        q = self.points_per_element
        if q < 1:
            raise ValueError("need at least one quadrature point per element")
        x, w = np.polynomial.legendre.leggauss(q)
        xi = 0.5 * (x + 1.0)
        wts = 0.5 * w
        xi.flags.writeable = False
        wts.flags.writeable = False
        object.__setattr__(self, "xi", xi)      # nodes in (0, 1)
        object.__setattr__(self, "w", wts)      # weights summing to 1


@dataclass(frozen=True)
class ActionReport:
    """Value, optimal time, gradient, and stationarity diagnostics in one record."""

    value: float
    t_hat: float
    grad: np.ndarray
    hamiltonian_violation: float
    el_residual: float


# ---------------------------------------------------------------------------
# assembly internals (shared by the public functions and the optimizer)
# ---------------------------------------------------------------------------


class _Assembly:
    """Per-element quadrature data for one (path, field, rule) triple."""

    __slots__ = ("h", "delta", "deriv", "x_quad", "b_quad", "xi", "w", "n", "field")

    def __init__(self, nodes: np.ndarray, values: np.ndarray, field: DriftField, quad: Quadrature):
        self.h = np.diff(nodes)                      # (N,)
        self.delta = np.diff(values, axis=0)         # (N, n)
        self.deriv = self.delta / self.h[:, None]    # (N, n), constant per element
        self.xi = quad.xi
        self.w = quad.w
        self.n = values.shape[1]
        self.field = field
        shape_l = (1.0 - quad.xi)[None, :, None]
        shape_r = quad.xi[None, :, None]
        self.x_quad = values[:-1, None, :] * shape_l + values[1:, None, :] * shape_r  # (N, q, n)
        flat = self.x_quad.reshape(-1, self.n)
        self.b_quad = field.eval_many(flat).reshape(self.x_quad.shape)

    def jac_quad(self) -> np.ndarray:
        flat = self.x_quad.reshape(-1, self.n)
        return self.field.jacobian_many(flat).reshape(self.x_quad.shape + (self.n,))

    # squared L2 seminorm of p'
    def deriv_norm_sq(self) -> float:
        return float(np.sum(self.delta * self.deriv))

    # squared L2 norm of b(p)
    def drift_norm_sq(self) -> float:
        return float(np.einsum("e,q,eqi,eqi->", self.h, self.w, self.b_quad, self.b_quad))

    # <p', b(p)>
    def cross_term(self) -> float:
        return float(np.einsum("ei,q,eqi->", self.delta, self.w, self.b_quad))

    def grad_pieces(self):
        """Gradients of (|p'|^2, |b(p)|^2, <p', b(p)>) w.r.t. all nodal values."""
        num_nodes = self.h.size + 1
        jac = self.jac_quad()
        shape_l = (1.0 - self.xi)
        shape_r = self.xi

        g_dsq = np.zeros((num_nodes, self.n))
        g_dsq[:-1] -= 2.0 * self.deriv
        g_dsq[1:] += 2.0 * self.deriv

        jtb = np.einsum("eqji,eqj->eqi", jac, self.b_quad)
        g_bsq = np.zeros((num_nodes, self.n))
        g_bsq[:-1] += 2.0 * np.einsum("e,q,q,eqi->ei", self.h, self.w, shape_l, jtb)
        g_bsq[1:] += 2.0 * np.einsum("e,q,q,eqi->ei", self.h, self.w, shape_r, jtb)

        jtd = np.einsum("eqji,ej->eqi", jac, self.delta)
        wb = np.einsum("q,eqi->ei", self.w, self.b_quad)
        g_cross = np.zeros((num_nodes, self.n))
        g_cross[:-1] += -wb + np.einsum("q,q,eqi->ei", self.w, shape_l, jtd)
        g_cross[1:] += wb + np.einsum("q,q,eqi->ei", self.w, shape_r, jtd)
        return g_dsq, g_bsq, g_cross

    def fixed_t_value(self, t_scale: float) -> float:
        resid = self.deriv[:, None, :] / t_scale - self.b_quad
        return 0.5 * t_scale * float(np.einsum("e,q,eqi,eqi->", self.h, self.w, resid, resid))

    def fixed_t_grad(self, t_scale: float) -> np.ndarray:
        """Gradient of the fixed-T value w.r.t. all nodal values (residual form)."""
        num_nodes = self.h.size + 1
        resid = self.deriv[:, None, :] / t_scale - self.b_quad
        jac = self.jac_quad()
        jtr = np.einsum("eqji,eqj->eqi", jac, resid)
        wr = np.einsum("q,eqi->ei", self.w, resid)
        grad = np.zeros((num_nodes, self.n))
        grad[:-1] += -wr - t_scale * np.einsum("e,q,q,eqi->ei", self.h, self.w, 1.0 - self.xi, jtr)
        grad[1:] += wr - t_scale * np.einsum("e,q,q,eqi->ei", self.h, self.w, self.xi, jtr)
        return grad


def _assemble(path: FePath, field: DriftField, quad: Quadrature) -> _Assembly:
    if field.dim != path.dim:
        raise ValueError("path and drift field dimensions differ")
    return _Assembly(path.mesh.nodes, path.values, field, quad)


def _seminorms(asm: _Assembly):
    """(|p'|, |b(p)|) with degeneracy guards."""
    alpha = math.sqrt(asm.deriv_norm_sq())
    beta = math.sqrt(asm.drift_norm_sq())
    if alpha <= EPS_DEGENERATE:
        raise DegeneratePathError("path derivative seminorm is numerically zero")
    if beta <= EPS_DEGENERATE:
        raise DriftVanishesError(
            "drift vanishes along the path; the optimal time is unbounded"
        )
    return alpha, beta


# ---------------------------------------------------------------------------
# public functionals
# ---------------------------------------------------------------------------


def action_fixed_T(path: FePath, field: DriftField, T: float, quad: Quadrature) -> float:
    """Action of the path at the fixed horizon T (scaled-time quadrature form)."""
    if not T > 0.0:
        raise ValueError("T must be positive")
    return _assemble(path, field, quad).fixed_t_value(float(T))


def optimal_time(path: FePath, field: DriftField, quad: Quadrature) -> float:
    """Unique stationary horizon T_opt = |p'|_L2 / |b(p)|_L2 for the path shape.

    Raises :class:`DegeneratePathError` or :class:`DriftVanishesError` when
    either seminorm falls below the degeneracy guard.
    """
    alpha, beta = _seminorms(_assemble(path, field, quad))
    return alpha / beta


def action_optimal(path: FePath, field: DriftField, quad: Quadrature) -> ActionReport:
    """Reduced action at the optimal horizon, with gradient and diagnostics.

    The value comes from the inner-product rewrite
    |p'| |b(p)| - <p', b(p)> and equals ``action_fixed_T`` evaluated at
    ``t_hat`` up to roundoff.
    """
    asm = _assemble(path, field, quad)
    alpha, beta = _seminorms(asm)
    t_hat = alpha / beta
    value = alpha * beta - asm.cross_term()
    g_dsq, g_bsq, g_cross = asm.grad_pieces()
    grad = (beta / (2.0 * alpha)) * g_dsq + (alpha / (2.0 * beta)) * g_bsq - g_cross
    grad = grad[1:-1]
    viol = _violation_from_assembly(asm, t_hat)
    # by the envelope identity this gradient equals the fixed-horizon one at
    # t_hat, so it feeds the residual diagnostic directly
    resid = _el_residual_from_grad(grad, t_hat, alpha)
    return ActionReport(
        value=float(value),
        t_hat=float(t_hat),
        grad=grad,
        hamiltonian_violation=viol,
        el_residual=resid,
    )


def grad_action_fixed_T(path: FePath, field: DriftField, T: float, quad: Quadrature) -> np.ndarray:
    """Exact gradient of the discretized fixed-T action w.r.t. interior nodes."""
    if not T > 0.0:
        raise ValueError("T must be positive")
    return _assemble(path, field, quad).fixed_t_grad(float(T))[1:-1]


def grad_action_optimal(path: FePath, field: DriftField, quad: Quadrature) -> np.ndarray:
    """Exact gradient of the reduced action w.r.t. interior nodes.

    Assembled from the rewrite form; by the envelope identity (the T
    derivative vanishes at the optimal horizon) it agrees with
    ``grad_action_fixed_T`` evaluated at ``optimal_time(path)``.
    """
    asm = _assemble(path, field, quad)
    alpha, beta = _seminorms(asm)
    g_dsq, g_bsq, g_cross = asm.grad_pieces()
    grad = (beta / (2.0 * alpha)) * g_dsq + (alpha / (2.0 * beta)) * g_bsq - g_cross
    return grad[1:-1]


def _violation_from_assembly(asm: _Assembly, t_scale: float) -> float:
    speed = np.linalg.norm(asm.deriv, axis=1)[:, None] / t_scale   # (N, 1)
    drift_mag = np.linalg.norm(asm.b_quad, axis=2)                 # (N, q)
    return float(np.max(np.abs(speed - drift_mag)))


def hamiltonian_violation(path: FePath, field: DriftField, t_hat: float, quad: Quadrature) -> float:
    """Max over quadrature points of | |p'(s)|/T - |b(p(s))| |.

    Zero along any exact minimizer of the time-optimized problem (the
    zero-Hamiltonian constraint); positive otherwise.
    """
    if not t_hat > 0.0:
        raise ValueError("t_hat must be positive")
    return _violation_from_assembly(_assemble(path, field, quad), float(t_hat))


def _el_residual_from_grad(grad_interior: np.ndarray, t_scale: float, h1_seminorm: float) -> float:
    scale = t_scale * max(h1_seminorm, EPS_DEGENERATE)
    return float(np.linalg.norm(grad_interior) / scale)


def el_residual(path: FePath, field: DriftField, t_or_that: float, quad: Quadrature) -> float:
    """Discrete dual-norm Euler-Lagrange residual diagnostic.

    The weak-form residual of
    T^-2 p'' + T^-1 ((Db)^T - Db) p' - (Db)^T b = 0
    against the interior hat-function directions equals the fixed-T action
    gradient scaled by -1/T; reported is its Euclidean norm normalized by the
    path's H1 seminorm.  One defensible norm choice among several; used as a
    stationarity diagnostic, not an error bound.
    """
    if not t_or_that > 0.0:
        raise ValueError("T must be positive")
    asm = _assemble(path, field, quad)
    grad = asm.fixed_t_grad(float(t_or_that))[1:-1]
    h1 = math.sqrt(asm.deriv_norm_sq())
    return _el_residual_from_grad(grad, float(t_or_that), h1)


# fused value+gradient entry points for the optimizer (single assembly pass)


def fixed_t_value_grad(path: FePath, field: DriftField, T: float, quad: Quadrature):
    asm = _assemble(path, field, quad)
    return asm.fixed_t_value(float(T)), asm.fixed_t_grad(float(T))[1:-1]


def tmam_value_grad(path: FePath, field: DriftField, quad: Quadrature):
    asm = _assemble(path, field, quad)
    alpha, beta = _seminorms(asm)
    value = alpha * beta - asm.cross_term()
    g_dsq, g_bsq, g_cross = asm.grad_pieces()
    grad = (beta / (2.0 * alpha)) * g_dsq + (alpha / (2.0 * beta)) * g_bsq - g_cross
    return float(value), grad[1:-1], alpha / beta
