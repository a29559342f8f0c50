"""Spatial discretization: grid, state container, weighted energy inner
product, and the time-dependent evolution generator.

The beam occupies (0, L) with clamped left end (v = p = 0) and stress-free
right end (v_x = p_x = 0).  The delay variable z(x, y) lives on the unit
strip y in (0, 1) and transports the boundary trace z(., 0) = u toward
y = 1 with speed (1 - tau'(t) y)/tau(t).

The second-difference operator uses a zero row at x=0 (the Dirichlet node
never moves) and a mirror-ghost row at x=L.  With trapezoid quadrature this
pairing is summation-by-parts exact: for any g with g[0] = 0,

    sum_i wx_i g_i (D2 f)_i  =  - sum_i (f_{i+1}-f_i)(g_{i+1}-g_i)/hx,

so the semi-discrete wave energy identity holds to roundoff, not just to
truncation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import BeamModel, kappa

__all__ = [
    "Grid",
    "BeamState",
    "second_difference",
    "forward_diff",
    "transport_coefficients",
    "weighted_inner",
    "apply_generator",
    "dissipativity_residual",
    "dense_generator",
    "reduced_dense_generator",
    "random_state",
]


@dataclass
class Grid:
    """Uniform tensor grid: nx nodes on [0, L], ny nodes on [0, 1]."""

    nx: int
    ny: int
    length: float
    x: np.ndarray = field(init=False, repr=False)
    y: np.ndarray = field(init=False, repr=False)
    hx: float = field(init=False, repr=False)
    hy: float = field(init=False, repr=False)
    wx: np.ndarray = field(init=False, repr=False)
    wy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.nx < 3:
            raise ValueError("nx must be at least 3")
        if self.ny < 2:
            raise ValueError("ny must be at least 2")
        if self.length <= 0.0:
            raise ValueError("length must be positive")
        self.x = np.linspace(0.0, self.length, self.nx)
        self.y = np.linspace(0.0, 1.0, self.ny)
        self.hx = self.length / (self.nx - 1)
        self.hy = 1.0 / (self.ny - 1)
        self.wx = np.full(self.nx, self.hx)
        self.wx[0] = self.wx[-1] = self.hx / 2.0
        self.wy = np.full(self.ny, self.hy)
        self.wy[0] = self.wy[-1] = self.hy / 2.0


@dataclass
class BeamState:
    """State (v, u, p, q, z): displacement, velocity, charge-like field, its
    rate, and the delay strip z[i, j] ~ u(x_i, t - tau(t) y_j)."""

    v: np.ndarray
    u: np.ndarray
    p: np.ndarray
    q: np.ndarray
    z: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "BeamState":
        return cls(
            v=np.zeros(grid.nx),
            u=np.zeros(grid.nx),
            p=np.zeros(grid.nx),
            q=np.zeros(grid.nx),
            z=np.zeros((grid.nx, grid.ny)),
        )

    def copy(self) -> "BeamState":
        return BeamState(self.v.copy(), self.u.copy(), self.p.copy(), self.q.copy(), self.z.copy())

    def scaled(self, a: float) -> "BeamState":
        return BeamState(a * self.v, a * self.u, a * self.p, a * self.q, a * self.z)

    def axpy(self, a: float, other: "BeamState") -> "BeamState":
        """self + a * other, as a new state."""
        return BeamState(
            self.v + a * other.v,
            self.u + a * other.u,
            self.p + a * other.p,
            self.q + a * other.q,
            self.z + a * other.z,
        )

    def pack(self) -> np.ndarray:
        return np.concatenate([self.v, self.u, self.p, self.q, self.z.ravel()])

    @classmethod
    def unpack(cls, vec: np.ndarray, grid: Grid) -> "BeamState":
        nx, ny = grid.nx, grid.ny
        v, u, p, q = (vec[k * nx : (k + 1) * nx].copy() for k in range(4))
        z = vec[4 * nx :].reshape(nx, ny).copy()
        return cls(v=v, u=u, p=p, q=q, z=z)


def second_difference(f: np.ndarray, hx: float) -> np.ndarray:
    """Three-point second difference with Dirichlet row 0 and mirror-ghost
    Neumann row at the far end.

    Row 0 is identically zero (the clamped node carries no dynamics).  The
    last row is 2*(f[-2] - f[-1])/hx^2, the interior stencil applied to the
    even reflection across x = L; it vanishes to O(hx^2) exactly when the
    profile has zero slope there.
    """
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / hx**2
    out[-1] = 2.0 * (f[-2] - f[-1]) / hx**2
    return out


def forward_diff(f: np.ndarray, hx: float) -> np.ndarray:
    """Interval slopes (f[i+1]-f[i])/hx, the strain seen by the energy form."""
    f = np.asarray(f, dtype=float)
    return (f[1:] - f[:-1]) / hx


def transport_coefficients(model: BeamModel, t: float, grid: Grid) -> np.ndarray:
    """Transport speed (1 - tau'(t) y)/tau(t) at each y node."""
    tau = float(model.delay.tau(t))
    dtau = float(model.delay.dtau(t))
    return (1.0 - dtau * grid.y) / tau


def weighted_inner(a: BeamState, b: BeamState, model: BeamModel, t: float, grid: Grid) -> float:
    """Time-t energy inner product of two states.

    rho<u,u~> + mu<q,q~> + alpha1<v_x,v_x~> + beta<gamma v_x - p_x, .~>
    + xi(t) tau(t) <<z, z~>>, with strains evaluated as interval slopes and
    integrals by trapezoid (x) and midpoint-in-strain (intervals carry weight
    hx) quadrature.
    """
    par = model.params
    dva, dvb = forward_diff(a.v, grid.hx), forward_diff(b.v, grid.hx)
    dpa, dpb = forward_diff(a.p, grid.hx), forward_diff(b.p, grid.hx)
    acc = par.rho * float(np.dot(grid.wx, a.u * b.u))
    acc += par.mu * float(np.dot(grid.wx, a.q * b.q))
    acc += par.alpha1 * grid.hx * float(np.dot(dva, dvb))
    acc += par.beta * grid.hx * float(
        np.dot(par.gamma * dva - dpa, par.gamma * dvb - dpb)
    )
    xi_tau = float(model.xi(t)) * float(model.delay.tau(t))
    acc += xi_tau * float(np.dot(grid.wx, (a.z * b.z) @ grid.wy))
    return acc


def apply_generator(state: BeamState, model: BeamModel, t: float, grid: Grid) -> BeamState:
    """Right-hand side of the first-order evolution at time t.

    The z inflow row (y = 0) gets zero rate here; steppers re-impose the
    constraint z[:, 0] = u after each update, which keeps this operator
    linear and leaves the constraint subspace invariant.
    """
    par = model.params
    d2v = second_difference(state.v, grid.hx)
    d2p = second_difference(state.p, grid.hx)
    mu1 = float(model.damping.mu1(t))
    mu2 = float(model.damping.mu2(t))
    gb = par.gamma * par.beta
    dv = state.u.copy()
    du = (par.alpha * d2v - gb * d2p - mu1 * state.u - mu2 * state.z[:, -1]) / par.rho
    dp = state.q.copy()
    dq = (par.beta * d2p - gb * d2v) / par.mu
    c = transport_coefficients(model, t, grid)
    dz = np.zeros_like(state.z)
    dz[:, 1:] = -(c[1:] / grid.hy) * (state.z[:, 1:] - state.z[:, :-1])
    return BeamState(v=dv, u=du, p=dp, q=dq, z=dz)


def dissipativity_residual(state: BeamState, model: BeamModel, t: float, grid: Grid) -> float:
    """<A(t)U, U>_t - kappa(t) <U, U>_t; nonpositive for the continuum
    operator on admissible models."""
    rate = apply_generator(state, model, t, grid)
    k = float(kappa(t, model.delay))
    return weighted_inner(rate, state, model, t, grid) - k * weighted_inner(
        state, state, model, t, grid
    )


def _d2_row(i: int, nx: int, hx: float) -> dict:
    if i == 0:
        return {}
    if i == nx - 1:
        return {nx - 2: 2.0 / hx**2, nx - 1: -2.0 / hx**2}
    return {i - 1: 1.0 / hx**2, i: -2.0 / hx**2, i + 1: 1.0 / hx**2}


def dense_generator(model: BeamModel, t: float, grid: Grid) -> np.ndarray:
    """Explicit matrix of :func:`apply_generator` on the packed state vector
    [v, u, p, q, z.ravel()].  Assembled entry by entry; used as an
    independent route to cross-check the vectorized action and to feed dense
    ODE reference solves on small grids."""
    nx, ny = grid.nx, grid.ny
    n = 4 * nx + nx * ny
    A = np.zeros((n, n))
    par = model.params
    mu1 = float(model.damping.mu1(t))
    mu2 = float(model.damping.mu2(t))
    gb = par.gamma * par.beta

    def iv(i):
        return i

    def iu(i):
        return nx + i

    def ip(i):
        return 2 * nx + i

    def iq(i):
        return 3 * nx + i

    def iz(i, j):
        return 4 * nx + i * ny + j

    for i in range(nx):
        A[iv(i), iu(i)] = 1.0
        A[ip(i), iq(i)] = 1.0
        for col, coef in _d2_row(i, nx, grid.hx).items():
            A[iu(i), iv(col)] += par.alpha * coef / par.rho
            A[iu(i), ip(col)] += -gb * coef / par.rho
            A[iq(i), ip(col)] += par.beta * coef / par.mu
            A[iq(i), iv(col)] += -gb * coef / par.mu
        A[iu(i), iu(i)] += -mu1 / par.rho
        A[iu(i), iz(i, ny - 1)] += -mu2 / par.rho

    c = transport_coefficients(model, t, grid)
    for i in range(nx):
        for j in range(1, ny):
            A[iz(i, j), iz(i, j)] += -c[j] / grid.hy
            A[iz(i, j), iz(i, j - 1)] += c[j] / grid.hy
    return A


def reduced_dense_generator(model: BeamModel, t: float, grid: Grid) -> np.ndarray:
    """Dense generator on the constraint subspace z[:, 0] = u.

    State vector [v, u, p, q, z[:, 1:].ravel()]; the first transport row
    reads its upwind neighbour from u directly, so ordinary ODE integrators
    applied to this matrix reproduce the constrained dynamics exactly."""
    nx, ny = grid.nx, grid.ny
    n = 4 * nx + nx * (ny - 1)
    A = np.zeros((n, n))
    par = model.params
    mu1 = float(model.damping.mu1(t))
    mu2 = float(model.damping.mu2(t))
    gb = par.gamma * par.beta

    def iv(i):
        return i

    def iu(i):
        return nx + i

    def ip(i):
        return 2 * nx + i

    def iq(i):
        return 3 * nx + i

    def iz(i, j):
        # j >= 1
        return 4 * nx + i * (ny - 1) + (j - 1)

    for i in range(nx):
        A[iv(i), iu(i)] = 1.0
        A[ip(i), iq(i)] = 1.0
        for col, coef in _d2_row(i, nx, grid.hx).items():
            A[iu(i), iv(col)] += par.alpha * coef / par.rho
            A[iu(i), ip(col)] += -gb * coef / par.rho
            A[iq(i), ip(col)] += par.beta * coef / par.mu
            A[iq(i), iv(col)] += -gb * coef / par.mu
        A[iu(i), iu(i)] += -mu1 / par.rho
        A[iu(i), iz(i, ny - 1)] += -mu2 / par.rho

    c = transport_coefficients(model, t, grid)
    for i in range(nx):
        for j in range(1, ny):
            A[iz(i, j), iz(i, j)] += -c[j] / grid.hy
            if j == 1:
                A[iz(i, j), iu(i)] += c[j] / grid.hy
            else:
                A[iz(i, j), iz(i, j - 1)] += c[j] / grid.hy
    return A


def random_state(
    grid: Grid,
    model: BeamModel,
    t: float,
    rng: np.random.Generator,
    modes: int = 6,
    normalize: bool = True,
) -> BeamState:
    """Random smooth state compatible with the boundary conditions and the
    inflow constraint z[:, 0] = u.

    Fields are sums of sin((2k-1) pi x / 2L) modes (zero value at x=0, zero
    slope at x=L) with 1/k^2 coefficients; z adds u spread by cos(pi y/2)
    plus sin(m pi y / 2) corrections that vanish at y=0.  With normalize,
    the state has unit energy norm at time t.
    """
    L = grid.length
    x, y = grid.x, grid.y

    def smooth_field() -> np.ndarray:
        f = np.zeros(grid.nx)
        for k in range(1, modes + 1):
            f += rng.standard_normal() / k**2 * np.sin((2 * k - 1) * np.pi * x / (2.0 * L))
        return f

    v, u, p, q = smooth_field(), smooth_field(), smooth_field(), smooth_field()
    z = np.outer(u, np.cos(np.pi * y / 2.0))
    for k in range(1, modes + 1):
        phi = np.sin((2 * k - 1) * np.pi * x / (2.0 * L))
        for m in range(1, modes + 1):
            z += rng.standard_normal() / (k * k * m * m) * np.outer(phi, np.sin(m * np.pi * y / 2.0))
    state = BeamState(v=v, u=u, p=p, q=q, z=z)
    if normalize:
        nrm = math.sqrt(weighted_inner(state, state, model, t, grid))
        state = state.scaled(1.0 / nrm)
    return state
