"""Parameterized families of time-varying linear systems.

A family is the collection of systems

    dX/dt = A(t, s) X + B(t, s) u(t),    t in [0, T],  s in [s1, s2],

sharing one open-loop input u.  This module holds the family description
(`SystemSpec`), quadrature grids over the time x parameter rectangle,
state-transition matrices computed by step-refined RK4 integration, ensemble
simulation under a sampled control, and the repeated-eigenvalue diagnostic
for frozen-coefficient families.

All operations are pure functions of their inputs and single-threaded;
results are deterministic for fixed inputs.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, ParameterError, ShapeError, ToleranceNotMetError

# Refinement ceiling: substeps per grid interval may grow to 2**MAX_HALVINGS.
MAX_HALVINGS = 12


@dataclass(frozen=True)
class SystemSpec:
    """A family of linear time-varying systems over [0,T] x [s1,s2].

    Parameters
    ----------
    n, m : int
        State and input dimensions.
    A : callable
        ``A(t, s) -> (n, n)`` complex array.
    B : callable
        ``B(t, s) -> (n, m)`` complex array.
    t_span, s_span : tuple of float
        Time horizon ``(0, T)`` with ``T > 0`` and parameter interval
        ``(s1, s2)`` with ``s1 < s2``.
    time_invariant_A, time_invariant_B : bool
        Declare that the coefficient does not depend on ``t``.  Purely an
        evaluation-caching hint; results are unchanged.
    name : str
        Optional label used in reports.
    """

    n: int
    m: int
    A: callable
    B: callable
    t_span: tuple
    s_span: tuple
    time_invariant_A: bool = False
    time_invariant_B: bool = False
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ParameterError("state and input dimensions must be >= 1")
        t0, t1 = self.t_span
        if not (t0 == 0.0 and t1 > 0.0):
            raise ParameterError("t_span must be (0, T) with T > 0")
        s1, s2 = self.s_span
        if not s1 < s2:
            raise ParameterError("s_span must satisfy s1 < s2")
        self._check_finite_by_sampling()

    def _check_finite_by_sampling(self):
        t0, t1 = self.t_span
        s1, s2 = self.s_span
        for t in (t0, 0.5 * (t0 + t1), t1):
            for s in (s1, 0.5 * (s1 + s2), s2):
                for fn, shape, label in ((self.A, (self.n, self.n), "A"),
                                         (self.B, (self.n, self.m), "B")):
                    M = np.asarray(fn(t, s), dtype=complex)
                    if M.shape != shape:
                        raise ShapeError(
                            f"{label}({t}, {s}) has shape {M.shape}, expected {shape}")
                    if not np.all(np.isfinite(M.view(float))):
                        raise IntegrationError(
                            f"{label}({t}, {s}) returned non-finite entries", t=t, s=s)

    @property
    def T(self):
        return self.t_span[1]


@dataclass(frozen=True)
class Grid:
    """Quadrature grid on the time x parameter rectangle.

    Node vectors are strictly increasing and include both interval
    endpoints; weights are positive and sum to the interval lengths.
    """

    time_nodes: np.ndarray
    param_nodes: np.ndarray
    time_weights: np.ndarray
    param_weights: np.ndarray

    def __post_init__(self):
        for nodes, weights, label in ((self.time_nodes, self.time_weights, "time"),
                                      (self.param_nodes, self.param_weights, "param")):
            if len(nodes) < 2:
                raise ParameterError(f"{label} grid needs at least 2 nodes")
            if not np.all(np.diff(nodes) > 0):
                raise ParameterError(f"{label} nodes must be strictly increasing")
            if np.any(weights <= 0):
                raise ParameterError(f"{label} weights must be positive")
            length = nodes[-1] - nodes[0]
            if abs(weights.sum() - length) > 1e-12 * max(length, 1.0):
                raise ParameterError(
                    f"{label} weights sum to {weights.sum()}, expected {length}")

    @property
    def n_time(self):
        return len(self.time_nodes)

    @property
    def n_param(self):
        return len(self.param_nodes)


def uniform_grid(spec, n_time, n_param):
    """Uniform nodes over the spec's rectangle with trapezoidal weights.

    Trapezoidal weights make the discrete adjoint identity of the endpoint
    operator exact, so this is the default grid everywhere.
    """
    return Grid(
        time_nodes=np.linspace(spec.t_span[0], spec.t_span[1], n_time),
        param_nodes=np.linspace(spec.s_span[0], spec.s_span[1], n_param),
        time_weights=_trapezoid_weights(spec.t_span[0], spec.t_span[1], n_time),
        param_weights=_trapezoid_weights(spec.s_span[0], spec.s_span[1], n_param),
    )


def _trapezoid_weights(a, b, n):
    w = np.full(n, (b - a) / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True)
class TransitionTensor:
    """Transition matrices at every (time node, parameter node).

    ``values[j, i]`` is the forward map from time 0 to ``time_nodes[i]`` at
    parameter ``param_nodes[j]``; ``inverse_values[j, i]`` is its inverse,
    obtained by integrating the reversed-flow equation rather than by matrix
    inversion.
    """

    values: np.ndarray          # (n_param, n_time, n, n)
    inverse_values: np.ndarray  # (n_param, n_time, n, n)
    grid: Grid
    step_tol: float


class _CoefficientEvaluator:
    """Evaluates A(t, s_j) for all parameter nodes as one stacked array,
    caching the stack when the coefficient is declared time-invariant."""

    def __init__(self, fn, svals, shape, time_invariant, label):
        self.fn = fn
        self.svals = np.asarray(svals)
        self.shape = shape
        self.time_invariant = time_invariant
        self.label = label
        self._cached = None

    def __call__(self, t):
        if self.time_invariant and self._cached is not None:
            return self._cached
        out = np.empty((len(self.svals),) + self.shape, dtype=complex)
        for j, s in enumerate(self.svals):
            M = np.asarray(self.fn(t, s), dtype=complex)
            if M.shape != self.shape:
                raise ShapeError(
                    f"{self.label}({t}, {s}) has shape {M.shape}, expected {self.shape}")
            if not np.all(np.isfinite(M.view(float))):
                raise IntegrationError(
                    f"{self.label}({t}, {s}) returned non-finite entries", t=t, s=s)
            out[j] = M
        if self.time_invariant:
            self._cached = out
        return out


def _rk4_homogeneous(A_at, Y0, time_nodes, n_sub, sign):
    """Integrate dY/dt = A Y (sign=+1) or dY/dt = -Y A (sign=-1), storing Y
    at every time node.  Y has shape (n_param, n, n)."""
    Y = Y0.copy()
    out = np.empty((Y.shape[0], len(time_nodes)) + Y.shape[1:], dtype=complex)
    out[:, 0] = Y
    if sign > 0:
        def f(A, Y):
            return np.einsum("sij,sjk->sik", A, Y)
    else:
        def f(A, Y):
            return -np.einsum("sij,sjk->sik", Y, A)
    for i in range(len(time_nodes) - 1):
        h = (time_nodes[i + 1] - time_nodes[i]) / n_sub
        t = time_nodes[i]
        for k in range(n_sub):
            t0 = t + k * h
            A1, A2, A3 = A_at(t0), A_at(t0 + 0.5 * h), A_at(t0 + h)
            k1 = f(A1, Y)
            k2 = f(A2, Y + 0.5 * h * k1)
            k3 = f(A2, Y + 0.5 * h * k2)
            k4 = f(A3, Y + h * k3)
            Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[:, i + 1] = Y
    return out


def _refine(run, step_tol):
    """Run `run(n_sub)` with substep doubling until the final-time slice
    changes by less than step_tol in max norm."""
    n_sub = 1
    prev = run(n_sub)
    while True:
        if n_sub >= 2 ** MAX_HALVINGS:
            raise ToleranceNotMetError(
                f"step refinement exceeded {2 ** MAX_HALVINGS} substeps per "
                f"interval without reaching step_tol={step_tol}")
        n_sub *= 2
        cur = run(n_sub)
        diff = np.abs(cur[:, -1] - prev[:, -1]).max()
        if diff < step_tol:
            return cur
        prev = cur


def transition_matrices(spec, grid, step_tol=1e-9):
    """Transition matrices of the homogeneous family on a grid.

    Integrates dPhi/dt = A(t,s) Phi from the identity with classical RK4,
    doubling the substep count per grid interval until the final-time matrix
    changes by less than ``step_tol`` in max norm.  Inverse transitions solve
    dPsi/dt = -Psi A(t,s), again from the identity, so no matrix is ever
    inverted.

    Returns
    -------
    TransitionTensor
    """
    if step_tol <= 0:
        raise ParameterError("step_tol must be positive")
    svals = grid.param_nodes
    A_at = _CoefficientEvaluator(spec.A, svals, (spec.n, spec.n),
                                 spec.time_invariant_A, "A")
    eye = np.tile(np.eye(spec.n, dtype=complex), (len(svals), 1, 1))
    fwd = _refine(lambda ns: _rk4_homogeneous(A_at, eye, grid.time_nodes, ns, +1),
                  step_tol)
    inv = _refine(lambda ns: _rk4_homogeneous(A_at, eye, grid.time_nodes, ns, -1),
                  step_tol)
    return TransitionTensor(values=fwd, inverse_values=inv, grid=grid,
                            step_tol=step_tol)


def transition_between(spec, s, t_start, t_end, step_tol=1e-9, n_steps=64):
    """Single transition matrix from t_start to t_end at one parameter value.

    Convenience for consistency checks (e.g. the two-interval composition
    property); integrates over a private uniform subgrid.
    """
    nodes = np.linspace(t_start, t_end, n_steps + 1)
    A_at = _CoefficientEvaluator(spec.A, [s], (spec.n, spec.n),
                                 spec.time_invariant_A, "A")
    eye = np.eye(spec.n, dtype=complex)[None]
    out = _refine(lambda ns: _rk4_homogeneous(A_at, eye, nodes, ns, +1), step_tol)
    return out[0, -1]


@dataclass(frozen=True)
class EnsembleTrajectory:
    """States X(t_i, s_j) of every ensemble member along the time grid."""

    states: np.ndarray  # (n_time, n_param, n)
    grid: Grid

    @property
    def final(self):
        return self.states[-1]


def _control_on_raster(u_samples, time_nodes, raster):
    """Piecewise-linear interpolation of control samples, per channel."""
    out = np.empty((len(raster), u_samples.shape[1]), dtype=complex)
    for c in range(u_samples.shape[1]):
        out[:, c] = (np.interp(raster, time_nodes, u_samples[:, c].real)
                     + 1j * np.interp(raster, time_nodes, u_samples[:, c].imag))
    return out


def _rk4_forced(A_at, B_at, X0, u_samples, time_nodes, n_sub):
    """Integrate dX/dt = A X + B u with u piecewise-linear between nodes.
    X has shape (n_param, n)."""
    n_steps = len(time_nodes) - 1
    # all stage times, shared across parameter nodes
    lefts = np.concatenate([time_nodes[i] + np.arange(n_sub)
                            * (time_nodes[i + 1] - time_nodes[i]) / n_sub
                            for i in range(n_steps)])
    hs = np.repeat(np.diff(time_nodes) / n_sub, n_sub)
    u_left = _control_on_raster(u_samples, time_nodes, lefts)
    u_mid = _control_on_raster(u_samples, time_nodes, lefts + 0.5 * hs)
    u_right = _control_on_raster(u_samples, time_nodes, lefts + hs)

    X = X0.copy()
    out = np.empty((len(time_nodes),) + X.shape, dtype=complex)
    out[0] = X

    def f(A, B, X, u):
        return np.einsum("sij,sj->si", A, X) + B @ u

    idx = 0
    for i in range(n_steps):
        for k in range(n_sub):
            t0, h = lefts[idx], hs[idx]
            A1, A2, A3 = A_at(t0), A_at(t0 + 0.5 * h), A_at(t0 + h)
            B1, B2, B3 = B_at(t0), B_at(t0 + 0.5 * h), B_at(t0 + h)
            k1 = f(A1, B1, X, u_left[idx])
            k2 = f(A2, B2, X + 0.5 * h * k1, u_mid[idx])
            k3 = f(A2, B2, X + 0.5 * h * k2, u_mid[idx])
            k4 = f(A3, B3, X + h * k3, u_right[idx])
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            idx += 1
        out[i + 1] = X
    return out


def simulate_ensemble(spec, grid, x0, u_samples, step_tol=1e-9):
    """Simulate every ensemble member under one shared sampled control.

    Parameters
    ----------
    x0 : array
        Initial profile, one state vector per parameter node,
        shape (n_param, n).
    u_samples : array
        Control samples on ``grid.time_nodes``, shape (n_time, m);
        interpolated piecewise-linearly between nodes.

    Returns
    -------
    EnsembleTrajectory
        The first time slice equals ``x0`` exactly.
    """
    x0 = np.asarray(x0, dtype=complex)
    if x0.shape != (grid.n_param, spec.n):
        raise ShapeError(f"x0 has shape {x0.shape}, expected "
                         f"({grid.n_param}, {spec.n})")
    u_samples = np.asarray(u_samples, dtype=complex)
    if u_samples.ndim == 1:
        u_samples = u_samples[:, None]
    if u_samples.shape != (grid.n_time, spec.m):
        raise ShapeError(f"control has shape {u_samples.shape}, expected "
                         f"({grid.n_time}, {spec.m})")
    svals = grid.param_nodes
    A_at = _CoefficientEvaluator(spec.A, svals, (spec.n, spec.n),
                                 spec.time_invariant_A, "A")
    B_at = _CoefficientEvaluator(spec.B, svals, (spec.n, spec.m),
                                 spec.time_invariant_B, "B")
    states = _refine(
        lambda ns: np.swapaxes(
            _rk4_forced(A_at, B_at, x0, u_samples, grid.time_nodes, ns), 0, 1),
        step_tol)
    states = np.swapaxes(states, 0, 1)
    states[0] = x0
    return EnsembleTrajectory(states=states, grid=grid)


@dataclass
class EigenvalueCollision:
    s_first: float
    s_second: float
    value_first: complex
    value_second: complex
    distance: float


@dataclass
class RepeatedEigenvalueReport:
    """Outcome of the repeated-eigenvalue diagnostic.

    ``passed`` is False when any two eigenvalues of the frozen coefficient
    matrices, within one matrix or across distinct parameter values, lie
    closer than the clustering tolerance.  A failing report means the family
    violates the necessary condition for steering a finite parameter set
    with a single input.
    """

    passed: bool
    collisions: list = field(default_factory=list)
    eigenvalues: dict = field(default_factory=dict)
    cluster_tol: float = 0.0


def repeated_eigenvalue_check(spec, param_samples, t_fixed=0.0, cluster_tol=1e-9):
    """Check A(t_fixed, s) for repeated eigenvalues across parameter samples.

    Intended for families whose A is time-invariant; the caller picks the
    freeze time.  Eigenvalues are compared pairwise across the union of all
    samples and flagged when closer than ``cluster_tol``.
    """
    samples = list(param_samples)
    if not samples:
        raise ParameterError("param_samples must be non-empty")
    eigs = {}
    for s in samples:
        M = np.asarray(spec.A(t_fixed, s), dtype=complex)
        try:
            eigs[s] = np.linalg.eigvals(M)
        except np.linalg.LinAlgError as exc:
            raise IntegrationError(f"eigenvalue solver failed at s={s}: {exc}",
                                   t=t_fixed, s=s) from exc
    flat = [(s, ev) for s in samples for ev in eigs[s]]
    collisions = []
    for a in range(len(flat)):
        for b in range(a + 1, len(flat)):
            sa, va = flat[a]
            sb, vb = flat[b]
            d = abs(va - vb)
            if d < cluster_tol:
                collisions.append(EigenvalueCollision(sa, sb, va, vb, d))
    return RepeatedEigenvalueReport(passed=not collisions, collisions=collisions,
                                    eigenvalues=eigs, cluster_tol=cluster_tol)


# ---------------------------------------------------------------------------
# Built-in families, selectable by name + parameter dict (see also cli).

def harmonic_family(omega1=-10.0, omega2=10.0, T=1.0):
    """Oscillator ensemble in complex scalar form: dp/dt = i*omega*p + alpha."""
    return SystemSpec(
        n=1, m=1,
        A=lambda t, w: np.array([[1j * w]]),
        B=lambda t, w: np.array([[1.0 + 0j]]),
        t_span=(0.0, T), s_span=(omega1, omega2),
        time_invariant_A=True, time_invariant_B=True,
        name="harmonic",
    )


def harmonic_family_2d(omega1=-10.0, omega2=10.0, T=1.0):
    """Oscillator ensemble in real 2x2 rotation form with two input channels."""
    return SystemSpec(
        n=2, m=2,
        A=lambda t, w: np.array([[0.0, -w], [w, 0.0]], dtype=complex),
        B=lambda t, w: np.eye(2, dtype=complex),
        t_span=(0.0, T), s_span=(omega1, omega2),
        time_invariant_A=True, time_invariant_B=True,
        name="harmonic2d",
    )


def example1_family(s1=1.0, s2=2.0, T=1.0):
    """Rotation with parameter-scaled single-channel input: dx/dt = Ax + s B u.

    The input directions commute across parameter values, so this family
    cannot be steered to arbitrary profiles; it is the stock witness for a
    range residual bounded away from zero.
    """
    A = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=complex)
    return SystemSpec(
        n=2, m=1,
        A=lambda t, s: A,
        B=lambda t, s: np.array([[s], [0.0]], dtype=complex),
        t_span=(0.0, T), s_span=(s1, s2),
        time_invariant_A=True, time_invariant_B=True,
        name="example1",
    )


def diagonal_family(s1=0.5, s2=2.0, T=1.0):
    """Scalar test family dx/dt = s x + u with closed-form transitions."""
    return SystemSpec(
        n=1, m=1,
        A=lambda t, s: np.array([[s + 0j]]),
        B=lambda t, s: np.array([[1.0 + 0j]]),
        t_span=(0.0, T), s_span=(s1, s2),
        time_invariant_A=True, time_invariant_B=True,
        name="diagonal",
    )


BUILTIN_FAMILIES = {
    "harmonic": harmonic_family,
    "harmonic2d": harmonic_family_2d,
    "example1": example1_family,
    "diagonal": diagonal_family,
}


def family_from_config(name, params=None):
    """Instantiate a built-in family by name with keyword parameters."""
    try:
        factory = BUILTIN_FAMILIES[name]
    except KeyError:
        raise ParameterError(
            f"unknown family '{name}'; available: {sorted(BUILTIN_FAMILIES)}")
    try:
        return factory(**(params or {}))
    except TypeError as exc:
        raise ParameterError(f"bad parameters for family '{name}': {exc}") from exc
