"""Discretized control-to-endpoint operator and its singular system.

The endpoint map of one family member is, after pulling the free evolution
back to time zero,

    (L u)(s) = integral over [0,T] of  h(s,t) u(t) dt,
    h(s,t)  = Phi(0,t;s) B(t,s),

a compact integral operator from time-domain controls to parameter-domain
state offsets.  On a quadrature grid it becomes one matrix

    K = D_s^(1/2) H D_t^(1/2)

acting between weight-embedded coordinates, where H stacks the kernel
blocks and D_t, D_s repeat the quadrature weights across input channels and
state components.  The SVD of K, un-embedded from the weight metric, yields
singular triples that are orthonormal in the weighted L2 inner products of
the two domains; truncating the triples gives the minimum-norm control and
its finite-rank diagnostics.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ParameterError, ShapeError

DEFAULT_RANK_TOL = 1e-12


@dataclass(frozen=True)
class ControlSignal:
    """Sampled (possibly complex, possibly multi-channel) control.

    ``channels`` has shape (n_time, m); ``time_nodes`` are the sample
    instants.  Between samples the toolkit's simulators interpolate
    linearly.
    """

    channels: np.ndarray
    time_nodes: np.ndarray

    def __post_init__(self):
        if self.channels.shape[0] != len(self.time_nodes):
            raise ShapeError("sample count does not match time grid")

    @property
    def m(self):
        return self.channels.shape[1]


@dataclass(frozen=True)
class DiscreteOperator:
    """Quadrature discretization of the control-to-endpoint operator."""

    kernel_samples: np.ndarray   # (n_param, n_time, n, m)
    grid: "Grid"
    weighted_matrix: np.ndarray  # (n_param*n, n_time*m)
    n: int
    m: int

    @property
    def time_weights_flat(self):
        """One scalar weight per time node, replicated across channels."""
        return np.repeat(self.grid.time_weights, self.m)

    @property
    def param_weights_flat(self):
        return np.repeat(self.grid.param_weights, self.n)


def assemble(spec, grid, transitions):
    """Assemble the discrete endpoint operator from transition matrices.

    ``kernel_samples[j, i] = Phi(0, t_i; s_j) B(t_i, s_j)``; the weighted
    matrix embeds trapezoidal weights symmetrically so that its plain matrix
    SVD is the singular system in the weighted inner products.
    """
    if transitions.grid is not grid and (
            len(transitions.grid.time_nodes) != len(grid.time_nodes)
            or not np.array_equal(transitions.grid.time_nodes, grid.time_nodes)
            or not np.array_equal(transitions.grid.param_nodes, grid.param_nodes)):
        raise ShapeError("transition tensor was computed on a different grid")
    n, m = spec.n, spec.m
    ns, nt = grid.n_param, grid.n_time
    kernel = np.empty((ns, nt, n, m), dtype=complex)
    for j, s in enumerate(grid.param_nodes):
        for i, t in enumerate(grid.time_nodes):
            Bti = np.asarray(spec.B(t, s), dtype=complex)
            if Bti.shape != (n, m):
                raise ShapeError(f"B({t}, {s}) has shape {Bti.shape}, "
                                 f"expected {(n, m)}")
            kernel[j, i] = transitions.inverse_values[j, i] @ Bti
    if not np.all(np.isfinite(kernel.view(float))):
        raise NumericalError("kernel contains non-finite entries")
    H = kernel.transpose(0, 2, 1, 3).reshape(ns * n, nt * m)
    ws = np.repeat(grid.param_weights, n)
    wt = np.repeat(grid.time_weights, m)
    K = np.sqrt(ws)[:, None] * H * np.sqrt(wt)[None, :]
    return DiscreteOperator(kernel_samples=kernel, grid=grid,
                            weighted_matrix=K, n=n, m=m)


def apply_operator(op, u_samples):
    """Quadrature evaluation of (L u)(s_j) for control samples (n_time, m).

    Returns an (n_param, n) array.  Equals the weight-unembedded action of
    the weighted matrix by construction.
    """
    u = np.asarray(u_samples, dtype=complex)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape != (op.grid.n_time, op.m):
        raise ShapeError(f"control has shape {u.shape}, expected "
                         f"({op.grid.n_time}, {op.m})")
    wt = op.grid.time_weights
    return np.einsum("jinm,im,i->jn", op.kernel_samples, u, wt)


def apply_adjoint(op, f_samples):
    """Quadrature evaluation of the adjoint map at every time node.

    ``f_samples`` holds parameter-domain values, shape (n_param, n); the
    result has shape (n_time, m) and discretizes
    ``t  ->  integral of B(t,s)^H Phi(0,t;s)^H f(s) ds``.
    """
    f = np.asarray(f_samples, dtype=complex)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape != (op.grid.n_param, op.n):
        raise ShapeError(f"f has shape {f.shape}, expected "
                         f"({op.grid.n_param}, {op.n})")
    ws = op.grid.param_weights
    return np.einsum("jinm,jn,j->im", op.kernel_samples.conj(), f, ws)


def time_inner(u, v, grid):
    """Weighted time-domain inner product, conjugate-linear in the first slot."""
    return np.einsum("ic,ic,i->", np.conj(u), v, grid.time_weights)


def param_inner(f, g, grid):
    """Weighted parameter-domain inner product, conjugate-linear in the first slot."""
    return np.einsum("jn,jn,j->", np.conj(f), g, grid.param_weights)


def time_norm(u, grid):
    return float(np.sqrt(np.einsum("ic,ic,i->", np.conj(u), u,
                                   grid.time_weights).real))


def param_norm(f, grid):
    return float(np.sqrt(np.einsum("jn,jn,j->", np.conj(f), f,
                                   grid.param_weights).real))


@dataclass(frozen=True)
class SingularSystem:
    """Retained singular triples of the discretized endpoint operator.

    ``sigmas`` decrease strictly to the rank cutoff; ``left_functions``
    (time domain, shape (r, n_time, m)) and ``right_functions`` (parameter
    domain, shape (r, n_param, n)) are orthonormal under the weighted inner
    products and satisfy the pairing relations of the operator and its
    adjoint up to solver roundoff.
    """

    sigmas: np.ndarray
    left_functions: np.ndarray
    right_functions: np.ndarray
    rank_cutoff: int
    rank_tol: float
    grid: "Grid"
    n: int
    m: int

    def to_dict(self):
        return {
            "schema": 1,
            "rank_cutoff": int(self.rank_cutoff),
            "rank_tol": float(self.rank_tol),
            "sigmas": [float(s) for s in self.sigmas],
        }


def singular_system(op, rank_tol=DEFAULT_RANK_TOL):
    """Singular triples of the weighted matrix, un-embedded from the metric.

    Triples with sigma <= sigma_1 * rank_tol are dropped.  Each retained
    pair is rotated by a unit phase so that the largest-magnitude entry of
    the parameter-domain function is real positive, making outputs
    reproducible.
    """
    K = op.weighted_matrix
    try:
        U, s, Vh = np.linalg.svd(K, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    if s[0] == 0.0:
        raise NumericalError("operator is identically zero")
    keep = s > s[0] * rank_tol
    r = int(keep.sum())
    U, s, Vh = U[:, :r], s[:r], Vh[:r]
    # deterministic phase: largest |entry| of each right function real
    # positive; the row of Vh carries the conjugate rotation so the pairing
    # K v_k = sigma_k u_k is preserved
    for k in range(r):
        i = int(np.argmax(np.abs(U[:, k])))
        ph = U[i, k] / abs(U[i, k])
        U[:, k] *= np.conj(ph)
        Vh[k] *= ph
    ws = np.sqrt(op.param_weights_flat)
    wt = np.sqrt(op.time_weights_flat)
    nu = (U / ws[:, None]).T.reshape(r, op.grid.n_param, op.n)
    mu = (Vh.conj() / wt[None, :]).reshape(r, op.grid.n_time, op.m)
    return SingularSystem(sigmas=s, left_functions=mu, right_functions=nu,
                          rank_cutoff=r, rank_tol=rank_tol, grid=op.grid,
                          n=op.n, m=op.m)


@dataclass(frozen=True)
class TargetOffset:
    """Endpoint mismatch pulled back to time zero, per parameter node."""

    values: np.ndarray  # (n_param, n)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values.view(float))):
            raise NumericalError("target offset contains non-finite entries")


def target_offset(transitions, x0, xF):
    """Pull the target back through the free flow: Phi(0,T;s) xF(s) - x0(s)."""
    x0 = np.asarray(x0, dtype=complex)
    xF = np.asarray(xF, dtype=complex)
    ns = transitions.values.shape[0]
    n = transitions.values.shape[2]
    if x0.shape != (ns, n) or xF.shape != (ns, n):
        raise ShapeError(f"profiles must have shape ({ns}, {n})")
    pulled = np.einsum("jnk,jk->jn", transitions.inverse_values[:, -1], xF)
    return TargetOffset(values=pulled - x0)


@dataclass
class PicardReport:
    """Finite-rank proxies for the two solvability conditions of the
    endpoint equation.

    ``coefficients`` are the expansions of the target offset in the
    parameter-domain singular functions; ``partial_sums`` accumulate
    |c_n|^2 / sigma_n^2 (the square of the minimum-norm control's norm when
    it exists); ``range_residual`` is the relative distance from the target
    to the span of the retained right functions.  ``decay_exponent`` is the
    log-log slope of |c_n| against sigma_n, so values above 1 indicate
    coefficients decaying fast enough for a square-integrable control.
    Classification is left to thresholds: the default declares the range
    condition satisfied at this resolution when the residual is at most
    ``residual_threshold``.
    """

    coefficients: np.ndarray
    partial_sums: np.ndarray
    range_residual: float
    decay_exponent: float
    residual_threshold: float
    range_condition_met: bool
    target_norm: float

    def to_dict(self):
        return {
            "schema": 1,
            "coefficients_re": [float(c.real) for c in self.coefficients],
            "coefficients_im": [float(c.imag) for c in self.coefficients],
            "partial_sums": [float(p) for p in self.partial_sums],
            "range_residual": float(self.range_residual),
            "decay_exponent": float(self.decay_exponent),
            "residual_threshold": float(self.residual_threshold),
            "range_condition_met": bool(self.range_condition_met),
            "target_norm": float(self.target_norm),
        }


def picard_diagnostic(sing, xi, residual_threshold=1e-3):
    """Expansion coefficients, partial sums and range residual for a target.

    The two classical solvability conditions cannot be verified literally at
    finite rank; this reports their finite-rank proxies and applies the
    caller's residual threshold for the range condition only.
    """
    vals = np.asarray(xi.values, dtype=complex)
    if vals.shape != (sing.grid.n_param, sing.n):
        raise ShapeError("target offset is on a different grid")
    coeffs = np.array([param_inner(nu, vals, sing.grid)
                       for nu in sing.right_functions])
    partial = np.cumsum(np.abs(coeffs) ** 2 / sing.sigmas ** 2)
    recon = np.tensordot(coeffs, sing.right_functions, axes=(0, 0))
    xi_norm = param_norm(vals, sing.grid)
    resid = param_norm(vals - recon, sing.grid) / xi_norm if xi_norm > 0 else 0.0
    # log-log decay fit over coefficients clearly above roundoff
    cmax = np.abs(coeffs).max() if len(coeffs) else 0.0
    mask = np.abs(coeffs) > max(cmax, 1.0) * 1e-13
    if mask.sum() >= 2:
        slope = np.polyfit(np.log(sing.sigmas[mask]),
                           np.log(np.abs(coeffs[mask])), 1)[0]
    else:
        slope = np.nan
    return PicardReport(coefficients=coeffs, partial_sums=partial,
                        range_residual=float(resid), decay_exponent=float(slope),
                        residual_threshold=residual_threshold,
                        range_condition_met=bool(resid <= residual_threshold),
                        target_norm=float(xi_norm))


@dataclass
class SynthesisResult:
    """Truncated minimum-norm control and its achieved endpoint residual.

    ``eps_reached`` is False when the requested accuracy could not be met
    with the retained rank; the control is then the best achievable at this
    resolution, which is itself a meaningful diagnosis of practical
    non-steerability.
    """

    control: ControlSignal
    N_used: int
    achieved_residual: float
    eps: float
    eps_reached: bool
    residual_history: np.ndarray = field(repr=False, default=None)
    control_norm: float = 0.0
    coefficients: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {
            "schema": 1,
            "N_used": int(self.N_used),
            "achieved_residual": float(self.achieved_residual),
            "eps": float(self.eps),
            "eps_reached": bool(self.eps_reached),
            "control_norm": float(self.control_norm),
            "residual_history": [float(r) for r in self.residual_history],
        }


def synthesize_min_norm(sing, xi, eps):
    """Truncated minimum-norm control for the endpoint equation.

    Builds partial sums of (1/sigma_n) <nu_n, xi> mu_n and stops at the
    smallest truncation whose weighted endpoint residual is at most ``eps``
    (or at the full retained rank, flagged, when ``eps`` is unreachable).
    Residuals are computed from explicit residual vectors, so the reported
    history is honest and nonincreasing.
    """
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    vals = np.asarray(xi.values, dtype=complex)
    coeffs = np.array([param_inner(nu, vals, sing.grid)
                       for nu in sing.right_functions])
    xi_norm = param_norm(vals, sing.grid)
    floor = max(eps, 1e-12 * xi_norm)

    resid_hist = []
    recon = np.zeros_like(vals)
    if xi_norm <= floor:
        N = 0
    else:
        N = sing.rank_cutoff
        for k in range(sing.rank_cutoff):
            recon = recon + coeffs[k] * sing.right_functions[k]
            r = param_norm(vals - recon, sing.grid)
            resid_hist.append(r)
            if r <= floor:
                N = k + 1
                break
    resid_hist = np.array(resid_hist)
    achieved = float(resid_hist[N - 1]) if N >= 1 else xi_norm

    u = np.tensordot(coeffs[:N] / sing.sigmas[:N], sing.left_functions[:N],
                     axes=(0, 0))
    control = ControlSignal(channels=u, time_nodes=sing.grid.time_nodes)
    return SynthesisResult(
        control=control, N_used=N, achieved_residual=achieved, eps=eps,
        eps_reached=bool(achieved <= floor),
        residual_history=resid_hist,
        control_norm=time_norm(u, sing.grid),
        coefficients=coeffs[:N],
    )


@dataclass
class IllposednessReport:
    """Measured input/output perturbation norms for one singular mode.

    Perturbing the target along the n-th right function by amplitude
    ``a * sqrt(sigma_n)`` changes the synthesized control by
    ``a / sqrt(sigma_n)``; the measured ratio is the amplification
    ``1 / sigma_n``, which grows without bound down the spectrum.  That
    growth is the discrete face of the endpoint equation's discontinuous
    dependence on the target.
    """

    mode_index: int
    sigma: float
    amplitude: float
    xi_perturbation_norm: float
    control_perturbation_norm: float
    measured_amplification: float
    amplification: float

    def to_dict(self):
        return {
            "schema": 1,
            "mode_index": int(self.mode_index),
            "sigma": float(self.sigma),
            "amplitude": float(self.amplitude),
            "xi_perturbation_norm": float(self.xi_perturbation_norm),
            "control_perturbation_norm": float(self.control_perturbation_norm),
            "measured_amplification": float(self.measured_amplification),
            "amplification": float(self.amplification),
        }


def illposedness_demo(sing, xi, mode_index, amplitude):
    """Perturb the target along one singular mode and re-synthesize.

    Both norms are measured independently from the two synthesized controls
    (full retained rank, so the comparison isolates the perturbed mode).
    """
    if not 1 <= mode_index <= sing.rank_cutoff:
        raise ParameterError(
            f"mode_index must lie in [1, {sing.rank_cutoff}]")
    k = mode_index - 1
    sigma = float(sing.sigmas[k])
    delta = amplitude * np.sqrt(sigma) * sing.right_functions[k]
    xi_tilde = TargetOffset(values=xi.values + delta)

    base = synthesize_min_norm(sing, xi, eps=0.0)
    pert = synthesize_min_norm(sing, xi_tilde, eps=0.0)
    d_xi = param_norm(xi_tilde.values - xi.values, sing.grid)
    d_u = time_norm(pert.control.channels - base.control.channels, sing.grid)
    measured = d_u / d_xi if d_xi > 0 else 1.0 / sigma
    return IllposednessReport(
        mode_index=mode_index, sigma=sigma, amplitude=amplitude,
        xi_perturbation_norm=d_xi, control_perturbation_norm=d_u,
        measured_amplification=measured, amplification=1.0 / sigma)
