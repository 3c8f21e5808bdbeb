"""Discrete prolate spheroidal sequences and the phase-twisted band basis.

The sequences are the eigenvectors of the symmetric Toeplitz matrix with
entries ``sin(2 pi W (t - t')) / (pi (t - t'))`` (diagonal ``2W``); their
eigenvalues lie strictly inside (0, 1) and decrease strictly.  Mapped onto
a uniform frequency band [-beta, beta] and twisted by the half-horizon
phase ``exp(-i omega T / 2)``, they diagonalize the composition of the
band-steering operator with its adjoint, with eigenvalues ``2 pi kappa_n``.

Two eigensolvers are provided.  The dense symmetric solver is the default
and resolves every eigenvalue above roughly 1e-14.  Deeper modes carry
eigenvalues below the double-precision noise floor of the assembled matrix,
yet their band content is still needed for sharp steering targets; the
``gram`` method factors the matrix exactly as a Gram matrix of band
exponentials over a Gauss-Legendre rule and reads the sequences off an SVD,
which resolves eigenvalues down to about 1e-25 because singular values
halve the exponent range.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ParameterError, ShapeError

DEFAULT_EIGENVALUE_FLOOR = 1e-14


@dataclass(frozen=True)
class SpheroidalBasis:
    """Spheroidal sequences with their concentration eigenvalues.

    ``sequences`` has shape (k, N), each row a unit-Euclidean-norm real
    sequence; ``kappas`` decrease strictly inside (0, 1).  The continuous
    fields (``T``, ``beta``, ``c``, ``lambdas``, ``phases``, ``phi_tilde``,
    ``freq_nodes``) are populated by :func:`continuous_basis`.
    """

    N: int
    W: float
    sequences: np.ndarray
    kappas: np.ndarray
    method: str = "eigh"
    T: float = None
    beta: float = None
    c: float = None
    lambdas: np.ndarray = None
    phases: np.ndarray = None
    phi_tilde: np.ndarray = None
    freq_nodes: np.ndarray = None

    @property
    def k(self):
        return len(self.kappas)


def sinc_matrix(N, W):
    """Symmetric Toeplitz band-concentration matrix.

    Off-diagonal entries are ``sin(2 pi W d) / (pi d)`` for index offset d;
    the diagonal takes the coincident-argument limit ``2W``.
    """
    if N < 2:
        raise ParameterError("N must be >= 2")
    if not 0.0 < W < 0.5:
        raise ParameterError(f"half-bandwidth W={W} violates 0 < W < 1/2")
    d = np.arange(1, N)
    col = np.empty(N)
    col[0] = 2.0 * W
    col[1:] = np.sin(2.0 * np.pi * W * d) / (np.pi * d)
    return sla.toeplitz(col)


def _fix_signs(seqs):
    """Positive mean; if the mean is negligible, first significant entry
    positive.  Makes eigenvector output reproducible."""
    out = np.array(seqs, dtype=float)
    for i in range(out.shape[0]):
        v = out[i]
        mean = v.sum()
        if abs(mean) > 1e-12:
            if mean < 0:
                out[i] = -v
        else:
            nz = np.nonzero(np.abs(v) > 1e-8 * np.abs(v).max())[0]
            if len(nz) and v[nz[0]] < 0:
                out[i] = -v
    return out


def _dpss_eigh(N, W, k_max, floor):
    A = sinc_matrix(N, W)
    try:
        vals, vecs = sla.eigh(A)
    except sla.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    vals, vecs = vals[::-1], vecs[:, ::-1]
    if k_max is None:
        k_max = max(1, int(np.sum(vals > floor)))
    return vals[:k_max], vecs[:, :k_max].T


def _dpss_gram(N, W, k_max, floor):
    # A_jk = integral over [-W, W] of cos(2 pi f (j-k)) df splits into a real
    # Gram factor with cosine and sine rows; a Gauss-Legendre rule on [0, W]
    # makes A = G^T G exact to roundoff because the integrand oscillates
    # through at most 2 pi W (N-1) radians.  Singular values of G are
    # sqrt(kappa), which halves the exponent range and lets the SVD resolve
    # concentration eigenvalues far below the dense eigensolver's floor.
    phase_range = 2.0 * np.pi * W * (N - 1)
    M = int(np.ceil(phase_range / 2.0)) + 48
    x, glw = np.polynomial.legendre.leggauss(M)
    f = 0.5 * W * (x + 1.0)
    glw = glw * W  # [0, W] interval scale times the doubled band
    j = np.arange(N)
    args = 2.0 * np.pi * np.outer(f, j)
    G = np.vstack([np.sqrt(glw)[:, None] * np.cos(args),
                   np.sqrt(glw)[:, None] * np.sin(args)])
    try:
        _, s, Vh = np.linalg.svd(G, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD of the band factor failed: {exc}") from exc
    vals = s ** 2
    if k_max is None:
        k_max = max(1, int(np.sum(vals > floor)))
    k_max = min(k_max, 2 * M)
    seqs = Vh[:k_max] / np.linalg.norm(Vh[:k_max], axis=1)[:, None]
    return vals[:k_max], seqs


def dpss(N, W, k_max=None, method="eigh", eigenvalue_floor=None):
    """Leading spheroidal sequences of the N x W concentration problem.

    Parameters
    ----------
    k_max : int, optional
        Number of sequences to keep.  Defaults to the count of eigenvalues
        above ``eigenvalue_floor`` (1e-14 unless overridden), past which
        the spectrum underflows the dense solver.
    method : {"eigh", "gram"}
        ``eigh`` diagonalizes the assembled matrix (default); ``gram``
        factors it over the band and reads sequences off an SVD, resolving
        eigenvalues far below the dense solver's floor.
    eigenvalue_floor : float, optional
        Retention cutoff used when ``k_max`` is not given.  Floors below
        roughly 1e-15 are only meaningful with ``method="gram"``.

    Returns
    -------
    SpheroidalBasis
        Eigenvalues strictly ordered, sequences sign-normalized to positive
        mean (or positive first significant entry).
    """
    if N < 2:
        raise ParameterError("N must be >= 2")
    if not 0.0 < W < 0.5:
        raise ParameterError(f"half-bandwidth W={W} violates 0 < W < 1/2")
    if k_max is not None and not 1 <= k_max <= N:
        raise ParameterError("k_max must lie in [1, N]")
    floor = DEFAULT_EIGENVALUE_FLOOR if eigenvalue_floor is None else eigenvalue_floor
    if method == "eigh":
        vals, seqs = _dpss_eigh(N, W, k_max, floor)
    elif method == "gram":
        vals, seqs = _dpss_gram(N, W, k_max, floor)
    else:
        raise ParameterError(f"unknown method '{method}'")
    # ordering and range are mathematically strict; enforce them up to the
    # eigensolver's roundoff (modes clustered within ~1e-16 of 1 or of each
    # other are numerical ties of distinct values, not failures)
    if np.any(np.diff(vals) >= 1e-13):
        raise NumericalError("eigenvalues are not ordered; reduce k_max")
    if vals[-1] <= -1e-13 or vals[0] >= 1.0 + 1e-13:
        raise NumericalError("retained eigenvalues left the interval (0, 1); "
                             "reduce k_max")
    return SpheroidalBasis(N=N, W=W, sequences=_fix_signs(seqs),
                           kappas=np.asarray(vals), method=method)


def continuous_basis(basis, beta, T, freq_nodes):
    """Phase-twisted band basis on a uniform frequency grid.

    Maps the sequences onto ``freq_nodes`` (uniform on [-beta, beta], one
    node per sequence entry), normalizes in the band's discrete L2 norm,
    and applies the half-horizon phase.  The discrete norm uses the uniform
    Riemann weight ``2 beta / (N - 1)`` per node: that is the metric in
    which the matrix eigenproblem is the exact discretization of the band
    kernel, so the returned family is orthonormal to machine precision.
    Eigenvalues convert as ``lambda_n = 2 pi kappa_n``.

    Requires ``W = T beta / (2 pi (N - 1))``, the calibration under which
    the sequences approximate the band eigenfunctions.
    """
    freq_nodes = np.asarray(freq_nodes, dtype=float)
    N = basis.N
    if len(freq_nodes) != N:
        raise ShapeError(f"freq_nodes has {len(freq_nodes)} entries, "
                         f"expected {N}")
    expected = np.linspace(-beta, beta, N)
    if not np.allclose(freq_nodes, expected, rtol=0, atol=1e-9 * max(beta, 1.0)):
        raise ParameterError("freq_nodes must be uniform on [-beta, beta]")
    # zero horizon is accepted for phase-convention checks; any positive
    # horizon must match the calibration the sequences were built under
    if T > 0:
        W_expected = T * beta / (2.0 * np.pi * (N - 1))
        if abs(basis.W - W_expected) > 1e-12 * W_expected:
            raise ParameterError(
                f"basis was built with W={basis.W}, but beta={beta}, T={T}, "
                f"N={N} require W={W_expected}")
    dw = 2.0 * beta / (N - 1)
    norms = np.sqrt((basis.sequences ** 2).sum(axis=1) * dw)
    phases = np.exp(-1j * freq_nodes * T / 2.0)
    phi = phases[None, :] * basis.sequences / norms[:, None]
    return dataclasses.replace(
        basis, T=T, beta=beta, c=beta * T / 2.0,
        lambdas=2.0 * np.pi * basis.kappas, phases=phases,
        phi_tilde=phi, freq_nodes=freq_nodes)


def band_inner(f, g, beta):
    """Discrete band inner product with uniform Riemann weights,
    conjugate-linear in the first slot."""
    N = f.shape[-1]
    dw = 2.0 * beta / (N - 1)
    return (np.conj(f) * g).sum(axis=-1) * dw


def band_norm(f, beta):
    return np.sqrt(band_inner(f, f, beta).real)
