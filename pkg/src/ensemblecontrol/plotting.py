"""Figure rendering for the report path.

Every CLI command that emits delimited data can also render the matching
figure next to it.  Rendering is headless (Agg) and writes PNG with fixed
metadata so reruns produce identical bytes.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=150, metadata={"Software": "ensemblectl"})


def _save(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_control(path, t, alpha, title="control"):
    """Real/imaginary channels and magnitude of a complex control."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(t, alpha.real, label="u(t)")
    ax1.plot(t, alpha.imag, label="v(t)")
    ax1.set_ylabel("amplitude")
    ax1.legend(loc="best")
    ax1.set_title(title)
    ax2.plot(t, np.abs(alpha), color="k")
    ax2.set_xlabel("t")
    ax2.set_ylabel("|control|")
    fig.tight_layout()
    return _save(fig, path)


def plot_final_states(path, omega, p_final, title="final states"):
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot(p_final.real, p_final.imag, ".", ms=3)
    ax.axhline(0, color="0.8", lw=0.5)
    ax.axvline(0, color="0.8", lw=0.5)
    ax.set_xlabel("x(T)")
    ax.set_ylabel("y(T)")
    ax.set_title(title)
    ax.set_aspect("equal", "datalim")
    fig.tight_layout()
    return _save(fig, path)


def plot_trajectories(path, trajectories, title="member trajectories"):
    """trajectories: list of (label, complex trajectory array)."""
    fig, ax = plt.subplots(figsize=(6, 5))
    for label, p in trajectories:
        ax.plot(p.real, p.imag, lw=0.8, label=label)
        ax.plot(p.real[-1], p.imag[-1], "o", ms=4, color=ax.lines[-1].get_color())
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", "datalim")
    fig.tight_layout()
    return _save(fig, path)


def plot_dpss(path, basis, title=None):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for i, seq in enumerate(basis.sequences):
        ax1.plot(seq, lw=0.9, label=f"k={i}")
    ax1.set_xlabel("index")
    ax1.set_ylabel("amplitude")
    if basis.k <= 8:
        ax1.legend(fontsize=7)
    ax2.semilogy(np.arange(basis.k), basis.kappas, "o-")
    ax2.set_xlabel("order")
    ax2.set_ylabel("concentration eigenvalue")
    fig.suptitle(title or f"spheroidal sequences N={basis.N}, W={basis.W:.4g}")
    fig.tight_layout()
    return _save(fig, path)


def plot_qp(path, times, x, omega, dist, title="amplitude-constrained control"):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.step(times, x, where="post", lw=1.0)
    ax1.set_ylim(-1.15, 1.15)
    ax1.set_xlabel("t")
    ax1.set_ylabel("u(t)")
    ax1.set_title(title)
    ax2.plot(omega, dist, "o-", ms=3)
    ax2.set_xlabel("omega")
    ax2.set_ylabel("|p(T, omega)|")
    ax2.set_title("final distance to origin")
    fig.tight_layout()
    return _save(fig, path)


def plot_picard(path, report, sigmas, title="solvability diagnostics"):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    mask = np.abs(report.coefficients) > 0
    ax1.loglog(sigmas[mask], np.abs(report.coefficients[mask]), "o", ms=4)
    ax1.set_xlabel("sigma_n")
    ax1.set_ylabel("|<nu_n, xi>|")
    ax1.set_title(f"decay exponent ~ {report.decay_exponent:.2f}")
    ax2.semilogy(np.arange(1, len(report.partial_sums) + 1),
                 report.partial_sums, "o-", ms=3)
    ax2.set_xlabel("N")
    ax2.set_ylabel("sum |c_n|^2 / sigma_n^2")
    ax2.set_title(f"range residual {report.range_residual:.3g}")
    fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_amplitudes(path, t, amplitudes, title="control amplitudes"):
    """amplitudes: list of (label, |alpha|(t)) pairs."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, mag in amplitudes:
        ax.plot(t, mag, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("|control|")
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    return _save(fig, path)
