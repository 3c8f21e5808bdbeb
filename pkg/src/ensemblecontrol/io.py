"""CSV/JSON emission and the run manifest.

Numeric CSV output uses 17 significant digits with '.' decimal separator
regardless of locale, so byte-identical reruns are achievable for fixed
configuration and seed.  Every CLI run writes a manifest listing each
output file with its content hash.
"""

import hashlib
import json
import time
from pathlib import Path

import numpy as np


def fmt(x):
    """17-significant-digit representation, locale-independent."""
    return format(float(x), ".17g")


def write_csv(path, header, columns):
    """Write columns (equal-length 1-D sequences) under a header row."""
    columns = [np.asarray(c) for c in columns]
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("CSV columns must have equal length")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(fmt(c[i]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def control_to_csv(path, control):
    """Sampled control signal as t plus real/imag pairs per channel."""
    header = ["t"]
    cols = [control.time_nodes]
    for c in range(control.m):
        header += [f"u{c}_re", f"u{c}_im"]
        cols += [control.channels[:, c].real, control.channels[:, c].imag]
    return write_csv(path, header, cols)


def read_control_csv(path):
    """Inverse of :func:`control_to_csv`; returns (time_nodes, channels)."""
    raw = np.genfromtxt(path, delimiter=",", names=True)
    names = raw.dtype.names
    t = np.asarray(raw["t"], dtype=float)
    m = sum(1 for name in names if name.endswith("_re"))
    channels = np.empty((len(t), m), dtype=complex)
    for c in range(m):
        channels[:, c] = raw[f"u{c}_re"] + 1j * raw[f"u{c}_im"]
    return t, channels


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return Path(path)


def sha256_file(path):
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


class RunManifest:
    """Collects output files and run metadata, then writes manifest.json."""

    def __init__(self, outdir, command, config, seed=None):
        self.outdir = Path(outdir)
        self.command = command
        self.config = {k: v for k, v in config.items()
                       if isinstance(v, (str, int, float, bool, type(None)))}
        self.seed = seed
        self.files = []
        self._t0 = time.monotonic()

    def add(self, path):
        self.files.append(Path(path))
        return path

    def write(self):
        import ensemblecontrol
        payload = {
            "schema": 1,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "versions": {
                "ensemblecontrol": ensemblecontrol.__version__,
                "numpy": np.__version__,
            },
            "wall_time_s": round(time.monotonic() - self._t0, 3),
            "outputs": [
                {"path": p.name, "sha256": sha256_file(p)} for p in self.files
            ],
        }
        try:
            import scipy
            payload["versions"]["scipy"] = scipy.__version__
        except ImportError:
            pass
        return write_json(self.outdir / "manifest.json", payload)
