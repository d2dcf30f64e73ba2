"""Eigenspectra of the embedded system, histograms and spectrum reuse."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .linsys import HermitianEmbedding

DEFAULT_BIN_WIDTH = 3.5 / 2**7
DEFAULT_DIM_CAP = 2**14


class SpectrumTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SpectrumDescriptor:
    use_case: str = "custom"
    nx: int = 0
    ny: int = 0
    omega: float = 0.0
    n_steps: int = 0
    order: int = 1
    v_lid: Optional[Tuple[float, float]] = None
    substituted_from: Optional[Tuple[int, int]] = None

    @property
    def exact(self) -> bool:
        return self.substituted_from is None

    def key(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    source: SpectrumDescriptor = SpectrumDescriptor()

    def __post_init__(self):
        ev = np.sort(np.asarray(self.eigenvalues, dtype=float))
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def positive(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues > 0]

    @property
    def lambda_max(self) -> float:
        """Largest eigenvalue magnitude (equal to the largest positive one for symmetric spectra)."""
        return float(np.abs(self.eigenvalues).max())

    @property
    def lambda_min(self) -> float:
        """Smallest nonzero eigenvalue magnitude."""
        mags = np.abs(self.eigenvalues)
        mags = mags[mags > 0]
        if mags.size == 0:
            raise ValueError("spectrum has no nonzero eigenvalue")
        return float(mags.min())

    def is_symmetric(self, atol: float = 1e-10) -> bool:
        ev = self.eigenvalues
        return bool(np.allclose(ev, -ev[::-1], rtol=0, atol=atol))


def embedding_singular_values(embedding: HermitianEmbedding) -> np.ndarray:
    return sla.svdvals(embedding.system.tilde_a.toarray())


def eigen_spectrum(
    embedding: HermitianEmbedding,
    descriptor: SpectrumDescriptor = SpectrumDescriptor(),
    cap: int = DEFAULT_DIM_CAP,
    method: str = "svd",
) -> Spectrum:
    """Full spectrum of the unpadded embedded matrix.

    ``method="svd"`` uses that the eigenvalues are plus/minus the singular
    values of the block matrix; ``method="eigh"`` diagonalizes the symmetric
    matrix directly. Padding entries are excluded either way.
    """
    n = embedding.unpadded_dim
    if n > cap:
        raise SpectrumTooLarge(
            f"embedded dimension {n} exceeds the dense cap {cap}; "
            "use substituted_spectrum() with a smaller lattice"
        )
    if method == "svd":
        s = embedding_singular_values(embedding)
        ev = np.concatenate([-s, s])
    elif method == "eigh":
        core = embedding.a_matrix[:n, :n].toarray()
        ev = sla.eigvalsh(core)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Spectrum(ev, descriptor)


def substituted_spectrum(small: Spectrum, target: SpectrumDescriptor) -> Spectrum:
    """Reuse ``small``'s eigenvalues for the ``target`` lattice."""
    if target == small.source:
        return small
    src = small.source
    for name in ("use_case", "omega", "n_steps", "order", "v_lid"):
        if getattr(src, name) != getattr(target, name):
            raise ValueError(f"cannot substitute spectrum: {name} differs ({getattr(src, name)} vs {getattr(target, name)})")
    return Spectrum(small.eigenvalues, replace(target, substituted_from=(src.nx, src.ny)))


# --- histograms -------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumHistogram:
    """Counts of positive eigenvalues in right-open bins ``[k w, (k+1) w)``."""

    bin_width: float
    counts: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return self.bin_width * np.arange(self.counts.size + 1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def occupied(self) -> np.ndarray:
        return np.flatnonzero(self.counts)

    def padded(self, n_bins: int) -> np.ndarray:
        out = np.zeros(max(n_bins, self.counts.size), dtype=np.int64)
        out[: self.counts.size] = self.counts
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "count"])
            for k, c in enumerate(self.counts):
                w.writerow([repr(k * self.bin_width), repr((k + 1) * self.bin_width), int(c)])


def histogram(spectrum, bin_width: float = DEFAULT_BIN_WIDTH) -> SpectrumHistogram:
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    ev = np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float)
    pos = ev[ev > 0]
    if pos.size == 0:
        return SpectrumHistogram(float(bin_width), np.zeros(0, dtype=np.int64))
    idx = np.floor(pos / bin_width).astype(np.int64)
    return SpectrumHistogram(float(bin_width), np.bincount(idx).astype(np.int64))


def zeta(hist_big: SpectrumHistogram, hist_small: SpectrumHistogram) -> float:
    """Fraction of ``hist_big`` counts in bins that are empty in ``hist_small``."""
    if hist_big.bin_width != hist_small.bin_width:
        raise ValueError("histograms use different bin widths")
    total = hist_big.total
    if total == 0:
        return 0.0
    n = max(hist_big.counts.size, hist_small.counts.size)
    big, small = hist_big.padded(n), hist_small.padded(n)
    return float(big[small == 0].sum() / total)


# --- on-disk cache ------------------------------------------------------------

def save_spectrum(spectrum: Spectrum, path) -> Path:
    """Descriptor as ``# key=json`` header lines, then one eigenvalue per line."""
    path = Path(path)
    with open(path, "w") as fh:
        for key, value in asdict(spectrum.source).items():
            fh.write(f"# {key}={json.dumps(value)}\n")
        for ev in spectrum.eigenvalues:
            fh.write(f"{float(ev)!r}\n")
    return path


def load_spectrum(path) -> Spectrum:
    meta = {}
    values = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = json.loads(value)
            elif line.strip():
                values.append(float(line))
    for key in ("v_lid", "substituted_from"):
        if meta.get(key) is not None:
            meta[key] = tuple(meta[key])
    return Spectrum(np.array(values), SpectrumDescriptor(**meta))


class SpectrumCache:
    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, descriptor: SpectrumDescriptor) -> Path:
        return self.directory / f"{descriptor.key()}.spectrum"

    def get(self, descriptor: SpectrumDescriptor) -> Optional[Spectrum]:
        p = self.path(descriptor)
        return load_spectrum(p) if p.exists() else None

    def put(self, spectrum: Spectrum) -> Path:
        return save_spectrum(spectrum, self.path(spectrum.source))
