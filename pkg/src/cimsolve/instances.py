"""Ising / max-cut problem instances.

Couplings are stored as a dense ``(n, n)`` float array with zero diagonal.
Instances with fewer than 10% nonzero entries (G-set style graphs) also carry a
CSR copy, which is what the solvers use for the matrix-vector products.

Energy convention used throughout the package::

    E(s) = 1/2 * sum_{i != j} J_ij s_i s_j        (lower is better)

so that for a max-cut edge-weight matrix ``W`` minimising ``E`` with ``J = W``
maximises the cut.
"""
from __future__ import annotations

import io
import itertools
import warnings
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

SPARSE_DENSITY = 0.10
MAX_BRUTE_FORCE_N = 24


class InstanceError(ValueError):
    """Invalid instance construction (size, shape, diagonal...)."""


class GsetParseError(InstanceError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def coupling_xi(entries: np.ndarray) -> float:
    """Normalisation ``sqrt(2n / sum J_ij^2)``; 1.0 for an all-zero matrix."""
    n = entries.shape[0]
    sq = float(np.sum(np.square(entries)))
    if sq == 0.0:
        return 1.0
    return float(np.sqrt(2.0 * n / sq))


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Immutable coupling matrix with its normalisation factor ``xi``.

    Parameters
    ----------
    entries : array-like of shape (n, n)
        Couplings. The diagonal must be zero.
    name : str, optional
        Identifier used in reports and for per-instance seed derivation.
    """

    entries: np.ndarray
    name: str = "instance"
    xi: float = field(init=False)
    sparse: sp.csr_matrix | None = field(init=False, repr=False)

    def __post_init__(self):
        J = np.array(self.entries, dtype=np.float64, copy=True)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise InstanceError(f"coupling matrix must be square, got shape {J.shape}")
        if J.shape[0] < 1:
            raise InstanceError("coupling matrix must have at least one spin")
        if not np.all(np.isfinite(J)):
            raise InstanceError("coupling matrix contains non-finite entries")
        if np.any(np.diag(J) != 0):
            raise InstanceError("coupling matrix diagonal must be exactly zero")
        J.setflags(write=False)
        object.__setattr__(self, "entries", J)
        object.__setattr__(self, "xi", coupling_xi(J))
        nnz = int(np.count_nonzero(J))
        csr = None
        if nnz < SPARSE_DENSITY * J.size:
            csr = sp.csr_matrix(J)
        object.__setattr__(self, "sparse", csr)
        if not self.symmetric:
            warnings.warn(
                f"{self.name}: coupling matrix is not symmetric; solvers accept it "
                "but asymmetric dynamics are untested",
                stacklevel=3,
            )

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.entries))

    def local_fields(self, x: np.ndarray) -> np.ndarray:
        """Return ``sum_j J_ij x_j`` for a vector or for each row of a 2-D batch."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n:
            raise InstanceError(f"expected last dimension {self.n}, got {x.shape[-1]}")
        if self.sparse is not None:
            if x.ndim == 1:
                return self.sparse @ x
            return np.asarray((self.sparse @ x.T).T)
        return x @ self.entries.T

    def __repr__(self) -> str:
        kind = "sparse" if self.sparse is not None else "dense"
        return f"CouplingMatrix(name={self.name!r}, n={self.n}, nnz={self.nnz}, {kind})"


@dataclass(frozen=True)
class GroundTruth:
    energy: float
    degeneracy: int
    witness: np.ndarray


def as_coupling(J, name: str | None = None) -> CouplingMatrix:
    if isinstance(J, CouplingMatrix):
        return J
    if sp.issparse(J):
        J = J.toarray()
    return CouplingMatrix(np.asarray(J, dtype=np.float64), name=name or "instance")


def check_spins(s, n: int | None = None) -> np.ndarray:
    """Validate a spin configuration (entries exactly +1/-1); returns a float array."""
    s = np.asarray(s)
    if s.ndim not in (1, 2):
        raise InstanceError("spin configuration must be a vector or a 2-D batch")
    if n is not None and s.shape[-1] != n:
        raise InstanceError(f"spin configuration has length {s.shape[-1]}, expected {n}")
    if not np.all((s == 1) | (s == -1)):
        raise InstanceError("spin entries must be exactly +1 or -1")
    return s.astype(np.float64)


def spins_from_amplitudes(x: np.ndarray) -> np.ndarray:
    """Readout ``sign(x)`` with ``sign(0) = +1``."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


# --------------------------------------------------------------------------- #
# generators
# --------------------------------------------------------------------------- #
def sk_random(n: int, seed: int) -> CouplingMatrix:
    """Sherrington-Kirkpatrick instance with symmetric +-1 couplings."""
    if n < 2:
        raise InstanceError(f"SK instance needs n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    J = np.zeros((n, n))
    J[iu] = rng.choice(np.array([-1.0, 1.0]), size=iu[0].size)
    J = J + J.T
    return CouplingMatrix(J, name=f"sk-n{n}-s{seed}")


def toroidal_grid(rows: int, cols: int, seed: int, signed: bool = True) -> CouplingMatrix:
    """2-D toroidal grid graph with random +-1 (or +1) edge weights.

    ``toroidal_grid(20, 40, seed)`` has the structure of the 800-node toroidal
    G-set graphs (G11-G13): 800 vertices of degree 4, 1600 edges.
    """
    if rows < 3 or cols < 3:
        raise InstanceError("toroidal grid needs at least 3 rows and 3 columns")
    rng = np.random.default_rng(seed)
    n = rows * cols
    J = np.zeros((n, n))
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            for j in (r * cols + (c + 1) % cols, ((r + 1) % rows) * cols + c):
                w = rng.choice([-1.0, 1.0]) if signed else 1.0
                J[i, j] = J[j, i] = w
    return CouplingMatrix(J, name=f"torus-{rows}x{cols}-s{seed}")


def random_graph(n: int, n_edges: int, seed: int, signed: bool = False) -> CouplingMatrix:
    """Uniform random simple graph with exactly ``n_edges`` edges."""
    total = n * (n - 1) // 2
    if not 0 <= n_edges <= total:
        raise InstanceError(f"cannot place {n_edges} edges on {n} vertices")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    pick = rng.choice(total, size=n_edges, replace=False)
    J = np.zeros((n, n))
    w = rng.choice([-1.0, 1.0], size=n_edges) if signed else np.ones(n_edges)
    J[iu[0][pick], iu[1][pick]] = w
    J = J + J.T
    return CouplingMatrix(J, name=f"rnd-n{n}-m{n_edges}-s{seed}")


# --------------------------------------------------------------------------- #
# G-set text format
# --------------------------------------------------------------------------- #
def _parse_number(tok: str, line: int) -> float:
    try:
        return float(int(tok))
    except ValueError:
        pass
    try:
        v = float(tok)
    except ValueError:
        raise GsetParseError(f"cannot parse weight {tok!r}", line) from None
    if not np.isfinite(v):
        raise GsetParseError(f"non-finite weight {tok!r}", line)
    return v


def parse_gset(text: str | TextIO, name: str = "gset") -> CouplingMatrix:
    """Parse a G-set style edge list (``N M`` header, then ``i j w`` lines, 1-based)."""
    if not isinstance(text, str):
        text = text.read()
    lines = [(k + 1, ln.split()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, toks) for k, toks in lines if toks]
    if not lines:
        raise GsetParseError("empty file")
    hline, header = lines[0]
    if len(header) != 2:
        raise GsetParseError("header must hold node count and edge count", hline)
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise GsetParseError("header values must be integers", hline) from None
    if n < 1 or m < 0:
        raise GsetParseError("header must have N >= 1 and M >= 0", hline)
    body = lines[1:]
    if len(body) != m:
        where = body[m][0] if len(body) > m else (body[-1][0] if body else hline)
        raise GsetParseError(f"header announces {m} edges but file has {len(body)}", where)

    J = np.zeros((n, n))
    seen: set[tuple[int, int]] = set()
    for lineno, toks in body:
        if len(toks) != 3:
            raise GsetParseError(f"expected 'i j w', got {' '.join(toks)!r}", lineno)
        try:
            i, j = int(toks[0]), int(toks[1])
        except ValueError:
            raise GsetParseError("vertex indices must be integers", lineno) from None
        w = _parse_number(toks[2], lineno)
        if not (1 <= i <= n and 1 <= j <= n):
            raise GsetParseError(f"vertex index out of range 1..{n}: {i} {j}", lineno)
        if i == j:
            raise GsetParseError(f"self-loop on vertex {i}", lineno)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GsetParseError(f"duplicate edge {i} {j}", lineno)
        seen.add(key)
        J[i - 1, j - 1] = J[j - 1, i - 1] = w
    return CouplingMatrix(J, name=name)


def load_gset(path: str | PathLike) -> CouplingMatrix:
    from pathlib import Path

    p = Path(path)
    with open(p, encoding="utf8") as fh:
        return parse_gset(fh, name=p.stem)


def _format_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def to_gset(J: CouplingMatrix) -> str:
    """Serialise a symmetric instance to G-set text (upper-triangle edges)."""
    J = as_coupling(J)
    if not J.symmetric:
        raise InstanceError("only symmetric instances can be written as an edge list")
    iu, ju = np.nonzero(np.triu(J.entries, k=1))
    buf = io.StringIO()
    buf.write(f"{J.n} {iu.size}\n")
    for a, b in zip(iu, ju):
        buf.write(f"{a + 1} {b + 1} {_format_weight(J.entries[a, b])}\n")
    return buf.getvalue()


def save_gset(J: CouplingMatrix, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf8") as fh:
        fh.write(to_gset(J))


# --------------------------------------------------------------------------- #
# energies
# --------------------------------------------------------------------------- #
def ising_energy(J, s) -> float | np.ndarray:
    """``1/2 sum_{i!=j} J_ij s_i s_j``; a 2-D ``s`` gives one energy per row."""
    J = as_coupling(J)
    s = check_spins(s, J.n)
    h = J.local_fields(s)
    return 0.5 * np.sum(s * h, axis=-1)


def cut_value(J, s) -> float | np.ndarray:
    """Weight of edges crossing the partition ``s``: ``sum_{i<j} J_ij (1 - s_i s_j) / 2``."""
    J = as_coupling(J)
    s = check_spins(s, J.n)
    upper = np.triu(J.entries, k=1)
    total = upper.sum()
    # sum_{i<j} J_ij s_i s_j from the upper triangle only, so asymmetric input is well defined
    inner = np.sum(s * (s @ upper.T), axis=-1)
    return 0.5 * (total - inner)


def brute_force_ground(J, chunk_bits: int = 16) -> GroundTruth:
    """Exhaustive minimum of :func:`ising_energy` over all ``2**n`` configurations."""
    J = as_coupling(J)
    n = J.n
    if n > MAX_BRUTE_FORCE_N:
        raise InstanceError(f"brute force limited to n <= {MAX_BRUTE_FORCE_N}, got {n}")
    if n == 1:
        return GroundTruth(0.0, 2, np.array([1.0]))
    A = J.entries
    # fix the last spin to +1 and double the count: E(s) = E(-s)
    free = n - 1
    bits = min(chunk_bits, free)
    low = ((np.arange(2**bits)[:, None] >> np.arange(bits)) & 1) * -2.0 + 1.0
    best, count, witness = np.inf, 0, None
    scale = np.abs(A).sum() + 1.0
    tol = 1e-9 * scale
    for high in range(2 ** (free - bits)):
        hi = ((high >> np.arange(free - bits)) & 1) * -2.0 + 1.0
        S = np.empty((low.shape[0], n))
        S[:, :bits] = low
        S[:, bits:free] = hi
        S[:, free] = 1.0
        E = 0.5 * np.einsum("ij,ij->i", S, S @ A.T)
        m = E.min()
        if m < best - tol:
            best, count = m, 0
            witness = S[int(np.argmin(E))].copy()
        if m <= best + tol:
            count += int(np.count_nonzero(E <= best + tol))
    return GroundTruth(float(best), 2 * count, witness)


def local_minima(J, configs: Iterable[np.ndarray] | None = None) -> list[np.ndarray]:
    """Strict single-flip local minima (every ``s_i h_i < 0``) among ``configs``.

    Without ``configs`` all ``2**n`` configurations are scanned (small n only).
    """
    J = as_coupling(J)
    if configs is None:
        if J.n > 16:
            raise InstanceError("exhaustive local-minimum scan limited to n <= 16")
        configs = (np.array(c, dtype=float) for c in itertools.product((1.0, -1.0), repeat=J.n))
    out = []
    for s in configs:
        h = J.local_fields(s)
        if np.all(s * h < 0):
            out.append(np.asarray(s, dtype=float))
    return out
