"""Truncated bosonic Fock space of a free scalar field in a periodic box.

Modes are k = (2 pi / L) n with n in Z^s, |n_i| <= N. States are all
occupation patterns with at most ``n_max`` particles. Operators are
``scipy.sparse.csr_matrix`` instances over that basis.
"""

import hashlib
import itertools
import math
import re
from dataclasses import dataclass, fields

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import ConfigError, DimensionCap, DimMismatch, NoConvergence

DROP_TOL = 1e-14


@dataclass(frozen=True)
class ModelConfig:
    s: int = 1
    m: float = 1.0
    L: float = 2 * math.pi
    N: int = 8
    n_max: int = 4
    seed: int = 0
    dense_threshold: int = 2048
    dim_cap: int = 200_000

    def __post_init__(self):
        if self.s not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got {self.s}")
        if not self.m > 0:
            raise ValueError("mass must be positive")
        if not self.L > 0:
            raise ValueError("box length must be positive")
        if self.N < 0:
            raise ValueError("mode cutoff N must be >= 0")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def mode_count(self):
        return (2 * self.N + 1) ** self.s

    @property
    def k_max(self):
        return 2 * math.pi * self.N / self.L

    @property
    def omega_max(self):
        return math.sqrt(self.m**2 + self.s * self.k_max**2)

    def projected_dim(self):
        M = self.mode_count
        return sum(math.comb(M + p - 1, p) for p in range(self.n_max + 1))

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def canonical_text(self):
        return "".join(f"{k}={v!r}\n" for k, v in sorted(self.as_dict().items()))

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:12]


_INT_KEYS = {"s", "N", "n_max", "seed", "dense_threshold", "dim_cap"}
_PI_RE = re.compile(r"^([-+0-9.eE]*)\s*\*?\s*pi$")


def parse_number(text):
    """Parse a float, also accepting ``pi``, ``2pi`` and ``2*pi``."""
    text = text.strip()
    match = _PI_RE.match(text)
    if match:
        factor = match.group(1)
        return (float(factor) if factor not in ("", "+", "-") else float(factor + "1")) * math.pi
    return float(text)


def parse_key_values(text):
    """Split ``key = value`` lines, ignoring blanks and ``#`` comments."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key=key)
        out[key] = value
    return out


def model_config_from_mapping(values, strict=True):
    known = {f.name for f in fields(ModelConfig)}
    unknown = set(values) - known
    if strict and unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown config key {key!r}", key=key)
    kwargs = {}
    for key in known & set(values):
        raw = values[key]
        try:
            kwargs[key] = int(raw) if key in _INT_KEYS else parse_number(raw)
        except ValueError:
            raise ConfigError(f"bad value for {key!r}: {raw!r}", key=key) from None
    try:
        return ModelConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    with open(path) as fh:
        return model_config_from_mapping(parse_key_values(fh.read()))


class FockBasis:
    """Occupation-number basis sorted by (energy, counts).

    ``counts`` is a (dim, modes) integer array; ``index`` maps the bytes of a
    counts row back to its position.
    """

    def __init__(self, config, counts):
        self.config = config
        n = np.array(list(itertools.product(range(-config.N, config.N + 1), repeat=config.s)), dtype=int)
        self.mode_numbers = n
        self.momenta = (2 * np.pi / config.L) * n.astype(float)
        self.omega = np.sqrt(config.m**2 + np.sum(self.momenta**2, axis=1))
        energies = counts @ self.omega
        keys = [(round(float(e), 12), tuple(row)) for e, row in zip(energies, counts.tolist())]
        order = sorted(range(len(keys)), key=keys.__getitem__)
        self.counts = np.ascontiguousarray(counts[order])
        self.energies = self.counts @ self.omega
        self.energies[0] = 0.0
        self.totals = self.counts.sum(axis=1)
        self.index = {row.tobytes(): i for i, row in enumerate(self.counts)}
        self._ladder = None

    @property
    def dim(self):
        return self.counts.shape[0]

    @property
    def n_modes(self):
        return self.counts.shape[1]

    def lookup(self, counts):
        return self.index[np.asarray(counts, dtype=self.counts.dtype).tobytes()]

    def mode_index(self, n):
        n = tuple(int(v) for v in np.atleast_1d(n))
        N = self.config.N
        if len(n) != self.config.s or any(abs(v) > N for v in n):
            raise IndexError(f"mode {n} outside the lattice")
        idx = 0
        for v in n:
            idx = idx * (2 * N + 1) + (v + N)
        return idx

    def _ladder_data(self):
        # (target, source, sqrt(n_k), k) for every a_k acting on every state
        if self._ladder is None:
            src, mode = np.nonzero(self.counts)
            vals = np.sqrt(self.counts[src, mode].astype(float))
            tgt = np.empty_like(src)
            row = np.empty(self.n_modes, dtype=self.counts.dtype)
            for j, (i, k) in enumerate(zip(src, mode)):
                row[:] = self.counts[i]
                row[k] -= 1
                tgt[j] = self.index[row.tobytes()]
            self._ladder = (tgt, src, vals, mode)
        return self._ladder

    def annihilation_part(self, coeffs):
        """Return sum_k coeffs[k] a_k."""
        tgt, src, vals, mode = self._ladder_data()
        data = vals * np.asarray(coeffs)[mode]
        return sp.csr_matrix((data, (tgt, src)), shape=(self.dim, self.dim), dtype=complex)

    def creation_part(self, coeffs):
        """Return sum_k coeffs[k] a_k^dagger."""
        tgt, src, vals, mode = self._ladder_data()
        data = vals * np.asarray(coeffs)[mode]
        return sp.csr_matrix((data, (src, tgt)), shape=(self.dim, self.dim), dtype=complex)


def build_basis(config):
    dim = config.projected_dim()
    if dim > config.dim_cap:
        raise DimensionCap(f"basis dimension {dim} exceeds cap {config.dim_cap}", count=dim)
    M = config.mode_count
    dtype = np.uint8 if config.n_max < 256 else np.uint16
    counts = np.zeros((dim, M), dtype=dtype)
    i = 0
    for p in range(config.n_max + 1):
        for combo in itertools.combinations_with_replacement(range(M), p):
            for k in combo:
                counts[i, k] += 1
            i += 1
    return FockBasis(config, counts)


def ladder(basis, mode, kind):
    coeffs = np.zeros(basis.n_modes)
    coeffs[mode if isinstance(mode, (int, np.integer)) else basis.mode_index(mode)] = 1.0
    if kind == "create":
        return basis.creation_part(coeffs)
    if kind == "annihilate":
        return basis.annihilation_part(coeffs)
    raise ValueError(f"kind must be 'create' or 'annihilate', got {kind!r}")


def _diag(values):
    return sp.diags(np.asarray(values, dtype=complex), format="csr")


def hamiltonian(basis):
    return _diag(basis.energies)


def momentum(basis, axis):
    return _diag(basis.counts @ basis.momenta[:, axis])


def momentum_eigenvalues(basis):
    """(dim, s) array of total momenta."""
    return basis.counts @ basis.momenta


def damping(basis, ell):
    return _diag((1.0 + basis.energies) ** (-float(ell)))


def window_mask(basis, E_max, p_max):
    return (basis.energies <= E_max + 1e-12) & (basis.totals <= p_max)


def window_indices(basis, E_max, p_max):
    return np.flatnonzero(window_mask(basis, E_max, p_max))


def window_projector(basis, E_max, p_max):
    return _diag(window_mask(basis, E_max, p_max).astype(float))


def identity(basis):
    return sp.identity(basis.dim, dtype=complex, format="csr")


def clean(A, tol=DROP_TOL):
    """Drop stored entries with modulus below ``tol``."""
    A = sp.csr_matrix(A)
    A.data[np.abs(A.data) < tol] = 0
    A.eliminate_zeros()
    return A


def _check(A, B):
    if A.shape != B.shape:
        raise DimMismatch(f"shapes {A.shape} and {B.shape} differ")


def compose(A, B):
    if A.shape[1] != B.shape[0]:
        raise DimMismatch(f"cannot compose {A.shape} with {B.shape}")
    return clean(A @ B)


def add(A, B):
    _check(A, B)
    return clean(A + B)


def scale(A, c):
    return clean(A * c)


def adjoint(A):
    return sp.csr_matrix(A.conj().T)


def _power_norm(A, tol, max_iters):
    v = _start_vector(A.shape[1])
    prev = None
    history = []
    for _ in range(max_iters):
        w = A @ v
        sigma = float(np.linalg.norm(w))
        if sigma == 0.0:
            return 0.0
        history.append(sigma)
        if prev is not None and abs(sigma - prev) <= tol * sigma:
            return sigma
        prev = sigma
        u = A.H @ w if isinstance(A, LinearOperator) else A.conj().T @ w
        v = u / np.linalg.norm(u)
    raise NoConvergence(f"power iteration stalled after {max_iters} iterations",
                        last=history[-2:])


def _start_vector(n):
    # deterministic, generic start vector
    v = 1.0 + 0.5 * np.cos(np.arange(n) * 0.7548776662466927)
    return v / np.linalg.norm(v)


def _lanczos_norm(A, tol, max_iters):
    n = A.shape[1]
    if n <= 2:
        return float(np.linalg.norm(A @ np.eye(n), 2))
    if isinstance(A, LinearOperator):
        gram = LinearOperator((n, n), matvec=lambda v: A.H @ (A @ v), dtype=complex)
    else:
        AH = A.conj().T
        gram = LinearOperator((n, n), matvec=lambda v: AH @ (A @ v), dtype=complex)
    try:
        lam = eigsh(gram, k=1, which="LA", v0=_start_vector(n), tol=tol,
                    ncv=min(n - 1, 20), maxiter=max_iters, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise NoConvergence("Lanczos iteration did not converge",
                            last=[float(np.sqrt(max(v.real, 0))) for v in exc.eigenvalues[-2:]]) from None
    return float(np.sqrt(max(lam[0].real, 0.0)))


def op_norm(A, dense_threshold=2048, tol=1e-10, max_iters=20000, method="power"):
    """Largest singular value of a matrix or ``LinearOperator``.

    Dense SVD when the dimension is at most ``dense_threshold``, otherwise
    power iteration on A^H A with a fixed start vector (``method="power"``)
    or implicitly restarted Lanczos on A^H A (``method="lanczos"``), which
    copes with nearly degenerate top singular values.
    """
    if max(A.shape) <= dense_threshold and not isinstance(A, LinearOperator):
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        if M.size == 0:
            return 0.0
        return float(np.linalg.norm(M, 2))
    if method == "lanczos":
        return _lanczos_norm(A, tol, max_iters)
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    return _power_norm(A, tol, max_iters)


def restrict(A, idx):
    """Dense submatrix A[idx, idx]."""
    if sp.issparse(A):
        return A[idx][:, idx].toarray()
    return np.asarray(A)[np.ix_(idx, idx)]
