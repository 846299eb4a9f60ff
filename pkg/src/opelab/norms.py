"""Energy-damped norms, dual-basis projections onto field spaces and the
sampled phase-space defect with its log-log decay fit."""

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy import stats
from scipy.sparse.linalg import LinearOperator, expm_multiply

from . import fock
from .errors import EmptyWindow, GramIllConditioned, RankDeficient, TooFewPointsInWindow
from .fields import FieldBasis, TestFunction, WickMonomial, point_field, smeared_field

BIORTHOGONALITY_TOL = 1e-8
GRAM_CONDITION_MAX = 1e8
RANK_TOL = 1e-12


def default_window(config):
    """(E_max, p_max) = (4m + 2, n_max - 2), floored at one particle."""
    return 4 * config.m + 2, max(config.n_max - 2, 1)


def damped_norm(basis, A, ell=1.0):
    """|| R^ell A R^ell || with R = (1 + H)^-1."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    d = (1.0 + basis.energies) ** (-float(ell))
    if isinstance(A, LinearOperator):
        op = LinearOperator(A.shape, matvec=lambda v: d * (A @ (d * v)),
                            rmatvec=lambda v: d * (A.H @ (d * v)), dtype=complex)
        return fock.op_norm(op, dense_threshold=basis.config.dense_threshold)
    if sp.issparse(A):
        R = sp.diags(d)
        return fock.op_norm(R @ A @ R, dense_threshold=basis.config.dense_threshold)
    A = np.asarray(A)
    return fock.op_norm(d[:, None] * A * d[None, :], dense_threshold=basis.config.dense_threshold)


def windowed_norm(basis, A, E_max, p_max):
    """|| Q A Q || with Q the projector on energy <= E_max, particles <= p_max."""
    idx = fock.window_indices(basis, E_max, p_max)
    if idx.size == 0:
        raise EmptyWindow(f"no states with E <= {E_max} and n <= {p_max}")
    return fock.op_norm(fock.restrict(A, idx), dense_threshold=max(basis.config.dense_threshold, idx.size))


class GammaProjection:
    """Projection A -> sum_j sigma_j(A) phi_j(0) onto the span of a field basis.

    When the identity is among the fields its dual is the vacuum state; the
    remaining duals are the minimal-norm pseudoinverse rows of the evaluation
    matrix M[(a,b), j] = <a|phi_j(0)|b> over the window. Normal ordering makes
    every non-identity monomial vanish in the vacuum, so biorthogonality
    survives the substitution.
    """

    def __init__(self, fields, basis, window=None, matrices=None, vacuum_slot="auto"):
        if fields is not None and not isinstance(fields, FieldBasis):
            fields = FieldBasis(tuple(fields))
        if fields is None and matrices is None:
            raise ValueError("need fields or matrices")
        if (len(fields) if fields is not None else len(matrices)) == 0:
            raise ValueError("field basis must be non-empty")
        self.fields = fields
        self.basis = basis
        self.window = tuple(window) if window is not None else default_window(basis.config)
        self.idx = fock.window_indices(basis, *self.window)
        if self.idx.size == 0:
            raise EmptyWindow(f"empty dual window {self.window}")
        origin = np.zeros(basis.config.s + 1)
        self.matrices = list(matrices) if matrices is not None else [
            point_field(basis, mono, origin) for mono in fields]
        M = np.stack([fock.restrict(P, self.idx).reshape(-1) for P in self.matrices], axis=1)
        self.evaluation = M
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise RankDeficient("fields are linearly dependent on the window",
                                singular_values=sv.tolist())
        self.gram_condition = float(sv[0] / sv[-1])
        if self.gram_condition > GRAM_CONDITION_MAX:
            raise GramIllConditioned(f"condition {self.gram_condition:.3g} exceeds {GRAM_CONDITION_MAX:g}",
                                     condition=self.gram_condition)
        duals = np.linalg.pinv(M)
        if vacuum_slot == "auto":
            ident = WickMonomial.identity(basis.config.s)
            vacuum_slot = fields.monomials.index(ident) if fields is not None and ident in fields.monomials else None
        self.vacuum_slot = vacuum_slot
        if self.vacuum_slot is not None:
            # vacuum is window state 0 (energy sorted), matrix unit (0, 0)
            duals[self.vacuum_slot] = 0.0
            duals[self.vacuum_slot, 0] = 1.0
        self.duals = duals
        err = np.max(np.abs(duals @ M - np.eye(M.shape[1])))
        if err > BIORTHOGONALITY_TOL:
            raise GramIllConditioned(f"biorthogonality error {err:.3g}", error=float(err))
        self.biorthogonality_error = float(err)

    def __len__(self):
        return len(self.matrices)

    def coefficients_from_block(self, block):
        """Dual coefficients from the window block A[idx, idx]."""
        return self.duals @ np.asarray(block).reshape(-1)

    def coefficients(self, A):
        return self.coefficients_from_block(fock.restrict(A, self.idx))

    def combine(self, coeffs):
        total = None
        for c, P in zip(coeffs, self.matrices):
            if c == 0:
                continue
            term = P * c
            total = term if total is None else total + term
        if total is None:
            return sp.csr_matrix((self.basis.dim, self.basis.dim), dtype=complex)
        return fock.clean(total)

    def apply(self, A):
        c = self.coefficients(A)
        return self.combine(c), c


def gamma_projection(fields, window, basis):
    return GammaProjection(fields, basis, window)


def apply_projection(p, A):
    """(p(A), coefficients)."""
    return p.apply(A)


# --- decay fits ------------------------------------------------------------


@dataclass
class DecayFit:
    abscissae: np.ndarray
    ordinates: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    window: tuple = None
    values: np.ndarray = field(default=None, repr=False)
    points: np.ndarray = field(default=None, repr=False)

    @property
    def prefactor(self):
        return float(np.exp(self.intercept))

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope


def is_geometric(x, rtol=1e-6):
    x = np.asarray(x, dtype=float)
    if x.size < 2 or np.any(x <= 0):
        return False
    ratios = x[1:] / x[:-1]
    return bool(np.all(np.abs(ratios - ratios[0]) <= rtol * abs(ratios[0])) and ratios[0] != 1)


def fit_decay(x, y, window=None, require_geometric=True, min_points=4):
    """OLS fit of log y against log x (slope > 0 means y shrinks with x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        keep = (x >= window[0]) & (x <= window[1])
        x, y = x[keep], y[keep]
    if x.size < min_points:
        raise TooFewPointsInWindow(f"{x.size} points in window {window}, need {min_points}",
                                   count=int(x.size))
    if require_geometric and not is_geometric(x):
        raise ValueError("abscissae must form a geometric sequence")
    if np.any(y <= 0):
        raise ValueError("log fit needs positive ordinates")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(ly) == 0:
        return DecayFit(lx, ly, 0.0, float(ly[0]), 1.0, window, y, x)
    res = stats.linregress(lx, ly)
    return DecayFit(lx, ly, float(res.slope), float(res.intercept), float(res.rvalue**2), window, y, x)


def format_number(v):
    return format(float(v), ".17g")


def decay_csv(fit, xname="r", yname="defect"):
    out = io.StringIO()
    out.write(f"{xname},{yname}\n")
    for x, y in zip(fit.points, fit.values):
        out.write(f"{format_number(x)},{format_number(y)}\n")
    out.write(f"# slope={format_number(fit.slope)},r2={format_number(fit.r_squared)}\n")
    return out.getvalue()


# --- phase-space defect ----------------------------------------------------


def exp_i(basis, G):
    """exp(iG) for Hermitian sparse G: dense expm below the dense threshold,
    otherwise a LinearOperator applying expm_multiply."""
    if basis.dim <= basis.config.dense_threshold:
        return sla.expm(1j * G.toarray())
    iG = (1j * G).tocsr()
    miG = (-1j * G).tocsr()

    def mv(v):
        return expm_multiply(iG, v, traceA=0.0)

    def rmv(v):
        return expm_multiply(miG, v, traceA=0.0)

    return LinearOperator((basis.dim, basis.dim), matvec=mv, rmatvec=rmv,
                          matmat=mv, dtype=complex)


def sample_bumps(config, r, count, seed):
    """Per-sample pairs of spacetime bumps supported in |t| + |x| < r.

    Each sample uses its own stream default_rng((seed, index)), and all
    random draws are radius independent (positions scale with r).
    """
    s = config.s
    out = []
    for i in range(count):
        rng = np.random.default_rng((seed, i))
        pair = []
        for _ in range(2):
            amp = rng.uniform(-2.0, 2.0)
            direction = rng.normal(size=s + 1)
            direction /= np.sum(np.abs(direction))
            shift = rng.uniform(0.0, 0.5) * direction
            axes = np.array([1.0 / 6.0] + [1.0 / (3.0 * np.sqrt(s))] * s)
            # height e*amp so that the bump peaks at amp
            pair.append(TestFunction(shift * r, axes * r, amplitude=amp * np.e, normalize=False,
                                     nodes_per_axis=16))
        out.append(tuple(pair))
    return out


def sample_generator(basis, f, g):
    """Hermitian generator phi(f) + d0 phi(g)."""
    s = basis.config.s
    return smeared_field(basis, WickMonomial.phi(s), f) + smeared_field(basis, WickMonomial.phi(s, 0), g)


def projection_defect(p, A, ell):
    """damped_norm(A - p(A)) / ||A|| for a dense matrix or unitary LinearOperator."""
    basis = p.basis
    if isinstance(A, LinearOperator):
        cols = np.zeros((basis.dim, p.idx.size), dtype=complex)
        cols[p.idx, np.arange(p.idx.size)] = 1.0
        block = (A @ cols)[p.idx]
        pA = p.combine(p.coefficients_from_block(block))
        pAH = fock.adjoint(pA)
        d = (1.0 + basis.energies) ** (-float(ell))
        op = LinearOperator(A.shape, matvec=lambda v: d * (A @ (d * v) - pA @ (d * v)),
                            rmatvec=lambda v: d * (A.H @ (d * v) - pAH @ (d * v)), dtype=complex)
        # A is unitary, so its operator norm is 1 up to round-off
        return fock.op_norm(op, dense_threshold=0, tol=1e-10, method="lanczos")
    A = np.asarray(A)
    pA = p.combine(p.coefficients(A)).toarray()
    return damped_norm(basis, A - pA, ell) / fock.op_norm(A, dense_threshold=max(A.shape))


def phase_space_defect(p, r, ell=1.0, count=64, seed=0, samples=None):
    """Max over sampled A = exp(i(phi(f) + d0 phi(g))) of the projection defect."""
    cfg = p.basis.config
    if r > cfg.L / 4:
        raise ValueError("radius must be <= L/4")
    if samples is None:
        samples = sample_bumps(cfg, r, count, seed)
    worst = 0.0
    for f, g in samples:
        A = exp_i(p.basis, sample_generator(p.basis, f, g))
        worst = max(worst, projection_defect(p, A, ell))
    return worst


def geometric_radii(r0, ratio, count):
    return r0 * ratio ** np.arange(count)


def delta_gamma_scan(p, radii, ell=1.0, count=64, seed=0):
    radii = np.asarray(radii, dtype=float)
    if radii.size < 4:
        raise TooFewPointsInWindow("need at least 4 radii", count=int(radii.size))
    if not is_geometric(radii):
        raise ValueError("radii must form a geometric sequence")
    defects = np.array([phase_space_defect(p, r, ell, count, seed) for r in radii])
    return fit_decay(radii, defects)
