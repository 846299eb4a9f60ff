"""Spacelike geometry, products of point fields at point tuples and their
smeared versions, and the geometric sequences used for short-distance scans."""

import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .errors import DimMismatch, NotSpacelike, RadiusTooLarge
from .fields import (TestFunction, WickMonomial, local_approximant, mode_coefficients,
                     monomial_derivative, parse_label, point_field, translate, wick_product)
from .norms import damped_norm, default_window, fit_decay, format_number, windowed_norm

SQRT2 = math.sqrt(2.0)


# --- geometry --------------------------------------------------------------


def point_tuple(x, s=None):
    """(n, s+1) float array; a flat array of length s+1 counts as n = 1."""
    x = np.array(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if s is not None and x.shape[1] != s + 1:
        raise DimMismatch(f"points need {s + 1} components, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite coordinates")
    return x


def _raw_distance(v):
    v = np.asarray(v, dtype=float)
    gap = np.linalg.norm(v[1:]) - abs(v[0])
    return gap / SQRT2 if gap > 0 else 0.0


def lightcone_distance(v):
    """Euclidean distance from v to the double light cone, capped at 1."""
    return min(1.0, _raw_distance(v))


def is_spacelike(v):
    return _raw_distance(v) > 0


def tuple_distance(x):
    """Pairwise surrogate for the distance to the boundary of the spacelike
    configurations in M^n (exact for n = 2), capped at 1."""
    x = point_tuple(x)
    d = 1.0
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            d = min(d, _raw_distance(x[i] - x[j]) / SQRT2)
    return d


def pairwise_spacelike(x):
    x = point_tuple(x)
    return all(is_spacelike(x[i] - x[j]) for i in range(len(x)) for j in range(i + 1, len(x)))


def bound_window(config):
    """Separation range where the truncated two-point function follows the
    continuum one: from the shortest resolved wavelength 1/k_max up to L/8."""
    return 1.0 / config.k_max if config.N > 0 else config.L / 16, config.L / 8


def taylor_window(config, lower=1e-6):
    """Separations with ||x|| omega_max <= 0.1, where the truncated product is
    an analytic function of x and the expansion orders are clean powers."""
    return lower, 0.1 / config.omega_max


@dataclass
class DecaySequence:
    tuples: list
    rho: float
    x0: np.ndarray
    norms: np.ndarray
    distances: np.ndarray
    c_seq: float
    window: tuple = None
    in_window: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def windowed(self):
        """Indices of points whose norm lies in the fit window."""
        return np.flatnonzero(self.in_window) if self.in_window is not None else np.arange(len(self))


def spacelike_sequence(x0, rho, count, window=None):
    """x_i = rho^i x0 for i < count, with slope constant min d(x_i)/||x_i||."""
    if not 0.5 < rho < 0.95:
        raise ValueError(f"ratio must lie in (0.5, 0.95), got {rho}")
    if count < 6:
        raise ValueError("need at least 6 points")
    x0 = point_tuple(x0)
    if not pairwise_spacelike(x0):
        raise NotSpacelike("seed tuple is not pairwise spacelike")
    tuples = [x0 * rho**i for i in range(count)]
    norms = np.array([np.linalg.norm(t) for t in tuples])
    dists = np.array([tuple_distance(t) for t in tuples])
    c_seq = float(np.min(dists / norms))
    flags = None
    if window is not None:
        flags = (norms >= window[0]) & (norms <= window[1])
    return DecaySequence(tuples, rho, x0, norms, dists, c_seq, window, flags)


# --- product expressions ---------------------------------------------------


def _as_mono(m, s):
    return parse_label(m, s) if isinstance(m, str) else m


class ProductExpression:
    """Finite sum of coefficient * (m_1 (x) ... (x) m_n) over Wick monomials."""

    def __init__(self, terms, s=None):
        merged = {}
        n = None
        for coeff, monos in terms:
            if s is None:
                s = next(m.s for m in monos if not isinstance(m, str))
            monos = tuple(_as_mono(m, s) for m in monos)
            if n is None:
                n = len(monos)
            elif len(monos) != n:
                raise DimMismatch("all terms need the same number of factors")
            merged[monos] = merged.get(monos, 0) + complex(coeff)
        self.n = n
        self.s = s
        key = lambda item: tuple(m.sort_key() for m in item[0])
        self.terms = [(c, monos) for monos, c in sorted(merged.items(), key=key) if c != 0]

    @classmethod
    def simple(cls, *monos, s=1):
        return cls([(1.0, monos)], s=s)

    @property
    def gamma(self):
        return max((m.grade for _, monos in self.terms for m in monos), default=0)

    @property
    def total_p(self):
        return max((sum(m.p for m in monos) for _, monos in self.terms), default=0)

    def derivative(self, axis):
        """Total derivative d/da^axis of Pi(x + a) at a = 0 (Leibniz over factors)."""
        terms = []
        for c, monos in self.terms:
            for i, m in enumerate(monos):
                for dm, k in monomial_derivative(m, axis).items():
                    terms.append((c * k, monos[:i] + (dm,) + monos[i + 1:]))
        if not terms:
            return ProductExpression([(0.0, self.terms[0][1])], s=self.s)
        return ProductExpression(terms, s=self.s)

    def __repr__(self):
        body = " + ".join(f"{c:g}*" + "(x)".join(m.label for m in monos) for c, monos in self.terms)
        return f"ProductExpression({body})"


def evaluate_product(P, x, basis, allow_timelike=False):
    x = point_tuple(x, basis.config.s)
    if len(x) != P.n:
        raise DimMismatch(f"product has {P.n} factors but {len(x)} points were given")
    if not allow_timelike and not pairwise_spacelike(x):
        raise NotSpacelike("points are not pairwise spacelike", points=x.tolist())
    total = None
    for c, monos in P.terms:
        term = None
        for m, pt in zip(monos, x):
            F = point_field(basis, m, pt)
            term = F if term is None else term @ F
        term = term * c
        total = term if total is None else total + term
    if total is None:
        return fock.identity(basis) * 0
    return fock.clean(total)


def normal_ordered_product(basis, monos, x):
    """Fully normal-ordered :m_1(x_1) ... m_n(x_n): (oracle for Wick checks)."""
    cfg = basis.config
    x = point_tuple(x, cfg.s)
    coeffs = []
    for m, pt in zip(monos, x):
        m = _as_mono(m, cfg.s)
        coeffs.extend(mode_coefficients(cfg, mu, pt) for mu in m.factors)
    return wick_product(basis, coeffs)


def safe_window(config, P=None):
    """Default window, with particles capped at n_max - sum p_i for products."""
    E_max, p_max = default_window(config)
    if P is not None:
        p_max = min(p_max, config.n_max - P.total_p)
    return E_max, max(p_max, 0)


def product_norm(P, x, basis, norm="windowed", ell=1.0, window=None):
    A = evaluate_product(P, x, basis)
    if norm == "windowed":
        return windowed_norm(basis, A, *(window or safe_window(basis.config, P)))
    return damped_norm(basis, A, ell)


@dataclass
class BoundScan:
    fit: object
    rows: list
    sequence: DecaySequence
    q_max: float

    @property
    def slope_ok(self):
        return bool(np.isfinite(self.fit.slope) and self.fit.slope >= -self.q_max)


def product_bound_scan(P, seq, basis, norm="windowed", ell=1.0, window=None, q_max=4.0):
    """Norms of P(x_i) along the sequence, fitted against d(x_i) over the
    points inside the sequence's fit window."""
    values = np.array([product_norm(P, x, basis, norm, ell, window) for x in seq.tuples])
    idx = seq.windowed()
    fit = fit_decay(seq.distances[idx], values[idx])
    rows = [(i, seq.norms[i], seq.distances[i], values[i]) for i in range(len(seq))]
    return BoundScan(fit, rows, seq, q_max)


def scan_csv(rows, meta=None):
    out = io.StringIO()
    for key, val in (meta or {}).items():
        out.write(f"# {key}={val}\n")
    out.write("i,norm_x,d_x,value\n")
    for i, nx, dx, v in rows:
        out.write(f"{i},{format_number(nx)},{format_number(dx)},{format_number(v)}\n")
    return out.getvalue()


def approximant_convergence(m1, m2, x, y, radii, basis, ell=1.0, nodes_per_axis=24):
    """Rows (r, damped_norm(m1(x) m2(y) - A_r(x) A'_r(y), ell))."""
    cfg = basis.config
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = lightcone_distance(x - y)
    for r in radii:
        if not r < d / 4:
            raise RadiusTooLarge(f"radius {r} violates r < d(x - y)/4 = {d / 4:.6g}", radius=r)
    m1, m2 = _as_mono(m1, cfg.s), _as_mono(m2, cfg.s)
    exact = point_field(basis, m1, x) @ point_field(basis, m2, y)
    rows = []
    for r in radii:
        A1, _ = local_approximant(m1, r, basis, nodes_per_axis=nodes_per_axis)
        A2, _ = local_approximant(m2, r, basis, nodes_per_axis=nodes_per_axis)
        approx = translate(basis, A1, x) @ translate(basis, A2, y)
        rows.append((float(r), damped_norm(basis, exact - approx, ell)))
    return rows


@dataclass
class ScaledFunction:
    scale: float
    function: TestFunction
    extent: float
    integral: float
    ratios: dict


def _multi_indices(dim, order):
    out = []
    for k in range(1, order + 1):
        for combo in itertools.combinations_with_replacement(range(dim), k):
            mu = [0] * dim
            for a in combo:
                mu[a] += 1
            out.append(tuple(mu))
    return out


def shrinking_family(f0, scales, order=2):
    """f_lam(x) = lam^-D f0(x/lam) with d(f_lam) and ||d^mu f_lam||_1 d(f_lam)^|mu|."""
    scales = [float(v) for v in scales]
    if any(not 0 < v <= 1 for v in scales) or any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must decrease within (0, 1]")
    out = []
    for lam in scales:
        f = f0.scaled(lam)
        ext = f.support_extent
        ratios = {mu: f.l1_norm(mu) * ext ** sum(mu) for mu in _multi_indices(f.dim, order)}
        nodes, w = f.grid()
        out.append(ScaledFunction(lam, f, ext, float(np.sum(w)), ratios))
    return out


def smeared_product(P, f, basis):
    """Quadrature of evaluate_product over f's grid on M^n (timelike nodes allowed)."""
    s = basis.config.s
    nodes, w = f.grid()
    if nodes.shape[1] != P.n * (s + 1):
        raise DimMismatch(f"test function lives on {nodes.shape[1]} dims, product needs {P.n * (s + 1)}")
    total = None
    for node, weight in zip(nodes, w):
        term = evaluate_product(P, node.reshape(P.n, s + 1), basis, allow_timelike=True) * weight
        total = term if total is None else total + term
    return fock.clean(total)
