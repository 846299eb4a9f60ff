"""Pointlike fields of the truncated free scalar: Wick monomials of
derivatives, field bases graded by engineering dimension, smearing with
compactly supported bumps, and the exact two-point function.
"""

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy import integrate, special

from . import fock
from .errors import EmptyCap


@functools.lru_cache(maxsize=32)
def modes(config):
    """Mode numbers, momenta and frequencies for ``config`` (read-only arrays)."""
    n = np.array(list(itertools.product(range(-config.N, config.N + 1), repeat=config.s)), dtype=int)
    k = (2 * np.pi / config.L) * n.astype(float)
    omega = np.sqrt(config.m**2 + np.sum(k**2, axis=1))
    for a in (n, k, omega):
        a.setflags(write=False)
    return n, k, omega


def _point(x, s):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (s + 1,):
        raise ValueError(f"expected a spacetime point with {s + 1} components, got {x.shape}")
    return x


# --- monomials -------------------------------------------------------------


def _factor_key(mu):
    return (sum(mu), tuple(-v for v in mu))


@dataclass(frozen=True)
class WickMonomial:
    """Normal-ordered product of derivatives of phi.

    ``factors`` holds one multi-index (length s+1, axis 0 is time) per
    factor, kept in canonical order so equal monomials compare equal.
    """

    factors: tuple
    s: int

    def __post_init__(self):
        facs = tuple(sorted((tuple(int(v) for v in f) for f in self.factors), key=_factor_key))
        if any(len(f) != self.s + 1 or min(f, default=0) < 0 for f in facs):
            raise ValueError(f"bad multi-indices {self.factors} for s={self.s}")
        object.__setattr__(self, "factors", facs)

    @classmethod
    def identity(cls, s):
        return cls((), s)

    @classmethod
    def phi(cls, s, *derivs):
        """Single factor with derivatives along the listed axes."""
        mu = [0] * (s + 1)
        for axis in derivs:
            mu[axis] += 1
        return cls((tuple(mu),), s)

    @property
    def p(self):
        return len(self.factors)

    @property
    def order(self):
        return sum(sum(f) for f in self.factors)

    @property
    def grade(self):
        return Fraction(self.p * (self.s - 1), 2) + self.order

    @property
    def parity(self):
        return (-1) ** self.p

    @property
    def label(self):
        return format_label(self)

    def __str__(self):
        return self.label

    def sort_key(self):
        return (self.grade, self.p, tuple(_factor_key(f) for f in self.factors))


def _factor_label(mu):
    toks = []
    for axis, count in enumerate(mu):
        toks.extend([f"d{axis}"] * count)
    return " ".join(toks + ["phi"])


def format_label(mono):
    if mono.p == 0:
        return "1"
    parts = []
    run = 0
    for mu in mono.factors:
        if sum(mu) == 0:
            run += 1
            continue
        parts.append(_factor_label(mu))
    if run:
        parts.insert(0, "phi" if run == 1 else f"phi^{run}")
    body = " ".join(parts)
    return body if mono.p == 1 else f":{body}:"


def parse_label(label, s):
    """Inverse of :func:`format_label`; also accepts ``phi phi`` for ``phi^2``."""
    text = label.strip()
    if text == "1":
        return WickMonomial.identity(s)
    if text.startswith(":") and text.endswith(":"):
        text = text[1:-1]
    factors = []
    mu = [0] * (s + 1)
    for tok in text.split():
        if tok.startswith("d") and tok[1:].isdigit():
            axis = int(tok[1:])
            if axis > s:
                raise ValueError(f"derivative axis {axis} out of range in {label!r}")
            mu[axis] += 1
        elif tok == "phi" or tok.startswith("phi^"):
            power = int(tok[4:]) if tok.startswith("phi^") else 1
            if power > 1 and any(mu):
                raise ValueError(f"powers only apply to underived phi in {label!r}")
            factors.extend([tuple(mu)] * power)
            mu = [0] * (s + 1)
        else:
            raise ValueError(f"unexpected token {tok!r} in {label!r}")
    if any(mu):
        raise ValueError(f"dangling derivative in {label!r}")
    if not factors:
        raise ValueError(f"empty monomial label {label!r}")
    return WickMonomial(tuple(factors), s)


@dataclass(frozen=True)
class FieldBasis:
    monomials: tuple
    gamma: object = None
    p_max: int = None
    D_max: int = None

    def __len__(self):
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i):
        return self.monomials[i]

    @property
    def s(self):
        return self.monomials[0].s

    @property
    def labels(self):
        return [m.label for m in self.monomials]

    def index(self, mono):
        if isinstance(mono, str):
            mono = parse_label(mono, self.s)
        return self.monomials.index(mono)

    def unit(self, mono):
        v = np.zeros(len(self))
        v[self.index(mono)] = 1.0
        return v

    @classmethod
    def from_labels(cls, labels, s):
        monos = tuple(parse_label(lab, s) for lab in labels)
        if len(set(monos)) != len(monos):
            raise ValueError("duplicate monomials")
        return cls(monos)


def field_basis(gamma, p_max, D_max, s):
    """All canonical monomials with p <= p_max, derivative order <= D_max and
    grade <= gamma, ordered by grade, then p, then lexicographically."""
    if p_max < 0 or D_max < 0:
        raise EmptyCap("caps must be non-negative")
    gamma = Fraction(gamma).limit_denominator(1000)
    mis = [mu for mu in itertools.product(range(D_max + 1), repeat=s + 1) if sum(mu) <= D_max]
    mis.sort(key=_factor_key)
    out = set()
    for p in range(p_max + 1):
        for combo in itertools.combinations_with_replacement(mis, p):
            if sum(sum(mu) for mu in combo) > D_max:
                continue
            mono = WickMonomial(combo, s)
            if mono.grade <= gamma:
                out.add(mono)
    if WickMonomial.identity(s) not in out:
        raise EmptyCap("field basis excludes the identity")
    return FieldBasis(tuple(sorted(out, key=WickMonomial.sort_key)), gamma, p_max, D_max)


# --- point fields ----------------------------------------------------------


def mode_coefficients(config, mu, x):
    """Coefficients c_k with (d^mu phi)(x) = sum_k c_k a_k + h.c."""
    _, k, omega = modes(config)
    x = _point(x, config.s)
    norm = (2 * config.L**config.s * omega) ** -0.5
    c = norm * np.exp(1j * (k @ x[1:] - omega * x[0]))
    c = c * (-1j * omega) ** mu[0]
    for j in range(config.s):
        if mu[j + 1]:
            c = c * (1j * k[:, j]) ** mu[j + 1]
    return c


def wick_product(basis, coeff_list):
    """Normal-ordered product of linear fields sum_k c_k a_k + h.c.

    Creation parts go left; since creators only raise the particle number,
    every stored matrix element is exact under the n_max truncation.
    """
    if not coeff_list:
        return fock.identity(basis)
    ann = [basis.annihilation_part(c) for c in coeff_list]
    cre = [basis.creation_part(np.conj(c)) for c in coeff_list]
    p = len(coeff_list)
    total = None
    for mask in range(1 << p):
        term = None
        creators = [cre[i] for i in range(p) if mask >> i & 1]
        annihilators = [ann[i] for i in range(p) if not mask >> i & 1]
        for op in creators + annihilators:
            term = op if term is None else term @ op
        total = term if total is None else total + term
    return fock.clean(total)


def point_field(basis, mono, x):
    if isinstance(mono, str):
        mono = parse_label(mono, basis.config.s)
    coeffs = [mode_coefficients(basis.config, mu, x) for mu in mono.factors]
    return wick_product(basis, coeffs)


def _translation_angles(basis, a):
    a = _point(a, basis.config.s)
    return basis.energies * a[0] - fock.momentum_eigenvalues(basis) @ a[1:]


def translation_phases(basis, a):
    """Diagonal of U(a) = exp(i (H a^0 - P.a)) in the occupation basis."""
    return np.exp(1j * _translation_angles(basis, a))


def translate(basis, A, a):
    """U(a) A U(a)^dagger, with phases exp(i(theta_i - theta_j)) so diagonal
    entries are untouched."""
    theta = _translation_angles(basis, a)
    A = sp.coo_matrix(A)
    data = A.data * np.exp(1j * (theta[A.row] - theta[A.col]))
    return fock.clean(sp.csr_matrix((data, (A.row, A.col)), shape=A.shape))


def two_point(config, x, y):
    """Vacuum two-point function <phi(x) phi(y)> as a direct mode sum."""
    _, k, omega = modes(config)
    x = _point(x, config.s)
    y = _point(y, config.s)
    phase = omega * (x[0] - y[0]) - k @ (x[1:] - y[1:])
    return complex(np.sum(np.exp(-1j * phase) / (2 * config.L**config.s * omega)))


# --- test functions --------------------------------------------------------


def bump_profile(u):
    """exp(1/(u - 1)) for u = rho^2 < 1, zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = u < 1
    out[inside] = np.exp(1.0 / (u[inside] - 1.0))
    return out


@functools.lru_cache(maxsize=None)
def unit_ball_bump_integral(d):
    """Integral of exp(1/(|x|^2 - 1)) over the unit ball in d dimensions."""
    area = 2 * math.pi ** (d / 2) / special.gamma(d / 2)
    radial, _ = integrate.quad(lambda r: r ** (d - 1) * math.exp(1.0 / (r * r - 1.0)) if r < 1 else 0.0,
                               0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    return area * radial


class TestFunction:
    """Smooth bump supported on an ellipsoid, with a midpoint quadrature grid.

    ``semi_axes`` are the ellipsoid half-widths per coordinate. With
    ``normalize=True`` the bump integrates to ``amplitude``; otherwise
    ``amplitude`` is its peak height times e (the profile peaks at 1/e).
    """

    __test__ = False

    def __init__(self, center, semi_axes, amplitude=1.0, normalize=True, nodes_per_axis=24):
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.semi_axes = np.broadcast_to(np.asarray(semi_axes, dtype=float), self.center.shape).copy()
        self.dim = self.center.size
        self.nodes_per_axis = int(nodes_per_axis)
        volume = unit_ball_bump_integral(self.dim) * float(np.prod(self.semi_axes))
        self.height = amplitude / volume if normalize else amplitude
        self.integral = self.height * volume
        self._grid = None

    @classmethod
    def spacetime(cls, center, radius, s, time_scale=0.5, **kw):
        scales = np.array([time_scale] + [1.0] * s) * radius
        return cls(center, scales, **kw)

    @property
    def radius(self):
        return float(np.max(self.semi_axes))

    @property
    def support_extent(self):
        """d(f) = sup |x| over the support (exact for centred bumps)."""
        return float(np.linalg.norm(self.center) + np.max(self.semi_axes))

    def _u(self, pts):
        y = (pts - self.center) / self.semi_axes
        return np.sum(y * y, axis=-1)

    def __call__(self, pts):
        return self.height * bump_profile(self._u(np.atleast_2d(pts)))

    def grid(self):
        """(nodes, weights) of the midpoint rule restricted to the support.

        Weights are rescaled by a factor 1 + O(1e-8) so they sum exactly to the
        analytic integral.
        """
        if self._grid is None:
            n = self.nodes_per_axis
            axes = [c + a * (2 * (np.arange(n) + 0.5) / n - 1) for c, a in zip(self.center, self.semi_axes)]
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
            vals = self(pts)
            keep = self._u(pts) < 1
            cell = float(np.prod(2 * self.semi_axes / n))
            w = vals[keep] * cell
            raw = w.sum()
            if raw != 0:
                w = w * (self.integral / raw)
            self._grid = (pts[keep], w, raw)
        return self._grid[0], self._grid[1]

    @property
    def raw_quadrature_sum(self):
        self.grid()
        return self._grid[2]

    def derivative(self, pts, mu):
        """Analytic derivative d^mu f for |mu| <= 2."""
        pts = np.atleast_2d(pts)
        mu = tuple(mu)
        order = sum(mu)
        y = pts - self.center
        a2 = self.semi_axes**2
        u = self._u(pts)
        inside = u < 1
        out = np.zeros(len(pts))
        ui = u[inside]
        g = np.exp(1.0 / (ui - 1.0))
        g1 = -g / (ui - 1.0) ** 2
        du = 2 * y[inside] / a2
        if order == 0:
            out[inside] = g
        elif order == 1:
            i = mu.index(1)
            out[inside] = g1 * du[:, i]
        elif order == 2:
            g2 = g * (1.0 / (ui - 1.0) ** 4 + 2.0 / (ui - 1.0) ** 3)
            idx = [i for i, c in enumerate(mu) for _ in range(c)]
            i, j = idx
            val = g2 * du[:, i] * du[:, j]
            if i == j:
                val = val + g1 * 2 / a2[i]
            out[inside] = val
        else:
            raise ValueError("derivatives above order 2 are not implemented")
        return self.height * out

    def l1_norm(self, mu, nodes_per_axis=None):
        """Midpoint-rule L1 norm of d^mu f on a fresh grid."""
        n = nodes_per_axis or max(self.nodes_per_axis, 64 if self.dim <= 2 else 24)
        axes = [c + a * (2 * (np.arange(n) + 0.5) / n - 1) for c, a in zip(self.center, self.semi_axes)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        cell = float(np.prod(2 * self.semi_axes / n))
        return float(np.sum(np.abs(self.derivative(pts, mu))) * cell)

    def scaled(self, lam):
        """f_lam(x) = lam^-D f(x / lam): same integral, support shrunk by lam."""
        out = TestFunction(self.center * lam, self.semi_axes * lam, amplitude=self.integral,
                           normalize=True, nodes_per_axis=self.nodes_per_axis)
        return out


def point_mass(x, weight=1.0):
    """Single-node 'test function' used to check smearing reduces to evaluation."""
    f = TestFunction(np.asarray(x, dtype=float), 1.0)
    f._grid = (np.atleast_2d(np.asarray(x, dtype=float)), np.array([weight], dtype=float), weight)
    f.integral = weight
    return f


# --- smearing --------------------------------------------------------------


def smeared_mode_coefficients(config, mu, f):
    """Quadrature of mode_coefficients(mu, x) against f over its grid."""
    nodes, w = f.grid()
    _, k, omega = modes(config)
    norm = (2 * config.L**config.s * omega) ** -0.5
    phase = np.exp(1j * (nodes[:, 1:] @ k.T - np.outer(nodes[:, 0], omega)))
    c = (w @ phase) * norm
    c = c * (-1j * omega) ** mu[0]
    for j in range(config.s):
        if mu[j + 1]:
            c = c * (1j * k[:, j]) ** mu[j + 1]
    return c


def smeared_field(basis, mono, f):
    """sum over quadrature nodes of weight * point_field(mono, node).

    Linear monomials use the equivalent mode-space sum directly.
    """
    if isinstance(mono, str):
        mono = parse_label(mono, basis.config.s)
    nodes, w = f.grid()
    if mono.p == 0:
        return fock.identity(basis) * float(f.integral)
    if mono.p == 1:
        return wick_product(basis, [smeared_mode_coefficients(basis.config, mono.factors[0], f)])
    total = None
    for node, weight in zip(nodes, w):
        term = point_field(basis, mono, node) * weight
        total = term if total is None else total + term
    return fock.clean(total)


def local_approximant(mono, r, basis, ell=None, nodes_per_axis=24):
    """A_r = mono smeared with the unit-integral bump of radius r (time extent r/2).

    Returns (A_r, defect) where defect = damped_norm(mono(0) - A_r, ell), or
    None when ``ell`` is None.
    """
    from .norms import damped_norm

    cfg = basis.config
    if r > cfg.L / 4:
        raise ValueError("approximant radius must be <= L/4")
    if isinstance(mono, str):
        mono = parse_label(mono, cfg.s)
    f = TestFunction.spacetime(np.zeros(cfg.s + 1), r, cfg.s, nodes_per_axis=nodes_per_axis)
    A = smeared_field(basis, mono, f)
    defect = None
    if ell is not None:
        defect = damped_norm(basis, point_field(basis, mono, np.zeros(cfg.s + 1)) - A, ell)
    return A, defect


def truncated_overlap(config, f, g):
    """int f g with the delta function replaced by its mode-truncated kernel.

    f, g are equal-time spatial test functions (dimension s). This is the
    c-number in [phi(f), pi(g)] for the truncated field.
    """
    nf, wf = f.grid()
    ng, wg = g.grid()
    _, k, _ = modes(config)
    Ff = wf @ np.exp(1j * nf @ k.T)
    Fg = wg @ np.exp(1j * ng @ k.T)
    return float(np.sum((Ff * np.conj(Fg)).real) / config.L**config.s)


def _equal_time(f, s):
    nodes, w = f.grid()
    if nodes.shape[1] != s:
        raise ValueError("expected an equal-time spatial test function")
    st = np.zeros((len(nodes), s + 1))
    st[:, 1:] = nodes
    g = point_mass(np.zeros(s + 1))
    g._grid = (st, w, float(np.sum(w)))
    g.integral = float(np.sum(w))
    return g


def canonical_commutator_check(basis, f, g):
    """|| Q([phi(0,f), d0 phi(0,g)] - i <f,g>_N) Q || on the window n <= n_max - 2."""
    cfg = basis.config
    s = cfg.s
    F = smeared_field(basis, WickMonomial.phi(s), _equal_time(f, s))
    G = smeared_field(basis, WickMonomial.phi(s, 0), _equal_time(g, s))
    comm = F @ G - G @ F
    c = truncated_overlap(cfg, f, g)
    idx = np.flatnonzero(basis.totals <= cfg.n_max - 2)
    D = fock.restrict(comm, idx) - 1j * c * np.eye(len(idx))
    return fock.op_norm(D, dense_threshold=max(cfg.dense_threshold, len(idx)))


def monomial_derivative(mono, axis):
    """Leibniz rule: d_axis of a Wick monomial as {monomial: coefficient}."""
    out = {}
    for i, mu in enumerate(mono.factors):
        bumped = list(mu)
        bumped[axis] += 1
        factors = mono.factors[:i] + (tuple(bumped),) + mono.factors[i + 1:]
        new = WickMonomial(factors, mono.s)
        out[new] = out.get(new, 0) + 1
    return out
