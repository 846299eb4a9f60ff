"""Normal product spaces: spacelike-approximation verdicts, extraction of the
minimal space from coefficient tails, Zimmermann reconstruction, and
covariance under symmetries and derivatives."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import fock
from .errors import (CandidateNotClosed, CandidateNotSpApp, CoefficientVanishes,
                     KernelThresholdAmbiguous, RankAmbiguous, VerdictUnstable)
from .fields import (FieldBasis, WickMonomial, mode_coefficients, modes, monomial_derivative,
                     point_field, translate, wick_product)
from .norms import GammaProjection, damped_norm, default_window, fit_decay, windowed_norm
from .ope import RESIDUAL_FLOOR, residual_norms
from .products import ProductExpression, evaluate_product, point_tuple, safe_window

MARGIN = 0.2
AMBIGUITY = 0.1
NOISE = 1e-12
KERNEL_TOL = 1e-10
COEFF_FLOOR = 1e-6


# --- coefficient subspaces -------------------------------------------------


def field_metric(fields, basis, ell=1.0):
    """Diagonal weights ||phi_j(0)||_ell^2 for the coefficient metric."""
    origin = np.zeros(basis.config.s + 1)
    return np.array([damped_norm(basis, point_field(basis, m, origin), ell) ** 2 for m in fields])


def orthonormalize(vectors, weights=None, tol=1e-12):
    """Orthonormal basis (columns) for the span of ``vectors`` in the weighted metric."""
    V = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if V.shape[1] == 0:
        return V
    w = np.ones(V.shape[0]) if weights is None else np.sqrt(weights)
    U, s, _ = np.linalg.svd(w[:, None] * V, full_matrices=False)
    keep = s > tol * max(s[0], 1e-300)
    return U[:, keep] / w[:, None]


def principal_angles(A, B, weights=None):
    """Principal angles (descending) between column spans in the weighted metric."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.array([np.pi / 2])
    w = np.ones(A.shape[0]) if weights is None else np.sqrt(weights)
    return sla.subspace_angles(w[:, None] * A, w[:, None] * B)


def max_angle(A, B, weights=None):
    return float(np.max(principal_angles(A, B, weights)))


def span_of(fields, labels):
    """Unit coefficient vectors of the named monomials as columns."""
    return np.stack([fields.unit(lab) for lab in labels], axis=1).astype(complex)


class SubspaceProjection:
    """Projection onto span{sum_j S[j, a] phi_j(0)} for coefficient columns S.

    Coefficients are reported in the ambient monomial coordinates.
    """

    def __init__(self, fields, S, basis, window=None):
        self.fields = fields
        self.basis = basis
        S = np.asarray(S, dtype=complex)
        self.S = S
        self.window = window or default_window(basis.config)
        self.p = None
        origin = np.zeros(basis.config.s + 1)
        self.mats = mats = [point_field(basis, m, origin) for m in fields]
        if S.shape[1]:
            combos = []
            for a in range(S.shape[1]):
                M = None
                for j in np.flatnonzero(S[:, a]):
                    term = mats[j] * S[j, a]
                    M = term if M is None else M + term
                combos.append(fock.clean(M))
            # vacuum anchoring only applies when a column is exactly the identity
            ident = WickMonomial.identity(fields.s)
            slot = None
            if ident in fields.monomials:
                j = fields.index(ident)
                for a in range(S.shape[1]):
                    if S[j, a] == 1 and np.count_nonzero(S[:, a]) == 1:
                        slot = a
            self.p = GammaProjection(None, basis, self.window, matrices=combos, vacuum_slot=slot)

    @property
    def idx(self):
        return fock.window_indices(self.basis, *self.window)

    def coefficients(self, A):
        if self.p is None:
            return np.zeros(len(self.fields), dtype=complex)
        return self.S @ self.p.coefficients(A)

    def combine(self, c):
        total = None
        for j in np.flatnonzero(np.abs(c) > 0):
            term = self.mats[j] * c[j]
            total = term if total is None else total + term
        if total is None:
            return sp.csr_matrix((self.basis.dim, self.basis.dim), dtype=complex)
        return fock.clean(total)


def _projection(candidate, basis, window=None):
    """Candidate is a FieldBasis or (FieldBasis, coefficient columns)."""
    if isinstance(candidate, FieldBasis):
        return SubspaceProjection(candidate, np.eye(len(candidate)), basis, window), candidate
    fields, S = candidate
    return SubspaceProjection(fields, S, basis, window), fields


# --- sp-app verdicts -------------------------------------------------------


@dataclass
class SpAppVerdict:
    candidate: object
    is_spapp: bool
    slope: float
    residuals: np.ndarray
    fit: object = None
    diagnostics: dict = field(default_factory=dict)


def _coefficient_rows(proj, P, seq):
    rows = []
    for x in seq.tuples:
        rows.append(proj.coefficients(evaluate_product(P, x, proj.basis)))
    return np.array(rows)


def _residuals(proj, P, seq, rows=None, window=None, ell=1.0):
    basis = proj.basis
    window = window or safe_window(basis.config, P)
    out = []
    for i, x in enumerate(seq.tuples):
        A = evaluate_product(P, x, basis)
        c = rows[i] if rows is not None else proj.coefficients(A)
        out.append(residual_norms(basis, A - proj.combine(c), window, ell)[0])
    return np.array(out)


def _verdict(residuals, seq, beta):
    idx = seq.windowed()
    r = residuals[idx]
    if np.max(r) <= RESIDUAL_FLOOR:
        return True, float("inf"), None
    fit = fit_decay(seq.norms[idx], np.maximum(r, np.finfo(float).tiny))
    ok = fit.slope > beta + MARGIN and r[-1] < 0.1 * r[0]
    return bool(ok), fit.slope, fit


def is_spacelike_approximating(candidate, P, seq, basis, ell=1.0, window=None, beta=0.0,
                               second_window=None):
    """Residual decay verdict for the projection onto ``candidate``; the test
    is repeated with a second dual window and both must agree."""
    window = window or default_window(basis.config)
    second_window = second_window or (window[0] + 2 * basis.config.m, window[1])
    verdicts = []
    for win in (window, second_window):
        proj, _ = _projection(candidate, basis, win)
        res = _residuals(proj, P, seq, ell=ell)
        verdicts.append((_verdict(res, seq, beta), res))
    (ok1, slope1, fit1), res1 = verdicts[0]
    (ok2, slope2, _), _ = verdicts[1]
    if ok1 != ok2:
        raise VerdictUnstable("verdict depends on the dual window", slopes=[slope1, slope2])
    return SpAppVerdict(candidate, ok1, slope1, res1, fit1,
                        {"second_window_slope": slope2, "beta": beta})


# --- extraction ------------------------------------------------------------


@dataclass
class NormalProductSpace:
    fields: FieldBasis
    vectors: np.ndarray
    beta: float
    singular_values: np.ndarray
    slopes: list
    directions: np.ndarray
    weights: np.ndarray
    rows: np.ndarray = None

    @property
    def dimension(self):
        return self.vectors.shape[1]

    def as_report(self):
        def enc(z):
            return [[float(v.real), float(v.imag)] for v in z]

        return {
            "dimension": self.dimension,
            "beta": self.beta,
            "fields": self.fields.labels if hasattr(self.fields, "labels") else None,
            "basis": [enc(v) for v in self.vectors.T],
            "slopes": [None if s is None else float(s) for s in self.slopes],
            "svd": [float(v) for v in self.singular_values],
        }


def tail_indices(seq):
    idx = seq.windowed()
    n = max(4, len(idx) // 2)
    return idx[-n:]


def direction_slopes(T, norms):
    """Decay order of each singular direction of the row block ``T``.

    A sub-block of w consecutive rows slides along the tail; its k-th singular
    value scales like ||x||^(p_k) when the k-th direction enters the
    coefficients at order p_k. Values at the round-off floor mark the
    direction as vanishing (None).
    """
    n = len(T)
    w = max(2, n - 3)
    centers, values = [], []
    for j in range(n - w + 1):
        sv = np.linalg.svd(T[j:j + w], compute_uv=False)
        values.append(sv)
        centers.append(float(np.exp(np.mean(np.log(norms[j:j + w])))))
    values = np.array(values)
    centers = np.array(centers)
    slopes = []
    for k in range(T.shape[1]):
        if k >= values.shape[1]:
            slopes.append(None)
            continue
        col = values[:, k]
        if np.any(col <= NOISE * values[:, 0]):
            slopes.append(None)
            continue
        slopes.append(fit_decay(centers, col, require_geometric=False,
                                min_points=min(4, len(centers))).slope)
    return slopes


def extract_from_rows(rows, norms, fields, weights, beta=0.0, strict=True):
    """Weighted SVD of the tail rows; keep the leading directions whose decay
    order is at most beta + margin."""
    w = np.sqrt(weights)
    T = rows * w[None, :]
    _, s, Vh = np.linalg.svd(T, full_matrices=False)
    threshold = beta + MARGIN
    slopes = direction_slopes(T, norms)[: len(s)]
    keep = []
    for k, slope in enumerate(slopes):
        if slope is None or s[k] <= NOISE * max(s[0], 1e-300):
            continue
        if strict and abs(slope - threshold) < AMBIGUITY:
            raise RankAmbiguous(f"direction {k} has slope {slope:.3f} near threshold {threshold:.3f}",
                                direction=k, slope=slope)
        if slope <= threshold:
            keep.append(k)
    directions = (Vh.conj().T) / w[:, None]
    # orthonormal in the field-norm metric, like the refined span below
    vectors = orthonormalize(directions[:, keep], weights) if keep else np.zeros((len(w), 0), dtype=complex)
    refined = taylor_span(rows, norms, int(np.floor(threshold)), len(keep), w)
    if refined is not None:
        vectors = refined
    return NormalProductSpace(fields, vectors, beta, s, slopes, directions, weights, rows)


def taylor_span(rows, norms, order, rank, w):
    """Span of the Taylor coefficients of order <= ``order`` of the rows as
    functions of t = ||x|| (least squares, degree order + 3).

    Tail singular directions mix order k with order k+1 at relative size
    O(t); along a scaling sequence the rows are analytic in t, so the
    extrapolated coefficients remove that bias. Returns None when the
    extrapolated span does not have the rank found by the slope test.
    """
    if rank == 0 or order < 0:
        return None
    deg = order + 3
    if len(rows) < deg + 2:
        return None
    t = np.asarray(norms, dtype=float) / np.max(norms)
    V = np.vander(t, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, rows * w[None, :], rcond=None)
    lead = coef[: order + 1].T
    _, s, _ = np.linalg.svd(lead, full_matrices=False)
    if np.sum(s > 1e-9 * max(s[0], 1e-300)) != rank:
        return None
    return orthonormalize(lead / w[:, None], w**2)[:, :rank]


def extract_normal_product(P, candidate, seq, basis, ell=1.0, window=None, beta=0.0,
                           check_spapp=True, weights=None):
    proj, fields = _projection(candidate, basis, window)
    if check_spapp:
        verdict = is_spacelike_approximating(candidate, P, seq, basis, ell, window, beta)
        if not verdict.is_spapp:
            raise CandidateNotSpApp("candidate is not spacelike approximating", slope=verdict.slope)
    rows = _coefficient_rows(proj, P, seq)
    tail = tail_indices(seq)
    weights = field_metric(fields, basis, ell) if weights is None else weights
    return extract_from_rows(rows[tail], seq.norms[tail], fields, weights, beta)


def minimality_check(space, P, seq, basis, ell=1.0, window=None):
    """sp-app verdicts for the spans with one direction removed (all must be False)."""
    out = []
    for k in range(space.dimension):
        rest = np.delete(space.vectors, k, axis=1)
        v = is_spacelike_approximating((space.fields, rest), P, seq, basis, ell, window, space.beta)
        out.append(v.is_spapp)
    return out


# --- Zimmermann ------------------------------------------------------------


def zimmermann_reconstruct(P, k, space, seq, basis, ell=1.0, window=None):
    """Rows (i, windowed defect, damped defect) of phi_k - (Pi - sum_{j != k} c_j phi_j) / c_k,
    where phi_j are the basis vectors of ``space``."""
    cfg = basis.config
    proj = SubspaceProjection(space.fields, space.vectors, basis, window)
    mats = []
    origin = np.zeros(cfg.s + 1)
    for a in range(space.dimension):
        mats.append(proj.combine(space.vectors[:, a]))
    win = safe_window(cfg, P)
    rows = []
    for i in seq.windowed():
        A = evaluate_product(P, seq.tuples[i], basis)
        c = proj.p.coefficients(A)
        if abs(c[k]) < COEFF_FLOOR:
            raise CoefficientVanishes(f"coefficient {k} is {abs(c[k]):.3g} at point {i}", index=int(i))
        rest = A
        for j in range(space.dimension):
            if j != k:
                rest = rest - mats[j] * c[j]
        D = mats[k] - rest / c[k]
        wn, dn = residual_norms(basis, D, win, ell)
        rows.append((int(i), float(seq.norms[i]), wn, dn, complex(c[k])))
    return rows


# --- transformations -------------------------------------------------------


def parity_signs(basis):
    return (-1.0) ** basis.totals


def reflection_permutation(basis):
    """Index map of x -> -x on occupation states (mode n -> -n)."""
    n = basis.mode_numbers
    mode_perm = np.array([basis.mode_index(-row) for row in n])
    counts = basis.counts[:, mode_perm]
    return np.array([basis.lookup(row) for row in counts])


class Transformation:
    """Linear map on operators with its symbolic action on monomials and its
    action on points. ``kind`` is one of translation, z2_parity,
    spatial_reflection, derivative."""

    def __init__(self, kind, axis=None, shift=None, s=1):
        if kind not in ("translation", "z2_parity", "spatial_reflection", "derivative", "identity"):
            raise ValueError(f"unknown transformation {kind!r}")
        self.kind = kind
        self.axis = axis
        self.shift = None if shift is None else np.asarray(shift, dtype=float)
        self.s = s
        self._cache = {}

    def __repr__(self):
        extra = f", axis={self.axis}" if self.axis is not None else ""
        return f"Transformation({self.kind!r}{extra})"

    # matrices
    def on_matrix(self, basis, A):
        if self.kind == "identity":
            return A
        if self.kind == "z2_parity":
            d = sp.diags(parity_signs(basis))
            return fock.clean(d @ A @ d)
        if self.kind == "spatial_reflection":
            key = ("perm", id(basis))
            if key not in self._cache:
                perm = reflection_permutation(basis)
                self._cache[key] = sp.csr_matrix((np.ones(basis.dim), (perm, np.arange(basis.dim))),
                                                 shape=(basis.dim, basis.dim))
            S = self._cache[key]
            return fock.clean(S @ A @ S.T)
        if self.kind == "translation":
            return translate(basis, A, self.shift)
        # derivative: d_0 -> i[H, .], d_j -> -i[P_j, .]
        if self.axis == 0:
            gen = basis.energies
            sign = 1j
        else:
            gen = fock.momentum_eigenvalues(basis)[:, self.axis - 1]
            sign = -1j
        G = sp.diags(gen)
        return fock.clean(sign * (G @ A - A @ G))

    # monomials
    def on_monomial(self, mono):
        """{monomial: coefficient} image of a single monomial."""
        if self.kind in ("identity", "translation"):
            return {mono: 1.0}
        if self.kind == "z2_parity":
            return {mono: float(mono.parity)}
        if self.kind == "spatial_reflection":
            spatial = sum(sum(mu[1:]) for mu in mono.factors)
            return {mono: float((-1) ** spatial)}
        return {m: float(c) for m, c in monomial_derivative(mono, self.axis).items()}

    def on_expression(self, P):
        if self.kind == "derivative":
            return P.derivative(self.axis)
        terms = []
        for c, monos in P.terms:
            coeff = c
            for m in monos:
                coeff *= next(iter(self.on_monomial(m).values()))
            terms.append((coeff, monos))
        return ProductExpression(terms, s=P.s)

    def on_points(self, x):
        x = point_tuple(x)
        if self.kind == "spatial_reflection":
            y = x.copy()
            y[:, 1:] *= -1
            return y
        if self.kind == "translation":
            return x + self.shift
        return x

    def coefficient_map(self, source, target=None):
        """Matrix of the symbolic action from source monomials to target
        monomials; target defaults to the sorted image set."""
        images = [self.on_monomial(m) for m in source]
        if target is None:
            mons = {m for img in images for m, c in img.items() if c != 0}
            target = FieldBasis(tuple(sorted(mons, key=WickMonomial.sort_key)))
        A = np.zeros((len(target), len(source)))
        for j, img in enumerate(images):
            for m, c in img.items():
                if c == 0:
                    continue
                if m not in target.monomials:
                    raise CandidateNotClosed(f"{m.label} is outside the target basis", monomial=m.label)
                A[target.index(m), j] += c
        return A, target


def compatibility_defect(alpha, P, x, basis):
    """|| alpha(Pi(x)) - (alpha Pi)(alpha.x) || on the safe window."""
    lhs = alpha.on_matrix(basis, evaluate_product(P, x, basis))
    aP = alpha.on_expression(P)
    rhs = evaluate_product(aP, alpha.on_points(x), basis)
    return windowed_norm(basis, lhs - rhs, *safe_window(basis.config, P))


def derivative_action(axis, P):
    return P.derivative(axis)


# --- intertwining ----------------------------------------------------------


@dataclass
class IntertwinedProjections:
    alpha: Transformation
    source: FieldBasis
    target: FieldBasis
    amap: np.ndarray
    kernel: np.ndarray
    complement: np.ndarray
    p_source: object
    p_image: object
    singular_values: np.ndarray
    report: dict = field(default_factory=dict)

    def source_coefficients(self, A):
        """Coefficients of p(A) over the source monomials, p = p_K + inv(alpha) p' alpha."""
        c = np.zeros(len(self.source), dtype=complex)
        if self.kernel.shape[1]:
            full = self.p_source.coefficients(A)
            # K-part of full in the decomposition V = K + C
            basis_kc = np.concatenate([self.kernel, self.complement], axis=1)
            kc = np.linalg.solve(basis_kc, full)
            c += self.kernel @ kc[: self.kernel.shape[1]]
        if self.complement.shape[1]:
            img = self.p_image.coefficients(self.alpha.on_matrix(self.p_image.basis, A))
            # img lives on alpha(C); pull back through alpha restricted to C
            AC = self.amap @ self.complement
            pre, *_ = np.linalg.lstsq(AC, img, rcond=None)
            c += self.complement @ pre
        return c

    def image_coefficients(self, A):
        """Coefficients of p'(A) over the target monomials."""
        return self.p_image.coefficients(A)


def _null_space(A, tol=KERNEL_TOL):
    """(kernel columns, complement columns, singular values) of A with an
    ambiguity guard on the threshold."""
    U, s, Vh = np.linalg.svd(A)
    n = A.shape[1]
    sv = np.concatenate([s, np.zeros(n - len(s))])
    scale = max(sv[0], 1.0) if sv.size else 1.0
    rel = sv / scale
    near = (rel > tol / 10) & (rel < tol * 10)
    if np.any(near):
        raise KernelThresholdAmbiguous("singular values straddle the kernel threshold",
                                       singular_values=sv.tolist())
    zero = rel <= tol
    V = Vh.conj().T
    return V[:, zero], V[:, ~zero], sv


def _clean_columns(V, tol=1e-13):
    V = np.array(V, dtype=complex)
    V[np.abs(V) < tol] = 0
    return V


def intertwined_projections(alpha, V, basis, window=None, S=None, probes=()):
    """Build p onto V and p' onto alpha(V) with alpha p = p' alpha.

    V is a FieldBasis (optionally with coefficient columns S spanning a
    subspace). The verification report holds ||alpha p(A) - p'(alpha A)|| over
    the probe operators (windowed norm on the default window).
    """
    window = window or default_window(basis.config)
    S = np.eye(len(V)) if S is None else np.asarray(S, dtype=complex)
    amap_full, target = alpha.coefficient_map(V)
    amap = amap_full.astype(complex)
    K, C, sv = _null_space(amap @ S)
    K = _clean_columns(S @ K)
    C = _clean_columns(S @ C)
    p_source = SubspaceProjection(V, S, basis, window)
    image_cols = orthonormalize(amap @ C) if C.shape[1] else np.zeros((len(target), 0))
    p_image = SubspaceProjection(target, image_cols, basis, window)
    ip = IntertwinedProjections(alpha, V, target, amap, K, C, p_source, p_image, sv)
    defects = []
    for A in probes:
        lhs = alpha.on_matrix(basis, p_source.combine(ip.source_coefficients(A)))
        rhs = p_image.combine(ip.image_coefficients(alpha.on_matrix(basis, A)))
        defects.append(windowed_norm(basis, lhs - rhs, *window))
    ip.report = {"kernel_dim": int(K.shape[1]), "defects": defects,
                 "max_defect": max(defects) if defects else 0.0}
    return ip


def probe_operators(basis, count=4, seed=0):
    """Deterministic probe operators: products of phi at random spacelike pairs."""
    from .fields import WickMonomial as WM

    rng = np.random.default_rng(seed)
    s = basis.config.s
    phi = WM.phi(s)
    out = []
    for _ in range(count):
        x = np.concatenate([[rng.uniform(-0.05, 0.05)], rng.uniform(-0.5, 0.5, s)])
        y = np.concatenate([[rng.uniform(-0.05, 0.05)], rng.uniform(-0.5, 0.5, s)])
        if np.linalg.norm(x[1:] - y[1:]) <= abs(x[0] - y[0]):
            y[1:] += 1.0
        out.append(point_field(basis, phi, x) @ point_field(basis, phi, y)
                   + point_field(basis, phi, x) * rng.normal())
    return out


# --- covariance ------------------------------------------------------------


@dataclass
class CovarianceReport:
    alpha: Transformation
    angle: float
    dim_transformed: int
    dim_image: int
    compatibility: float
    intertwining: float
    n_pi: object
    n_alpha_pi: object

    @property
    def passed(self):
        return self.angle <= 1e-6 and self.dim_transformed == self.dim_image


def covariance_check(alpha, P, candidate, seq, basis, ell=1.0, window=None, beta=0.0):
    """Compare N[alpha Pi] with alpha N[Pi] by their maximal principal angle."""
    window = window or default_window(basis.config)
    aP = alpha.on_expression(P)
    probe = seq.tuples[len(seq) // 2]
    compat = compatibility_defect(alpha, P, probe, basis)
    if alpha.kind == "derivative":
        ip = intertwined_projections(alpha, candidate, basis, window)
        rows, arows = [], []
        for x in seq.tuples:
            A = evaluate_product(P, x, basis)
            rows.append(ip.source_coefficients(A))
            arows.append(ip.image_coefficients(evaluate_product(aP, x, basis)))
        rows, arows = np.array(rows), np.array(arows)
        src, tgt, amap = candidate, ip.target, ip.amap
        inter = 0.0
    else:
        amap, tgt = alpha.coefficient_map(candidate, candidate)
        amap = amap.astype(complex)
        proj, _ = _projection(candidate, basis, window)
        rows = _coefficient_rows(proj, P, seq)
        # (alpha Pi)(alpha.x) = alpha(Pi(x)): the transformed product is sampled on the moved points
        arows = np.array([proj.coefficients(evaluate_product(aP, alpha.on_points(x), basis))
                          for x in seq.tuples])
        src = candidate
        # exact symmetries commute with the projection on the candidate
        A = evaluate_product(P, probe, basis)
        inter = float(np.max(np.abs(proj.coefficients(alpha.on_matrix(basis, A))
                                    - amap @ proj.coefficients(A))))
    tail = tail_indices(seq)
    w_src = field_metric(src, basis, ell)
    w_tgt = field_metric(tgt, basis, ell)
    n_pi = extract_from_rows(rows[tail], seq.norms[tail], src, w_src, beta)
    n_api = extract_from_rows(arows[tail], seq.norms[tail], tgt, w_tgt, beta)
    image = orthonormalize(amap @ n_pi.vectors, w_tgt)
    angle = max_angle(n_api.vectors, image, w_tgt) if image.shape[1] and n_api.dimension else (
        0.0 if image.shape[1] == n_api.dimension else np.pi / 2)
    return CovarianceReport(alpha, float(angle), n_api.dimension, image.shape[1], compat, inter,
                            n_pi, n_api)


# --- field equation --------------------------------------------------------


def dispersion_residuals(config):
    _, k, omega = modes(config)
    return -omega**2 + np.sum(k**2, axis=1) + config.m**2


def free_field_equation_check(basis, window=None, mono=None):
    """Windowed norm of (d0^2 - sum_j dj^2 + m^2) applied to ``mono`` (default phi) at 0."""
    cfg = basis.config
    s = cfg.s
    window = window or default_window(cfg)
    mono = mono or WickMonomial.phi(s)
    origin = np.zeros(s + 1)
    terms = [(1.0, 0)] + [(-1.0, j) for j in range(1, s + 1)]
    total = point_field(basis, mono, origin) * cfg.m**2
    for sign, axis in terms:
        img = {mono: 1.0}
        for _ in range(2):
            nxt = {}
            for m, c in img.items():
                for m2, c2 in monomial_derivative(m, axis).items():
                    nxt[m2] = nxt.get(m2, 0) + c * c2
            img = nxt
        for m, c in img.items():
            total = total + point_field(basis, m, origin) * (sign * c)
    return windowed_norm(basis, total, *window)
