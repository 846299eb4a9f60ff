"""Operator product expansion coefficients from dual functionals, residual
decay scans and the comparison of the identity coefficient with the exact
two-point function."""

from dataclasses import dataclass, field

import numpy as np

from . import fock
from .fields import two_point
from .norms import fit_decay
from .products import evaluate_product, point_tuple, safe_window

SLOPE_MARGIN = 0.2
RESIDUAL_FLOOR = 1e-12


def ope_coefficients(P, x, p, basis=None):
    """(c, p(Pi(x))) with c_j = sigma_j(Pi(x))."""
    basis = basis or p.basis
    A = evaluate_product(P, x, basis)
    c = p.coefficients(A)
    return c, p.combine(c)


@dataclass
class OPEFit:
    projection: object
    sequence: object
    coefficients: np.ndarray
    residuals: np.ndarray
    damped_residuals: np.ndarray
    residual_fit: object
    window: tuple
    exact: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def slope(self):
        return float("inf") if self.residual_fit is None else self.residual_fit.slope

    @property
    def r_squared(self):
        return 1.0 if self.residual_fit is None else self.residual_fit.r_squared

    @property
    def beta_achieved(self):
        return self.slope - SLOPE_MARGIN


def residual_norms(basis, D, window, ell):
    """(||Q D Q||, ||R^ell Q D Q R^ell||) for a sparse matrix D."""
    idx = fock.window_indices(basis, *window)
    block = fock.restrict(D, idx)
    d = (1.0 + basis.energies[idx]) ** (-float(ell))
    win = fock.op_norm(block, dense_threshold=max(idx.size, 1))
    damp = fock.op_norm(d[:, None] * block * d[None, :], dense_threshold=max(idx.size, 1))
    return win, damp


def ope_residual_scan(P, seq, p, ell=1.0, window=None):
    """Residuals Pi(x_i) - p(Pi(x_i)) on the safe window along a sequence,
    fitted against ||x_i|| over the sequence's fit window."""
    basis = p.basis
    window = window or safe_window(basis.config, P)
    coeffs, win, damp = [], [], []
    for x in seq.tuples:
        A = evaluate_product(P, x, basis)
        c = p.coefficients(A)
        w, dmp = residual_norms(basis, A - p.combine(c), window, ell)
        coeffs.append(c)
        win.append(w)
        damp.append(dmp)
    coeffs = np.array(coeffs)
    win = np.array(win)
    damp = np.array(damp)
    idx = seq.windowed()
    exact = bool(np.max(win[idx]) <= RESIDUAL_FLOOR)
    fit = None if exact else fit_decay(seq.norms[idx], np.maximum(win[idx], np.finfo(float).tiny))
    return OPEFit(p, seq, coeffs, win, damp, fit, window, exact)


def ope_rows(fit):
    """(i, ||x_i||, d(x_i), windowed residual) table rows for CSV output."""
    seq = fit.sequence
    return [(i, seq.norms[i], seq.distances[i], fit.residuals[i]) for i in range(len(seq))]


@dataclass
class SingularityCheck:
    rows: list
    max_deviation: float
    fit: object


def coefficient_singularity_check(seq, p, window=None):
    """Compare the identity coefficient of phi(x) phi(y) with the two-point
    oracle and fit |c_1| against d(x_i)."""
    from .fields import WickMonomial
    from .products import ProductExpression

    basis = p.basis
    cfg = basis.config
    if p.vacuum_slot is None:
        raise ValueError("projection basis must contain the identity")
    phi = WickMonomial.phi(cfg.s)
    P = ProductExpression.simple(phi, phi, s=cfg.s)
    rows = []
    for i, x in enumerate(seq.tuples):
        c, _ = ope_coefficients(P, x, p)
        x = point_tuple(x)
        c1 = complex(c[p.vacuum_slot])
        ref = two_point(cfg, x[0], x[1])
        rows.append((i, float(seq.norms[i]), float(seq.distances[i]), c1, ref, abs(c1 - ref)))
    dev = max(r[5] for r in rows)
    if window is not None:
        idx = [i for i, r in enumerate(rows) if window[0] <= r[1] <= window[1]]
    else:
        idx = list(seq.windowed())
    mags = np.array([abs(rows[i][3]) for i in idx])
    fit = fit_decay(np.array([rows[i][2] for i in idx]), mags)
    return SingularityCheck(rows, float(dev), fit)
