"""Residuals, linearizations, damped Newton, and the continuity paths.

Both equations are solved for a potential ``phi`` with ``omega_phi =
omega_0 + i d dbar(phi)`` and are driven by the relative eigenvalues
``lam_i`` of ``omega_phi`` against ``chi``:

* J-type: ``sum(1/lam_i) + f / prod(lam_i) - c = 0`` pointwise,
* dHYM:   ``sin(theta0 - sum arctan(1/lam_i)) - f cos(theta0)/prod sqrt(lam_i^2+1) = 0``.

The linearized operators annihilate constants, so each Newton step solves
the mean-zero projection of the linear system with a Krylov iteration
preconditioned by the constant-coefficient Fourier symbol; the component of
the residual outside the numerical range (its volume-weighted mean) is
surfaced as ``multiplier`` instead of silently absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, lgmres

from .errors import (ConeBreachError, ContinuationError, DomainError,
                     EllipticityLostError, NotKahlerError, PreconditionError,
                     UsageError)
from .fields import (FormField, ScalarField, TorusGeometry, _zeta,
                     complex_hessian, hessian_values, mixed_density,
                     relative_spectrum_field)
from .hermitian import ConeSpec

__all__ = [
    "SolverConfig",
    "SolveReport",
    "j_residual",
    "j_linearization_apply",
    "dhym_residual",
    "dhym_linearization_apply",
    "make_j_problem",
    "make_dhym_problem",
    "newton_solve",
    "continuity_path_j",
    "continuity_path_dhym",
]

# relative spectral gap below which eigenvector chain rules are distrusted
DEGENERATE_GAP = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-10
    max_newton: int = 30
    damping: float = 1.0
    path_steps: int = 8
    cone: ConeSpec | None = None
    linear_tol: float = 1e-10
    linear_max_iter: int = 400

    def __post_init__(self):
        if self.tolerance < 1e-12:
            raise UsageError("tolerance must be >= 1e-12")
        if not 0.0 < self.damping <= 1.0:
            raise UsageError("damping must lie in (0, 1]")
        if self.path_steps < 1:
            raise UsageError("path_steps must be >= 1")
        if self.max_newton < 1 or self.linear_max_iter < 1:
            raise UsageError("iteration limits must be positive")


@dataclass
class SolveReport:
    """Outcome of one Newton solve (or the endpoint of a path)."""

    phi: ScalarField
    residual_history: list[float]
    cone_margin_min: float
    c2_diagnostic: float
    c0_diagnostic: float
    multiplier: float
    status: str
    iterations: int
    path_history: list[dict] = dataclass_field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == "converged"

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    def to_json_dict(self, phi_file: str | None = None) -> dict:
        out = {
            "status": self.status,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": self.residual_history,
            "cone_margin_min": self.cone_margin_min,
            "c2_diagnostic": self.c2_diagnostic,
            "c0_diagnostic": self.c0_diagnostic,
            "multiplier": self.multiplier,
            "path_history": self.path_history,
        }
        if phi_file is not None:
            out["phi_file"] = phi_file
        return out


# ---------------------------------------------------------------------------
# pointwise residuals


def _lam_field(chi: FormField, omega0: FormField, phi: ScalarField | None) -> tuple[np.ndarray, np.ndarray]:
    """(relative spectrum field, omega_phi values)."""
    omega = omega0 if phi is None else omega0 + complex_hessian(phi)
    return relative_spectrum_field(chi.values, omega.values), omega.values

def _check_geoms(*objs) -> TorusGeometry:
    geoms = {o.geometry for o in objs if o is not None}
    if len(geoms) != 1:
        raise UsageError("all fields must share one grid")
    return geoms.pop()


def _f_bound_j(n: int, c: float) -> float:
    return -(1.0 / (2.0 * n)) * (1.0 / c) ** (n - 1)


def j_residual(chi: FormField, omega0: FormField, phi: ScalarField,
               f: ScalarField, c: float) -> ScalarField:
    """Pointwise ``tr_{omega_phi}(chi) + f * chi^n/omega_phi^n - c``."""
    geom = _check_geoms(chi, omega0, phi, f)
    n = geom.n
    lam, _ = _lam_field(chi, omega0, phi)
    if float(np.min(lam[..., 0])) <= 0.0:
        idx = np.unravel_index(int(np.argmin(lam[..., 0])), geom.shape)
        raise NotKahlerError(f"omega_phi not positive at {idx}", grid_index=idx)
    fb = _f_bound_j(n, c)
    if float(np.min(f.values)) <= fb:
        raise DomainError(f"f must exceed -(1/2n)(1/c)^(n-1) = {fb:.3e} pointwise")
    vals = np.sum(1.0 / lam, axis=-1) + f.values / np.prod(lam, axis=-1) - c
    return ScalarField(geom, vals)


def _inv_herm(m: np.ndarray) -> np.ndarray:
    """Batched inverse of small Hermitian matrices (closed form for n <= 2)."""
    n = m.shape[-1]
    if n == 1:
        return 1.0 / m
    if n == 2:
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        out = np.empty(np.broadcast_shapes(m.shape), dtype=complex)
        out[..., 0, 0] = m[..., 1, 1] / det
        out[..., 1, 1] = m[..., 0, 0] / det
        out[..., 0, 1] = -m[..., 0, 1] / det
        out[..., 1, 0] = -m[..., 1, 0] / det
        return out
    return np.linalg.inv(m)


def _j_coefficient(chi_vals: np.ndarray, omega_vals: np.ndarray, lam: np.ndarray,
                   f_vals: np.ndarray) -> np.ndarray:
    """Hermitian coefficient W with d(residual)(u) = -tr(W * Hess(u))."""
    gi = _inv_herm(omega_vals)
    q = f_vals / np.prod(lam, axis=-1)  # f * chi^n / omega^n
    W = gi @ np.ascontiguousarray(chi_vals) @ gi + q[..., None, None] * gi
    return 0.5 * (W + W.conj().swapaxes(-1, -2))


def _tr_m_hessian(geom: TorusGeometry, M: np.ndarray, phat: np.ndarray) -> np.ndarray:
    """``tr(M Hess u)`` from the FFT of u, without materializing the Hessian."""
    from .fields import _axis_laplace
    zeta = _zeta(geom)
    lap = _axis_laplace(geom)
    n = geom.n
    out = None
    for i in range(n):
        e = sfft.ifftn(-lap[i] * phat, workers=-1).real
        term = M[..., i, i].real * e
        out = term if out is None else out + term
        for j in range(i + 1, n):
            # entry (j, i) of the Hessian has multiplier -zeta_j * conj(zeta_i)
            e = sfft.ifftn(-zeta[j] * np.conj(zeta[i]) * phat, workers=-1)
            mij = M[..., i, j]
            out += 2.0 * (mij.real * e.real - mij.imag * e.imag)
    return out


def j_linearization_apply(chi: FormField, omega0: FormField, phi: ScalarField,
                          f: ScalarField, u: ScalarField,
                          c: float | None = None) -> ScalarField:
    """Directional derivative of :func:`j_residual` at ``phi`` along ``u``.

    Elliptic (definite Fourier symbol) exactly when the coefficient is
    positive, which the strict c-subsolution condition guarantees; ``c``
    enables the explicit cone check when provided.
    """
    geom = _check_geoms(chi, omega0, phi, f, u)
    lam, omega_vals = _lam_field(chi, omega0, phi)
    if c is not None:
        loo = np.sum(1.0 / lam, axis=-1) - 1.0 / lam[..., -1]
        if float(np.max(loo)) >= c:
            raise EllipticityLostError("iterate is not a strict c-subsolution")
    W = _j_coefficient(chi.values, omega_vals, lam, f.values)
    from .fields import min_eigenvalue_field
    if float(np.min(min_eigenvalue_field(W))) <= 0.0:
        raise EllipticityLostError("linearized coefficient lost positivity")
    H = hessian_values(u)
    vals = -np.einsum("...ij,...ji->...", W, H).real
    return ScalarField(geom, vals)


def dhym_residual(chi: FormField, omega0: FormField, phi: ScalarField,
                  f: ScalarField, theta0: float, form: str = "angle") -> ScalarField:
    """Pointwise dHYM defect.

    ``form='angle'`` evaluates through the relative spectrum; ``form='wedge'``
    evaluates independently through the complex determinant of
    ``omega_phi + i*chi`` (imaginary/real parts of the top wedge).  The two
    agree identically up to rounding.
    """
    geom = _check_geoms(chi, omega0, phi, f)
    n = geom.n
    theta0 = float(theta0)
    if not 0.0 < theta0 < math.pi / 4:
        raise DomainError("theta0 must lie in (0, pi/4)")
    if float(np.min(f.values)) <= -1.0 / (100.0 * n):
        raise DomainError(f"f must exceed -1/(100n) = {-1.0 / (100.0 * n):.3e} pointwise")
    omega = omega0 + complex_hessian(phi)
    if form == "wedge":
        det = np.linalg.det(omega.values + 1j * chi.values)
        det_chi = np.linalg.det(chi.values).real
        vals = -math.cos(theta0) * (det.imag + f.values * det_chi
                                    - math.tan(theta0) * det.real) / np.abs(det)
        return ScalarField(geom, vals)
    if form != "angle":
        raise UsageError("form must be 'angle' or 'wedge'")
    lam = relative_spectrum_field(chi.values, omega.values)
    if float(np.min(lam[..., 0])) <= 0.0:
        idx = np.unravel_index(int(np.argmin(lam[..., 0])), geom.shape)
        raise NotKahlerError(f"omega_phi not positive at {idx}", grid_index=idx)
    s = np.sum(np.arctan(1.0 / lam), axis=-1)
    r = np.prod(np.sqrt(lam * lam + 1.0), axis=-1)
    vals = np.sin(theta0 - s) - f.values * math.cos(theta0) / r
    return ScalarField(geom, vals)


def _generalized_eig(chi: FormField, omega_vals: np.ndarray):
    """Pointwise (lam, V) with ``omega V = chi V diag(lam)`` and ``V^H chi V = I``."""
    n = chi.geometry.n
    if n == 1:
        lam = (omega_vals[..., 0, 0].real / chi.values[..., 0, 0].real)[..., None]
        V = (1.0 / np.sqrt(chi.values[..., 0, 0].real))[..., None, None].astype(complex)
        return lam, V
    if chi.potential is None:
        L = np.linalg.cholesky(chi.base)
        Linv = np.linalg.inv(L)
    else:
        Linv = np.linalg.inv(np.linalg.cholesky(chi.values))
    reduced = Linv @ omega_vals @ Linv.conj().swapaxes(-1, -2)
    lam, U = np.linalg.eigh(reduced)
    V = Linv.conj().swapaxes(-1, -2) @ U
    return lam, V


def _dhym_grad_weights(lam: np.ndarray, f_vals: np.ndarray, theta0: float) -> np.ndarray:
    s = np.sum(np.arctan(1.0 / lam), axis=-1, keepdims=True)
    r = np.prod(np.sqrt(lam * lam + 1.0), axis=-1, keepdims=True)
    g = f_vals[..., None] * math.cos(theta0) / r
    return np.cos(theta0 - s) / (lam * lam + 1.0) + g * lam / (lam * lam + 1.0)


def dhym_linearization_apply(chi: FormField, omega0: FormField, phi: ScalarField,
                             f: ScalarField, theta0: float, u: ScalarField) -> ScalarField:
    """Directional derivative of :func:`dhym_residual` at ``phi`` along ``u``.

    Differentiates through the spectrum with first-order eigenvalue
    perturbation; falls back to central differences of the residual when the
    relative spectral gap drops below ``1e-9``.
    """
    geom = _check_geoms(chi, omega0, phi, f, u)
    omega = omega0 + complex_hessian(phi)
    lam, V = _generalized_eig(chi, omega.values)
    if _min_relative_gap(lam) < DEGENERATE_GAP:
        h = 1e-6 * (1.0 + phi.sup_norm()) / max(u.sup_norm(), 1e-30)
        rp = dhym_residual(chi, omega0, phi + h * u, f, theta0)
        rm = dhym_residual(chi, omega0, phi - h * u, f, theta0)
        return ScalarField(geom, (rp.values - rm.values) / (2.0 * h))
    w = _dhym_grad_weights(lam, f.values, theta0)
    M = np.einsum("...ik,...k,...jk->...ij", V, w.astype(complex), np.conj(V))
    H = hessian_values(u)
    vals = np.einsum("...ij,...ji->...", M, H).real
    return ScalarField(geom, vals)


def _min_relative_gap(lam: np.ndarray) -> float:
    if lam.shape[-1] == 1:
        return math.inf
    gaps = np.diff(lam, axis=-1)
    scale = np.maximum(1.0, lam[..., -1:])
    return float(np.min(gaps / scale))


# ---------------------------------------------------------------------------
# Newton problems

@dataclass
class _Eval:
    phi: ScalarField
    omega_vals: np.ndarray
    lam: np.ndarray
    kahler_margin: float
    cone_margin: float
    residual: np.ndarray | None
    weight: np.ndarray | None


@dataclass
class _NewtonProblem:
    """Bundle of closures consumed by :func:`newton_solve`."""

    kind: str
    geometry: TorusGeometry
    evaluate: Callable[[ScalarField, bool], _Eval]
    linear_coefficient: Callable[[_Eval], tuple]
    gauge_weight: np.ndarray
    describe: str = ""
    meta: dict = dataclass_field(default_factory=dict)


def make_j_problem(chi: FormField, omega0: FormField, f: ScalarField,
                   c: float) -> _NewtonProblem:
    geom = _check_geoms(chi, omega0, f)
    n = geom.n
    c = float(c)
    if c <= 0.0:
        raise UsageError("c must be positive")
    fb = _f_bound_j(n, c)
    if float(np.min(f.values)) <= fb:
        raise DomainError(f"f must exceed {fb:.6e} pointwise")
    det_chi = np.linalg.det(chi.values).real
    gauge = mixed_density([omega0.values] * n)

    def evaluate(phi: ScalarField, with_residual: bool = True) -> _Eval:
        lam, omega_vals = _lam_field(chi, omega0, phi)
        kahler = float(np.min(lam[..., 0]))
        recip = 1.0 / np.maximum(lam, 1e-300)
        loo = np.sum(recip, axis=-1) - recip[..., -1]
        cone = c - float(np.max(loo))
        res = weight = None
        if with_residual and kahler > 0.0:
            prod = np.prod(lam, axis=-1)
            res = np.sum(recip, axis=-1) + f.values / prod - c
            weight = det_chi * prod
        return _Eval(phi, omega_vals, lam, kahler, cone, res, weight)

    def linear_coefficient(ev: _Eval):
        W = _j_coefficient(chi.values, ev.omega_vals, ev.lam, f.values)
        return W, -1.0, None  # d(residual)(u) = sign * tr(W Hess u)

    return _NewtonProblem("J", geom, evaluate, linear_coefficient, gauge,
                          describe=f"J equation, c = {c:.6g}")


def make_dhym_problem(chi: FormField, omega0: FormField, f: ScalarField,
                      theta0: float) -> _NewtonProblem:
    geom = _check_geoms(chi, omega0, f)
    n = geom.n
    theta0 = float(theta0)
    if not 0.0 < theta0 < math.pi / 4:
        raise DomainError("theta0 must lie in (0, pi/4)")
    if float(np.min(f.values)) <= -1.0 / (100.0 * n):
        raise DomainError("f must exceed -1/(100n) pointwise")
    det_chi = np.linalg.det(chi.values).real
    gauge = mixed_density([omega0.values] * n)
    cos0 = math.cos(theta0)

    def evaluate(phi: ScalarField, with_residual: bool = True) -> _Eval:
        lam, omega_vals = _lam_field(chi, omega0, phi)
        kahler = float(np.min(lam[..., 0]))
        res = weight = None
        if kahler <= 0.0:
            return _Eval(phi, omega_vals, lam, kahler, -math.inf, None, None)
        terms = np.arctan(1.0 / lam)
        loo = np.sum(terms, axis=-1) - terms[..., -1]
        cone = theta0 - float(np.max(loo))
        if with_residual:
            r = np.prod(np.sqrt(lam * lam + 1.0), axis=-1)
            s = np.sum(terms, axis=-1)
            res = np.sin(theta0 - s) - f.values * cos0 / r
            weight = det_chi * r
        return _Eval(phi, omega_vals, lam, kahler, cone, res, weight)

    def linear_coefficient(ev: _Eval):
        # The spectral-projector form sum_i w_i v_i v_i^H is stable through
        # eigenvalue crossings (the weights coincide on clusters), so no
        # finite-difference fallback is needed inside the Newton loop.
        lam, V = _generalized_eig(chi, ev.omega_vals)
        w = _dhym_grad_weights(lam, f.values, theta0)
        M = np.einsum("...ik,...k,...jk->...ij", V, w.astype(complex), np.conj(V))
        return 0.5 * (M + M.conj().swapaxes(-1, -2)), 1.0, None

    return _NewtonProblem("dHYM", geom, evaluate, linear_coefficient, gauge,
                          describe=f"dHYM equation, theta0 = {theta0:.6g}")


# ---------------------------------------------------------------------------
# linear solve machinery


def _symbol(geom: TorusGeometry, Mbar: np.ndarray) -> np.ndarray:
    """Fourier symbol of ``u -> -tr(Mbar Hess u)``; positive away from the mean."""
    from .fields import _axis_laplace
    zeta = _zeta(geom)
    lap = _axis_laplace(geom)
    n = geom.n
    sym = np.zeros(geom.shape)
    for i in range(n):
        sym += Mbar[i, i].real * lap[i]
        for j in range(n):
            if j != i:
                sym += (Mbar[i, j] * zeta[j] * np.conj(zeta[i])).real
    return sym


def _solve_linear(geom: TorusGeometry, apply_tr: Callable[[np.ndarray], np.ndarray],
                  rhs: np.ndarray, Mbar: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Solve ``tr(M Hess u) = rhs`` on mean-zero functions.

    ``apply_tr`` maps grid values of u to grid values of ``tr(M Hess u)``;
    the Fourier symbol of the mean coefficient preconditions the iteration.
    """
    G = geom.grid_size
    shape = geom.shape
    sym = _symbol(geom, Mbar)
    # zero symbol = modes the discrete operator annihilates (mean, Nyquist);
    # the preconditioner suppresses them and the projection handles the mean
    scale = float(np.max(np.abs(sym)))
    dead = np.abs(sym) <= 1e-14 * max(scale, 1.0)
    sym_safe = np.where(dead, 1.0, sym)

    def matvec(v):
        v = v.reshape(shape)
        v = v - v.mean()
        out = apply_tr(v)
        out = out - out.mean()
        return out.reshape(-1)

    def precond(v):
        vhat = sfft.fftn(v.reshape(shape), workers=-1)
        # symbol of tr(M Hess) is -<zeta, M zeta>
        vhat = np.where(dead, 0.0, vhat / (-sym_safe))
        out = sfft.ifftn(vhat, workers=-1).real
        return (out - out.mean()).reshape(-1)

    # drop unresolvable (annihilated-mode) content from the right-hand side;
    # it is quadrature junk and would otherwise stall the Krylov iteration
    bhat = np.where(dead, 0.0, sfft.fftn(rhs, workers=-1))
    b = sfft.ifftn(bhat, workers=-1).real.reshape(-1)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(shape)
    A = LinearOperator((G, G), matvec=matvec, dtype=float)
    M = LinearOperator((G, G), matvec=precond, dtype=float)
    x, info = lgmres(A, b, M=M, rtol=config.linear_tol, atol=0.0,
                     maxiter=config.linear_max_iter, inner_m=30)
    u = x.reshape(shape)
    return u - u.mean()


def _weighted_mean(values: np.ndarray, weight: np.ndarray) -> float:
    return float(np.sum(values * weight) / np.sum(weight))


def newton_solve(problem: _NewtonProblem, phi0: ScalarField,
                 config: SolverConfig) -> SolveReport:
    """Damped Newton with cone clamping and solvability projection.

    Every accepted iterate stays strictly inside the cone (positivity plus
    the strict subsolution margin, deepened by ``config.cone.slack`` when
    given); violations trigger step halving, and 30 failed halvings raise
    :class:`ConeBreachError`.  Success requires the sup-norm residual below
    ``tolerance``, the projection magnitude below ``10 * tolerance`` and a
    final cone margin above ``tolerance``.
    """
    geom = problem.geometry
    slack = config.cone.slack if config.cone is not None else 0.0
    ev = problem.evaluate(phi0, True)
    if ev.kahler_margin <= 0.0 or ev.cone_margin <= slack:
        raise ConeBreachError(
            f"initial iterate outside the cone (kahler margin {ev.kahler_margin:.3e}, "
            f"cone margin {ev.cone_margin:.3e}, required slack {slack:.3e})")
    history = [float(np.max(np.abs(ev.residual)))]
    margin_min = ev.cone_margin
    multiplier = abs(_weighted_mean(ev.residual, ev.weight))
    gauge = problem.gauge_weight
    iterations = 0
    status = None
    while True:
        if history[-1] <= config.tolerance and multiplier <= 10.0 * config.tolerance:
            status = "converged" if ev.cone_margin > config.tolerance else "marginal-cone"
            break
        if iterations >= config.max_newton:
            status = "no-convergence"
            break
        Mfield, sign, fallback = problem.linear_coefficient(ev)
        if fallback is None:
            Mbar = np.mean(Mfield.reshape(-1, geom.n, geom.n), axis=0)

            def apply_tr(v, _M=Mfield):
                return _tr_m_hessian(geom, _M, sfft.fftn(v, workers=-1))
        else:
            fd_apply, Mbar = fallback

            def apply_tr(v, _fd=fd_apply):
                return _fd(ScalarField(geom, v))
        # Newton step: sign * tr(M Hess u) = -residual
        rhs = -sign * ev.residual
        u = _solve_linear(geom, apply_tr, rhs, Mbar, config)
        u = u - _weighted_mean(u, gauge)  # mean-zero gauge against omega_0^n
        step = ScalarField(geom, u)
        alpha = config.damping
        accepted = None
        for _ in range(30):
            cand = ScalarField(geom, ev.phi.values + alpha * step.values)
            ev_cand = problem.evaluate(cand, True)
            if ev_cand.kahler_margin > 0.0 and ev_cand.cone_margin > slack:
                accepted = ev_cand
                break
            alpha *= 0.5
        if accepted is None:
            report = _build_report(problem, ev, history, margin_min, multiplier,
                                   "cone-breach", iterations)
            raise ConeBreachError("step halving exhausted without re-entering the cone",
                                  report=report)
        ev = accepted
        iterations += 1
        history.append(float(np.max(np.abs(ev.residual))))
        margin_min = min(margin_min, ev.cone_margin)
        multiplier = abs(_weighted_mean(ev.residual, ev.weight))
    return _build_report(problem, ev, history, margin_min, multiplier, status, iterations)


def _build_report(problem: _NewtonProblem, ev: _Eval, history, margin_min,
                  multiplier, status, iterations) -> SolveReport:
    c2 = float(np.max(np.sum(ev.lam, axis=-1)))
    c0 = ev.phi.oscillation()
    return SolveReport(phi=ev.phi, residual_history=[float(h) for h in history],
                       cone_margin_min=float(margin_min), c2_diagnostic=c2,
                       c0_diagnostic=c0, multiplier=float(multiplier),
                       status=status, iterations=iterations)


# ---------------------------------------------------------------------------
# continuity paths


def _march(make_problem, phi: ScalarField, config: SolverConfig, t_start: float,
           targets, stage: str, history: list) -> tuple[ScalarField, SolveReport]:
    """Warm-started marching with bisection on step failure (8 refinements)."""
    pending = [(float(t), 0) for t in targets]
    t_prev = float(t_start)
    report = None
    while pending:
        t, depth = pending[0]
        problem = make_problem(t)
        failure = None
        try:
            report = newton_solve(problem, phi, config)
            if not report.success:
                failure = report.status
        except ConeBreachError as exc:
            failure = "cone-breach"
            report = exc.report
        if failure is not None:
            if depth >= 8:
                raise ContinuationError(
                    f"stage {stage} failed at t = {t:.6g} ({failure})",
                    stage=stage, t=t, cause=failure, report=report)
            pending.insert(0, (0.5 * (t_prev + t), depth + 1))
            continue
        phi = report.phi
        history.append({
            "stage": stage, "t": t, "iterations": report.iterations,
            "residual": report.final_residual, "cone_margin": report.cone_margin_min,
            "multiplier": report.multiplier,
        })
        t_prev = t
        pending.pop(0)
    return phi, report


def continuity_path_j(chi: FormField, omega0: FormField, f_target: ScalarField,
                      c: float, config: SolverConfig) -> SolveReport:
    """Two-stage continuity method for the J-type equation.

    Stage 1 tilts the reference form from ``(c/n) * omega0`` to ``chi`` with
    the constant right-hand side recomputed from the integrability identity
    at each step; stage 2 interpolates that constant to the target ``f``.
    """
    geom = _check_geoms(chi, omega0, f_target)
    n = geom.n
    c = float(c)
    if c <= 0.0:
        raise UsageError("c must be positive")
    vol_omega = float(np.mean(mixed_density([omega0.values] * n))) / math.factorial(n)
    cross = float(np.mean(mixed_density([chi.values] + [omega0.values] * (n - 1)))) \
        / math.factorial(n - 1)
    rhs_int = c * vol_omega - cross
    scale = max(1.0, abs(c) * vol_omega)
    if rhs_int < -1e-10 * scale:
        raise PreconditionError(
            f"integrability sign fails: c*int(omega0^n)/n! - int(chi^omega0^(n-1))/(n-1)! "
            f"= {rhs_int:.6e} < 0")
    det_chi = np.linalg.det(chi.values).real
    f_int = float(np.mean(f_target.values * det_chi))
    if abs(f_int - rhs_int) > 1e-8 * scale:
        raise PreconditionError(
            f"integrability identity fails: int(f chi^n)/n! = {f_int:.10e} but the "
            f"class data require {rhs_int:.10e}")
    fb = _f_bound_j(n, c)
    if float(np.min(f_target.values)) <= fb:
        raise PreconditionError(f"target f must exceed {fb:.6e} pointwise")

    history: list[dict] = []
    phi = ScalarField.zeros(geom)

    def stage1_problem(t: float):
        chi_t = t * chi + (1.0 - t) * (c / n) * omega0
        det_chi_t = np.mean(mixed_density([chi_t.values] * n))
        f_t_val = t * rhs_int * math.factorial(n) / float(det_chi_t)
        f_t = ScalarField.constant(geom, f_t_val)
        return make_j_problem(chi_t, omega0, f_t, c)

    targets1 = np.linspace(0.0, 1.0, config.path_steps + 1)[1:]
    phi, report = _march(stage1_problem, phi, config, 0.0, targets1, "j-stage1", history)

    f1_val = rhs_int * math.factorial(n) / float(np.mean(mixed_density([chi.values] * n)))

    def stage2_problem(s: float):
        f_s = ScalarField(geom, (1.0 - s) * f1_val + s * f_target.values)
        return make_j_problem(chi, omega0, f_s, c)

    targets2 = np.linspace(0.0, 1.0, config.path_steps + 1)[1:]
    phi, report = _march(stage2_problem, phi, config, 0.0, targets2, "j-stage2", history)
    report.path_history = history
    return report


def continuity_path_dhym(chi: FormField, omega0_target: FormField,
                         f_target: ScalarField, theta0: float,
                         config: SolverConfig) -> SolveReport:
    """Three-stage continuity method for the dHYM equation.

    Starts at the exactly solvable ``omega0 = cot(theta0/n) * chi, f = 0``,
    tilts to an enlarged multiple of the target form, scales that multiple
    back down to 1, then interpolates the constant right-hand side to the
    target ``f``.  The constant along stages 1-2 comes from the
    integrability identity and stays non-negative.
    """
    geom = _check_geoms(chi, omega0_target, f_target)
    n = geom.n
    theta0 = float(theta0)
    if not 0.0 < theta0 < math.pi / 4:
        raise PreconditionError("theta0 must lie in (0, pi/4)")
    lam0 = relative_spectrum_field(chi.values, omega0_target.values)
    terms = np.arctan(1.0 / lam0)
    loo = np.sum(terms, axis=-1) - terms[..., -1]
    gamma_margin = theta0 - float(np.max(loo))
    if gamma_margin <= 0.0:
        raise PreconditionError(
            f"omega0 target violates the subsolution hypothesis "
            f"(Gamma margin {gamma_margin:.3e})")
    det_chi = np.linalg.det(chi.values).real
    vol_chi = float(np.mean(det_chi))

    def integrability_const(omega_form: FormField) -> float:
        det = np.linalg.det(omega_form.values + 1j * chi.values)
        return float(np.mean(math.tan(theta0) * det.real - det.imag) / vol_chi)

    rhs_target = integrability_const(omega0_target)
    scale = max(1.0, abs(rhs_target))
    if rhs_target < -1e-10 * scale:
        raise PreconditionError(f"integrability sign fails: {rhs_target:.6e} < 0")
    f_int = float(np.mean(f_target.values * det_chi)) / vol_chi
    if abs(f_int - rhs_target) > 1e-8 * scale:
        raise PreconditionError(
            f"integrability identity fails: int(f chi^n) gives {f_int:.10e}, class "
            f"data require {rhs_target:.10e}")
    if float(np.min(f_target.values)) <= -1.0 / (100.0 * n):
        raise PreconditionError("target f must exceed -1/(100n) pointwise")

    cot_n = 1.0 / math.tan(theta0 / n)
    c51 = float(np.min(lam0[..., 0]))
    kappa = cot_n / c51 + 1.0

    history: list[dict] = []
    phi = ScalarField.zeros(geom)

    def stage1_problem(t: float):
        omega_t = t * cot_n * chi + (1.0 - t) * kappa * omega0_target
        f_t = ScalarField.constant(geom, integrability_const(omega_t))
        return make_dhym_problem(chi, omega_t, f_t, theta0)

    targets1 = np.linspace(1.0, 0.0, config.path_steps + 1)[1:]
    phi, report = _march(stage1_problem, phi, config, 1.0, targets1, "dhym-stage1", history)

    def stage2_problem(t: float):
        omega_t = t * omega0_target
        f_t = ScalarField.constant(geom, integrability_const(omega_t))
        return make_dhym_problem(chi, omega_t, f_t, theta0)

    targets2 = np.linspace(kappa, 1.0, config.path_steps + 1)[1:]
    phi, report = _march(stage2_problem, phi, config, kappa, targets2, "dhym-stage2", history)

    f0_val = integrability_const(omega0_target)

    def stage3_problem(s: float):
        f_s = ScalarField(geom, (1.0 - s) * f0_val + s * f_target.values)
        return make_dhym_problem(chi, omega0_target, f_s, theta0)

    targets3 = np.linspace(0.0, 1.0, config.path_steps + 1)[1:]
    phi, report = _march(stage3_problem, phi, config, 0.0, targets3, "dhym-stage3", history)
    report.path_history = history
    return report
