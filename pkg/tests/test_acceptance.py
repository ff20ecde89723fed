"""Acceptance suite: one test per criterion, each printing a pass/fail line.

All tolerances are pinned here; nothing is deferred to calibration.  Run
with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.
"""

import itertools
import math
import time

import numpy as np
import pytest

from jdhym.errors import (BranchUndefinedError, ConeBreachError,
                          ContinuationError, PreconditionError)
from jdhym.fields import (ScalarField, TorusGeometry, complex_hessian,
                          constant_form, field_from_modes, form_field,
                          mixed_density, random_bandlimited,
                          relative_spectrum_field)
from jdhym.functionals import (aubin_i, compute_c0, j_chi_derivative,
                               j_chi_functional, j_omega0_functional)
from jdhym.hermitian import ConeSpec, SpectrumRel, cone_test_j
from jdhym.properties import (fuzz_schur_arctan, fuzz_schur_trace,
                              suite_boundary_negative, suite_gradient_fd,
                              suite_gradient_ordering,
                              suite_gradient_positivity,
                              suite_hessian_zero_slice)
from jdhym.solver import (SolverConfig, continuity_path_dhym,
                          continuity_path_j, dhym_residual, make_j_problem,
                          newton_solve)
from jdhym.stability import (IntersectionData, angle_branch,
                             branch_polynomial, coordinate_subtorus_data,
                             max_uniform_epsilon, slope_test)


def report(number, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, f"criterion {number}: {detail}"


def test_criterion_01_schur_trace_fuzz():
    t0 = time.monotonic()
    res = fuzz_schur_trace(10_000, np.random.default_rng(101), max_block=5)
    elapsed = time.monotonic() - t0
    ok = res["worst_slack"] >= -1e-10 and elapsed < 60.0
    report(1, ok, f"trace subadditivity, 10000 blocks, worst slack "
                  f"{res['worst_slack']:.3e}, {elapsed:.1f}s")


def test_criterion_02_schur_arctan_fuzz():
    t0 = time.monotonic()
    res = fuzz_schur_arctan(10_000, np.random.default_rng(102), max_block=5)
    elapsed = time.monotonic() - t0
    ok = res["worst_slack"] >= -1e-10 and elapsed < 60.0
    report(2, ok, f"arctan subadditivity, 10000 blocks > I, worst slack "
                  f"{res['worst_slack']:.3e}, {elapsed:.1f}s")


def test_criterion_03_gradient_suite():
    rng = np.random.default_rng(103)
    pos = suite_gradient_positivity(1000, rng)
    order = suite_gradient_ordering(1000, rng)
    fd = suite_gradient_fd(1000, rng)
    hess = suite_hessian_zero_slice(1000, rng)
    bound = suite_boundary_negative(1000, rng)
    ok = all(r["holds"] for r in (pos, order, fd, hess, bound))
    report(3, ok, "1000-point gradient/Hessian/boundary suite: "
                  f"min grad {pos['worst_slack']:.2e}, fd slack {fd['worst_slack']:.2e}, "
                  f"hessian slack {hess['worst_slack']:.2e}, boundary {bound['worst_slack']:.2e}")


def test_criterion_04_cone_oracle():
    rng = np.random.default_rng(104)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        vals = tuple(sorted(rng.uniform(0.1, 6.0, size=n)))
        spec = SpectrumRel(vals)
        p = int(rng.integers(1, n + 1))
        c = float(rng.uniform(0.2, 14.0))
        slack = float(rng.uniform(0.0, 0.4))
        bound = c - (n - p) * slack
        worst = max(float(np.sum(np.sort(1.0 / np.asarray(vals))[::-1][list(idx)]))
                    for idx in itertools.combinations(range(n), p))
        if cone_test_j(spec, ConeSpec.j(c, slack), p) != (worst <= bound):
            mismatches += 1
    report(4, mismatches == 0,
           f"cone test vs exhaustive subset enumeration, 1000 draws, "
           f"{mismatches} mismatches")


def _manufacture_j(geom):
    if geom.n == 1:
        chi = form_field(geom, np.array([[1.2]]),
                         field_from_modes(geom, [((1, 0), 0.03), ((0, 1), 0.02)]))
        omega0 = form_field(geom, np.array([[1.0]]),
                            field_from_modes(geom, [((0, 2), 0.005)]))
        phistar = field_from_modes(geom, [((1, 0), 0.02), ((0, 1), 0.014),
                                          ((1, 1), 0.006)])
    else:
        chi = form_field(geom, np.array([[1.0, 0.1 + 0.05j], [0.1 - 0.05j, 1.5]]),
                         field_from_modes(geom, [((1, 0, 0, 0), 0.02),
                                                 ((0, 0, 1, 0), 0.015)]))
        omega0 = form_field(geom, np.eye(2),
                            field_from_modes(geom, [((0, 1, 0, 0), 0.01)]))
        phistar = field_from_modes(geom, [((1, 0, 0, 0), 0.008), ((0, 0, 0, 1), 0.006),
                                          ((1, 0, 1, 0), 0.004)])
    omega_star = omega0 + complex_hessian(phistar)
    lam = relative_spectrum_field(chi.values, omega_star.values)
    tr = np.sum(1.0 / lam, axis=-1)
    c = float(np.max(tr)) * 1.15
    f = ScalarField(geom, (c - tr) * np.prod(lam, axis=-1))
    return chi, omega0, phistar, f, c


@pytest.mark.parametrize("n,N", [(1, 64), (2, 32)])
def test_criterion_05_manufactured_solves(n, N):
    geom = TorusGeometry(n, N)
    chi, omega0, phistar, f, c = _manufacture_j(geom)
    t0 = time.monotonic()
    rep = newton_solve(make_j_problem(chi, omega0, f, c), ScalarField.zeros(geom),
                       SolverConfig(tolerance=1e-10))
    elapsed = time.monotonic() - t0
    d = rep.phi.values - phistar.values
    d -= d.mean()
    recovery = float(np.max(np.abs(d)))
    ok = (rep.success and rep.final_residual <= 1e-9 and rep.iterations <= 15
          and recovery <= 1e-7 and elapsed < 120.0)
    report(5, ok, f"manufactured n={n} N={N}: residual {rep.final_residual:.2e} "
                  f"in {rep.iterations} iterations, recovery {recovery:.2e}, "
                  f"{elapsed:.1f}s")


def test_criterion_06_continuity_path_fidelity():
    geom = TorusGeometry(2, 16)
    chi = constant_form(geom, np.diag([1.0, 2.0]))
    omega0 = constant_form(geom, np.eye(2))
    c0 = compute_c0(chi, omega0)
    f_target = field_from_modes(geom, [((1, 0, 0, 0), 0.05)])
    cfg = SolverConfig(path_steps=4, tolerance=1e-11, linear_tol=1e-10)
    rep = continuity_path_j(chi, omega0, f_target, c0, cfg)
    cold = newton_solve(make_j_problem(chi, omega0, f_target, c0),
                        ScalarField.zeros(geom), cfg)
    d = rep.phi.values - cold.phi.values
    d -= d.mean()
    agreement = float(np.max(np.abs(d)))
    margins_ok = all(h["cone_margin"] > 0.0 for h in rep.path_history)
    mult_ok = all(h["multiplier"] <= 10.0 * cfg.linear_tol for h in rep.path_history)
    ok = rep.success and agreement <= 1e-7 and margins_ok and mult_ok
    report(6, ok, f"path endpoint vs cold start {agreement:.2e}, margins "
                  f"{'all positive' if margins_ok else 'BROKEN'}, worst multiplier "
                  f"{max(h['multiplier'] for h in rep.path_history):.2e}")


def test_criterion_07_dhym():
    # (a) trivial start is recognized as exact
    geom = TorusGeometry(2, 16)
    theta0 = math.pi / 5
    chi = form_field(geom, np.eye(2), field_from_modes(geom, [((1, 0, 0, 0), 0.03)]))
    omega_triv = (1.0 / math.tan(theta0 / 2)) * chi
    r0 = dhym_residual(chi, omega_triv, ScalarField.zeros(geom),
                       ScalarField.zeros(geom), theta0).sup_norm()

    # (b) n = 1 instance against the per-point scalar root-finding oracle
    from scipy.optimize import brentq
    import scipy.fft as sfft
    from jdhym.fields import _axis_laplace
    g1 = TorusGeometry(1, 64)
    chi1 = form_field(g1, np.array([[1.0]]), field_from_modes(g1, [((1, 0), 0.04)]))
    om1 = form_field(g1, np.array([[3.4]]), field_from_modes(g1, [((0, 1), 0.05)]))
    det_chi = chi1.values[..., 0, 0].real
    rhs = math.tan(theta0) * float(np.mean(om1.values[..., 0, 0].real)) \
        - float(np.mean(det_chi))
    shape = field_from_modes(g1, [((1, 0), 0.3)]) + 1.0
    alpha = rhs / float(np.mean(shape.values * det_chi))
    f1 = ScalarField(g1, alpha * shape.values)
    rep1 = continuity_path_dhym(chi1, om1, f1, theta0,
                                SolverConfig(path_steps=4, tolerance=1e-11))
    lam_star = np.empty(g1.shape)
    def fval(lam, fx):
        return (math.sin(theta0 - math.atan2(1.0, lam))
                - fx * math.cos(theta0) / math.sqrt(lam * lam + 1.0))
    for idx in np.ndindex(g1.shape):
        lam_star[idx] = brentq(fval, 1e-8, 1e8, args=(float(f1.values[idx]),),
                               xtol=1e-15, rtol=8.9e-16)
    target_h = det_chi * lam_star - om1.values[..., 0, 0].real
    lap = _axis_laplace(g1)[0]
    hhat = sfft.fftn(target_h)
    phihat = np.where(lap == 0, 0.0, hhat / np.where(lap == 0, 1.0, -lap))
    phi_oracle = sfft.ifftn(phihat).real
    d1 = rep1.phi.values - phi_oracle
    d1 -= d1.mean()
    oracle_err = float(np.max(np.abs(d1)))

    # (c) n = 2 instance with f = 0: pointwise angle identity at the solution
    s = (1.0 + math.cos(theta0)) / math.sin(theta0)  # cot(theta0/2)
    chi2 = constant_form(geom, np.eye(2))
    psi = field_from_modes(geom, [((1, 0, 0, 0), 0.05), ((0, 0, 0, 1), 0.03)])
    om2 = form_field(geom, s * np.eye(2), psi)
    rep2 = continuity_path_dhym(chi2, om2, ScalarField.zeros(geom), theta0,
                                SolverConfig(path_steps=4, tolerance=1e-11))
    lam2 = relative_spectrum_field(chi2.values,
                                   (om2 + complex_hessian(rep2.phi)).values)
    angle_dev = float(np.max(np.abs(np.sum(np.arctan(1.0 / lam2), axis=-1) - theta0)))

    ok = (r0 <= 1e-12 and rep1.success and oracle_err <= 1e-9
          and rep2.success and angle_dev <= 1e-8)
    report(7, ok, f"trivial start {r0:.1e}, n=1 oracle gap {oracle_err:.2e}, "
                  f"n=2 angle deviation {angle_dev:.2e}")


def test_criterion_08_functionals():
    geom = TorusGeometry(2, 8)
    chi = form_field(geom, np.diag([1.0, 2.0]),
                     field_from_modes(geom, [((1, 0, 0, 0), 0.02)]))
    omega0 = form_field(geom, np.eye(2),
                        field_from_modes(geom, [((0, 1, 0, 0), 0.015)]))
    c0 = compute_c0(chi, omega0)
    rng = np.random.default_rng(108)

    shift_dev = 0.0
    deriv_dev = 0.0
    rep_dev_i = 0.0
    rep_dev_j = 0.0
    for k in range(100):
        phi = random_bandlimited(geom, rng, kmax=1, amplitude=0.003)
        if k < 10:
            shift_dev = max(shift_dev,
                            abs(j_chi_functional(chi, omega0, phi, c0)
                                - j_chi_functional(chi, omega0, phi + 3.0, c0)),
                            abs(aubin_i(omega0, phi) - aubin_i(omega0, phi + 3.0)),
                            abs(j_omega0_functional(omega0, phi, t_steps=16)
                                - j_omega0_functional(omega0, phi + 3.0, t_steps=16)))
            t = float(rng.uniform(0.2, 0.9))
            h = 1e-4
            fd = (j_chi_functional(chi, omega0, (t + h) * phi, c0)
                  - j_chi_functional(chi, omega0, (t - h) * phi, c0)) / (2 * h)
            an = j_chi_derivative(chi, omega0, t * phi, phi, c0)
            deriv_dev = max(deriv_dev, abs(fd - an) / max(abs(an), 1e-9))
        rep_dev_i = max(rep_dev_i, abs(aubin_i(omega0, phi)
                                       - aubin_i(omega0, phi, form="gradient")))
        rep_dev_j = max(rep_dev_j,
                        abs(j_omega0_functional(omega0, phi, t_steps=16)
                            - j_omega0_functional(omega0, phi, t_steps=16,
                                                  form="gradient")))

    # critical point footprint at a genuine converged J-solution
    geom2 = TorusGeometry(2, 16)
    chi2 = form_field(geom2, np.diag([1.0, 2.0]),
                      field_from_modes(geom2, [((1, 0, 0, 0), 0.04)]))
    om2 = constant_form(geom2, np.eye(2))
    c02 = compute_c0(chi2, om2)
    cfg = SolverConfig(path_steps=4, tolerance=1e-11)
    sol = continuity_path_j(chi2, om2, ScalarField.zeros(geom2), c02, cfg)
    directions = [field_from_modes(geom2, [((1, 0, 0, 0), 1.0)])]  # couples to chi
    for _ in range(4):
        u = random_bandlimited(geom2, rng, kmax=1, amplitude=1.0)
        directions.append(u * (1.0 / u.sup_norm()))
    crit_dev = max(abs(j_chi_derivative(chi2, om2, sol.phi, u, c02))
                   for u in directions)
    ok = (shift_dev <= 1e-9 and deriv_dev <= 1e-6 and rep_dev_i <= 1e-7
          and rep_dev_j <= 1e-7 and sol.success
          and crit_dev <= 10.0 * sol.final_residual)
    report(8, ok, f"shift {shift_dev:.1e}, derivative identity {deriv_dev:.1e}, "
                  f"reps I {rep_dev_i:.1e} / J {rep_dev_j:.1e}, critical point "
                  f"{crit_dev:.2e} vs residual {sol.final_residual:.2e}")


def test_criterion_09_stability():
    rng = np.random.default_rng(109)
    # slope equality at (V=M, p=n, c=c0)
    a = (2.0, 3.0, 4.0)
    d = IntersectionData(p=2, n=2, a=a, label="V=M")
    eq_dev = abs(slope_test(d, 2 * a[1] / a[0], 0.0))

    # scale invariance of the uniform slack
    ds = coordinate_subtorus_data(np.diag([1.0, 2.0]), np.eye(2))
    scaled = [IntersectionData(p=x.p, n=x.n, a=tuple(3.7 * v for v in x.a))
              for x in ds]
    scale_dev = abs(max_uniform_epsilon(ds, 3.0) - max_uniform_epsilon(scaled, 3.0))

    # p = 1 terminal deviation
    term_dev = 0.0
    for _ in range(20):
        a0, a1 = rng.uniform(0.8, 1.2, size=2)
        br = angle_branch(IntersectionData(p=1, n=2, a=(a0, a1)), t_max=1e4)
        term_dev = max(term_dev, br.terminal_deviation)

    # p = 3 zero detection against the cubic-root oracle, both sides of the
    # well-definedness inequality
    agree = True
    n_sat = n_violate = 0
    cases = []
    for _ in range(50):  # satisfying: a0 a3 < 9 a1 a2
        while True:
            a0, a1, a2, a3 = rng.uniform(0.5, 2.0, size=4)
            if a0 * a3 < 9 * a1 * a2:
                break
        cases.append((a0, a1, a2, a3))
        n_sat += 1
    for _ in range(30):  # violating, zero-free
        a0, a3 = rng.uniform(1.0, 2.0, size=2)
        a1, a2 = rng.uniform(0.02, 0.15, size=2)
        if a0 * a3 > 9 * a1 * a2:
            cases.append((a0, a1, a2, a3))
            n_violate += 1
    for _ in range(20):  # violating at equality: an exact zero in range
        t_star = float(rng.uniform(2.0, 50.0))
        a1 = float(rng.uniform(0.3, 1.0))
        a0 = float(rng.uniform(0.5, 2.0))
        a3 = 3.0 * a1 * t_star ** 2
        a2 = a0 * a3 / (9.0 * a1)
        cases.append((a0, a1, a2, a3))
        n_violate += 1
    t_max = 1e4
    for a0, a1, a2, a3 in cases:
        data = IntersectionData(p=3, n=3, a=(a0, a1, a2, a3))
        try:
            angle_branch(data, t_max=t_max)
            flagged = False
        except BranchUndefinedError:
            flagged = True
        roots = np.roots(branch_polynomial(data))
        oracle = bool(np.any((np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots.real)))
                             & (roots.real >= 1.0) & (roots.real <= t_max)))
        if flagged != oracle:
            agree = False
    ok = (eq_dev <= 1e-12 and scale_dev <= 1e-12 and term_dev <= 2e-4 and agree
          and n_sat + n_violate == 100)
    report(9, ok, f"slope equality {eq_dev:.1e}, scale invariance {scale_dev:.1e}, "
                  f"p=1 terminal {term_dev:.2e}, p=3 oracle agreement on "
                  f"{n_sat}+{n_violate} datasets: {agree}")


def test_criterion_10_cross_module_coherence():
    # a stable instance: path succeeds and the generated datasets admit eps > 0
    geom = TorusGeometry(2, 16)
    chi_b = np.diag([1.0, 2.0])
    chi = constant_form(geom, chi_b)
    omega0 = constant_form(geom, np.eye(2))
    c0 = compute_c0(chi, omega0)
    f_target = field_from_modes(geom, [((1, 0, 0, 0), 0.05)])
    rep = continuity_path_j(chi, omega0, f_target, c0,
                            SolverConfig(path_steps=4, tolerance=1e-11))
    eps = max_uniform_epsilon(coordinate_subtorus_data(chi_b, np.eye(2)), c0)
    stable_ok = rep.success and eps is not None and eps > 0.0

    # an instance whose dataset fails at eps = 0 must never report success
    chi_bad_b = np.diag([1.0, 4.0])
    c_bad = 3.5
    ds_bad = coordinate_subtorus_data(chi_bad_b, np.eye(2))
    assert max_uniform_epsilon(ds_bad, c_bad) is None
    chi_bad = constant_form(geom, chi_bad_b)
    outcomes = []
    try:
        bad_rep = continuity_path_j(chi_bad, omega0, ScalarField.zeros(geom), c_bad,
                                    SolverConfig(path_steps=3))
        outcomes.append("success" if bad_rep.success else bad_rep.status)
    except (PreconditionError, ContinuationError, ConeBreachError) as exc:
        outcomes.append(type(exc).__name__)
    try:
        bad_newton = newton_solve(
            make_j_problem(chi_bad, omega0, ScalarField.zeros(geom), c_bad),
            ScalarField.zeros(geom), SolverConfig(max_newton=10))
        outcomes.append("success" if bad_newton.success else bad_newton.status)
    except ConeBreachError:
        outcomes.append("ConeBreachError")
    honest = all(o != "success" for o in outcomes)
    ok = stable_ok and honest
    report(10, ok, f"stable instance eps = {eps}, unstable instance outcomes: "
                   f"{outcomes}")
