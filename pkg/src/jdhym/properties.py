"""Randomized property suites behind ``verify-lemmas``.

Each suite draws seeded random instances and returns its worst observed
slack; a property holds when the worst slack stays above the stated
threshold.  Slacks are oriented so that larger is better.
"""

from __future__ import annotations

import math

import numpy as np

from .hermitian import SpectrumRel, f_gradient, f_hessian

__all__ = [
    "random_positive_block",
    "sample_gamma_point",
    "fuzz_schur_trace",
    "fuzz_schur_arctan",
    "suite_gradient_positivity",
    "suite_gradient_ordering",
    "suite_gradient_fd",
    "suite_hessian_zero_slice",
    "suite_boundary_negative",
    "suite_nondegeneracy",
    "run_property_suites",
]


def random_positive_block(rng: np.random.Generator, a_dim: int, b_dim: int,
                          shift: float = 0.0):
    """Random Hermitian positive block [[A, C], [C^H, B]], optionally > shift*I."""
    m = a_dim + b_dim
    g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    block = g @ g.conj().T / m + (0.05 + shift) * np.eye(m)
    if shift:
        block += shift * 0.05 * np.eye(m)  # keep strictly above shift*I
    A = block[:a_dim, :a_dim]
    B = block[a_dim:, a_dim:]
    C = block[:a_dim, a_dim:]
    return block, A, B, C


def _p_trace(eigs: np.ndarray) -> float:
    if eigs.size == 1:
        return 0.0
    recip = np.sort(1.0 / eigs)[::-1]
    return float(np.sum(recip[:-1]))


def _p_arctan(eigs: np.ndarray) -> float:
    if eigs.size == 1:
        return 0.0
    terms = np.sort(np.arctan(1.0 / eigs))[::-1]
    return float(np.sum(terms[:-1]))


def fuzz_schur_trace(trials: int, rng: np.random.Generator,
                     max_block: int = 5) -> dict:
    """Subadditivity ``P(schur) + tr(B^-1) <= P(block)`` on random positive blocks."""
    worst = math.inf
    for _ in range(trials):
        a_dim = int(rng.integers(1, max_block + 1))
        b_dim = int(rng.integers(1, max_block + 1))
        block, A, B, C = random_positive_block(rng, a_dim, b_dim)
        schur = A - C @ np.linalg.solve(B, C.conj().T)
        lhs = _p_trace(np.linalg.eigvalsh(0.5 * (schur + schur.conj().T)))
        lhs += float(np.sum(1.0 / np.linalg.eigvalsh(B)))
        rhs = _p_trace(np.linalg.eigvalsh(block))
        worst = min(worst, rhs - lhs)
    return {"property": "schur-trace-subadditivity", "trials": trials,
            "worst_slack": worst, "threshold": -1e-10, "holds": worst >= -1e-10}


def fuzz_schur_arctan(trials: int, rng: np.random.Generator,
                      max_block: int = 5) -> dict:
    """Arctan subadditivity ``P(schur) + Q(B) <= P(block)`` for blocks > I."""
    worst = math.inf
    for _ in range(trials):
        a_dim = int(rng.integers(1, max_block + 1))
        b_dim = int(rng.integers(1, max_block + 1))
        block, A, B, C = random_positive_block(rng, a_dim, b_dim, shift=1.0)
        schur = A - C @ np.linalg.solve(B, C.conj().T)
        lhs = _p_arctan(np.linalg.eigvalsh(0.5 * (schur + schur.conj().T)))
        lhs += float(np.sum(np.arctan(1.0 / np.linalg.eigvalsh(B))))
        rhs = _p_arctan(np.linalg.eigvalsh(block))
        worst = min(worst, rhs - lhs)
    return {"property": "schur-arctan-subadditivity", "trials": trials,
            "worst_slack": worst, "threshold": -1e-10, "holds": worst >= -1e-10}


def sample_gamma_point(rng: np.random.Generator, n: int, theta0: float,
                       margin_factor: float = 0.995) -> SpectrumRel:
    """Random point of the Gamma region for (n, theta0), strictly interior.

    Draws angles ``t_i = arctan(1/lam_i)`` with the worst leave-one-out sum
    pinned to a random fraction of ``theta0``.
    """
    u = rng.uniform(0.05, 1.0, size=n)
    r = rng.uniform(0.3, margin_factor)
    if n == 1:
        t = np.array([rng.uniform(0.05, 0.95) * theta0])
    else:
        t = u * (r * theta0 / (np.sum(u) - np.min(u)))
    lam = 1.0 / np.tan(t)
    return SpectrumRel(tuple(sorted(float(v) for v in lam)))


def _random_f(rng: np.random.Generator, n: int) -> float:
    return float(rng.uniform(-1.0 / (100.0 * n) * 0.999, 1.0))


def suite_gradient_positivity(trials: int, rng: np.random.Generator) -> dict:
    worst = math.inf
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        theta0 = float(rng.uniform(0.05, math.pi / 4 - 0.02))
        spec = sample_gamma_point(rng, n, theta0)
        grad = f_gradient(_random_f(rng, n), spec, theta0)
        worst = min(worst, float(np.min(grad)))
    return {"property": "gradient-positivity", "trials": trials,
            "worst_slack": worst, "threshold": 0.0, "holds": worst > 0.0}


def suite_gradient_ordering(trials: int, rng: np.random.Generator) -> dict:
    worst = math.inf
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        theta0 = float(rng.uniform(0.05, math.pi / 4 - 0.02))
        spec = sample_gamma_point(rng, n, theta0)
        grad = f_gradient(_random_f(rng, n), spec, theta0)
        # ascending eigenvalues => gradient components weakly decreasing
        worst = min(worst, float(np.min(grad[:-1] - grad[1:])))
    return {"property": "gradient-ordering", "trials": trials,
            "worst_slack": worst, "threshold": -1e-12, "holds": worst >= -1e-12}


def suite_gradient_fd(trials: int, rng: np.random.Generator) -> dict:
    """Relative agreement with central finite differences, target 1e-6."""
    worst_err = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        theta0 = float(rng.uniform(0.05, math.pi / 4 - 0.02))
        spec = sample_gamma_point(rng, n, theta0)
        f = _random_f(rng, n)
        grad = f_gradient(f, spec, theta0)
        lam = spec.as_array()
        fd = np.empty_like(grad)
        for i in range(n):
            h = 1e-6 * max(1.0, abs(lam[i]))
            up = lam.copy(); up[i] += h
            dn = lam.copy(); dn[i] -= h
            fd[i] = (_f_raw(f, up, theta0) - _f_raw(f, dn, theta0)) / (2.0 * h)
        err = float(np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), 1e-300))
        worst_err = max(worst_err, err)
    return {"property": "gradient-fd-agreement", "trials": trials,
            "worst_slack": 1e-6 - worst_err, "threshold": 0.0,
            "holds": worst_err <= 1e-6}


def _f_raw(f: float, lam: np.ndarray, theta0: float) -> float:
    s = float(np.sum(np.arctan(1.0 / lam)))
    r = float(np.prod(np.sqrt(lam * lam + 1.0)))
    return math.sin(theta0 - s) - f * math.cos(theta0) / r


def suite_hessian_zero_slice(trials: int, rng: np.random.Generator) -> dict:
    """Concavity bound on the F = 0 slice with 1e-8 slack.

    Solves for the ``f`` putting each sampled point on the zero set and
    contracts the analytic Hessian with random unit vectors.
    """
    worst = math.inf
    done = 0
    while done < trials:
        n = int(rng.integers(2, 6))
        theta0 = float(rng.uniform(0.05, math.pi / 4 - 0.02))
        spec = sample_gamma_point(rng, n, theta0)
        lam = spec.as_array()
        s = float(np.sum(np.arctan(1.0 / lam)))
        r = float(np.prod(np.sqrt(lam * lam + 1.0)))
        f = math.sin(theta0 - s) * r / math.cos(theta0)
        if not (-1.0 / (100.0 * n) < f <= 1.0):
            continue
        hess = f_hessian(f, spec, theta0)
        xi = rng.normal(size=n)
        xi /= np.linalg.norm(xi)
        quad = float(xi @ hess @ xi)
        bound = -math.cos(theta0) * float(
            np.sum(lam * xi * xi / (2.0 * (lam * lam + 1.0) ** 2)))
        worst = min(worst, bound - quad)
        done += 1
    return {"property": "hessian-zero-slice-bound", "trials": trials,
            "worst_slack": worst, "threshold": -1e-8, "holds": worst >= -1e-8}


def suite_boundary_negative(trials: int, rng: np.random.Generator) -> dict:
    """F < 0 on the boundary ray ``lam_i = cot(theta0/(n-1))`` for admissible f."""
    worst = math.inf
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        theta0 = float(rng.uniform(0.05, math.pi / 4 - 0.02))
        lam = np.full(n, 1.0 / math.tan(theta0 / (n - 1)))
        f = _random_f(rng, n)
        worst = min(worst, -_f_raw(f, lam, theta0))
    return {"property": "boundary-F-negative", "trials": trials,
            "worst_slack": worst, "threshold": 0.0, "holds": worst > 0.0}


def suite_nondegeneracy(trials: int, rng: np.random.Generator) -> dict:
    """Strict leave-one-out margin when the equation holds with admissible f.

    Samples spectra with all leave-one-out sums <= c, solves the equation
    for f, keeps admissible draws and checks the margin stays positive.
    """
    worst = math.inf
    done = 0
    while done < trials:
        n = int(rng.integers(2, 7))
        lam = np.sort(rng.uniform(0.2, 5.0, size=n))
        recip = 1.0 / lam
        c_min = float(np.sum(recip) - recip[-1])
        c = float(rng.uniform(c_min * 1.0005, c_min * 3.0 + 0.5))
        f = (c - float(np.sum(recip))) * float(np.prod(lam))
        if f <= -(1.0 / (2.0 * n)) * (1.0 / c) ** (n - 1):
            continue
        margins = c - (np.sum(recip) - recip)
        worst = min(worst, float(np.min(margins)))
        done += 1
    return {"property": "solution-nondegeneracy-margin", "trials": trials,
            "worst_slack": worst, "threshold": 0.0, "holds": worst > 0.0}


def run_property_suites(trials: int, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    return [
        fuzz_schur_trace(trials, rng),
        fuzz_schur_arctan(trials, rng),
        suite_gradient_positivity(trials, rng),
        suite_gradient_ordering(trials, rng),
        suite_gradient_fd(trials, rng),
        suite_hessian_zero_slice(trials, rng),
        suite_boundary_negative(trials, rng),
        suite_nondegeneracy(trials, rng),
    ]
