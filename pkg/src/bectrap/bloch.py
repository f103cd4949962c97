"""Three-mode nonlinear Bloch waves in a shallow lattice.

The truncated Bloch state is

    psi_q(z) = sqrt(n) e^{iqz} (c0 + c_{-1} e^{-2iz} + c_1 e^{2iz}),

with real coefficients on the unit sphere parametrised by two angles,
c0 = cos(theta), c_{-1} = sin(theta) sin(phi), c_1 = sin(theta) cos(phi).
Energies are per particle and per lattice period, in recoil units.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlochAnsatz:
    q: float
    theta: float
    phi: float
    n: float = 1.0

    @property
    def coefficients(self) -> np.ndarray:
        """(c0, c_{-1}, c_1)."""
        return angles_to_coefficients(self.theta, self.phi)

    def wavefunction(self, z) -> np.ndarray:
        c0, cm, cp = self.coefficients
        z = np.asarray(z, dtype=float)
        return np.sqrt(self.n) * np.exp(1j * self.q * z) * (
            c0 + cm * np.exp(-2j * z) + cp * np.exp(2j * z)
        )


def angles_to_coefficients(theta, phi) -> np.ndarray:
    return np.array([np.cos(theta), np.sin(theta) * np.sin(phi), np.sin(theta) * np.cos(phi)])


def coefficients_to_angles(c) -> tuple[float, float]:
    c0, cm, cp = np.asarray(c, dtype=float) / np.linalg.norm(c)
    theta = float(np.arccos(np.clip(c0, -1.0, 1.0)))
    phi = float(np.arctan2(cm, cp)) % (2 * np.pi)
    return theta, phi


# ---------------------------------------------------------------------------
# energy functional


def energy_quadrature(q, theta, phi, s, n_beta, v=0.0, num_points: int = 64) -> float:
    """Energy per particle by direct quadrature of the functional over one period.

    The integrand is a trigonometric polynomial in z of degree at most 8, so
    the rectangle rule with num_points > 8 is exact up to rounding.
    """
    if n_beta < 0:
        raise ValueError(f"n_beta must be non-negative, got {n_beta}")
    z = np.arange(num_points) * (np.pi / num_points)
    c0, cm, cp = angles_to_coefficients(theta, phi)
    carrier = np.exp(1j * q * z)
    f = carrier * (c0 + cm * np.exp(-2j * z) + cp * np.exp(2j * z))
    df = 1j * q * f + carrier * (-2j * cm * np.exp(-2j * z) + 2j * cp * np.exp(2j * z))
    rho = np.abs(f) ** 2
    integrand = 0.5 * np.abs(df) ** 2 + (v + s * np.cos(2 * z)) * rho + 0.5 * n_beta * rho**2
    return float(np.mean(integrand))


def interaction_energy(theta, phi, n_beta):
    """Interaction part of the energy per particle, (n beta / 2) <|f|^4>."""
    return 0.5 * n_beta * (
        1.0
        + 0.5 * np.sin(2 * theta) ** 2 * (1.0 + np.sin(2 * phi))
        + 0.5 * np.sin(theta) ** 4 * np.sin(2 * phi) ** 2
    )


def energy_closed_form(q, theta, phi, s, n_beta, v=0.0):
    """Closed-form energy per particle.

    Kinetic and lattice terms are the familiar ones; the quartic term is
    (n beta / 2)(1 + A^2/2 + B^2/2) with A = 2 c0 (c_{-1} + c_1) and
    B = 2 c_{-1} c_1 the cos(2z) and cos(4z) amplitudes of |f|^2.
    Works elementwise on arrays.
    """
    return (
        0.5 * q**2
        + 2.0 * np.sin(theta) ** 2 * (1.0 + q * np.cos(2 * phi))
        + 0.5 * s * np.sin(2 * theta) * (np.cos(phi) + np.sin(phi))
        + interaction_energy(theta, phi, n_beta)
        + v
    )


def energy_closed_form_printed(q, theta, phi, s, n_beta, v=0.0):
    """The closed form as commonly quoted, kept for comparison only.

    Its quartic term is not phi-independent at theta = 0 and disagrees with
    quadrature away from theta = 0; do not use it for band structures.
    """
    inter = n_beta / 64.0 * (
        43.0
        - np.cos(4 * phi) * (3.0 + np.cos(4 * phi))
        - np.cos(4 * theta) * (7.0 + 8.0 * np.sin(2 * phi))
        + 8.0 * np.sin(2 * phi) * (1.0 - np.cos(2 * theta) * np.sin(2 * phi))
    )
    return (
        0.5 * q**2
        + 2.0 * np.sin(theta) ** 2 * (1.0 + q * np.cos(2 * phi))
        + 0.5 * s * np.sin(2 * theta) * (np.cos(phi) + np.sin(phi))
        + inter
        + v
    )


def quadratic_matrix(q, s, v=0.0) -> np.ndarray:
    """Single-particle Hamiltonian in the basis e^{iqz}, e^{i(q-2)z}, e^{i(q+2)z}."""
    h = np.diag([0.5 * q**2 + v, 0.5 * (q - 2) ** 2 + v, 0.5 * (q + 2) ** 2 + v])
    h[0, 1] = h[1, 0] = h[0, 2] = h[2, 0] = 0.5 * s
    return h


def linear_bands(q, s, v=0.0) -> np.ndarray:
    """Eigenvalues of the 3x3 plane-wave matrix (the beta = 0 band energies)."""
    return np.linalg.eigvalsh(quadratic_matrix(q, s, v))


# Energy as a function of c in R^3, homogenised so that it is smooth off the
# sphere:  E(c) = c.M.c + (n beta / 2) Q(c),
#          Q(c) = |c|^4 + 2 c0^2 (a + b)^2 + 2 a^2 b^2,   a = c_{-1}, b = c_1.


def _quartic(c):
    c0, a, b = c
    r2 = c0 * c0 + a * a + b * b
    return r2 * r2 + 2 * c0 * c0 * (a + b) ** 2 + 2 * a * a * b * b


def _quartic_grad(c):
    c0, a, b = c
    r2 = c0 * c0 + a * a + b * b
    u = a + b
    return np.array([
        4 * r2 * c0 + 4 * c0 * u * u,
        4 * r2 * a + 4 * c0 * c0 * u + 4 * a * b * b,
        4 * r2 * b + 4 * c0 * c0 * u + 4 * a * a * b,
    ])


def _quartic_hess(c):
    c0, a, b = c
    c = np.asarray(c)
    r2 = c0 * c0 + a * a + b * b
    u = a + b
    hess = 4 * r2 * np.eye(3) + 8 * np.outer(c, c)
    cross = np.array([
        [4 * u * u, 8 * c0 * u, 8 * c0 * u],
        [8 * c0 * u, 4 * c0 * c0 + 4 * b * b, 4 * c0 * c0 + 8 * a * b],
        [8 * c0 * u, 4 * c0 * c0 + 8 * a * b, 4 * c0 * c0 + 4 * a * a],
    ])
    return hess + cross


def sphere_energy(c, q, s, n_beta, v=0.0):
    c = np.asarray(c, dtype=float)
    return float(c @ quadratic_matrix(q, s, v) @ c + 0.5 * n_beta * _quartic(c))


def sphere_gradient(c, q, s, n_beta, v=0.0) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return 2 * quadratic_matrix(q, s, v) @ c + 0.5 * n_beta * _quartic_grad(c)


def sphere_hessian(c, q, s, n_beta, v=0.0) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return 2 * quadratic_matrix(q, s, v) + 0.5 * n_beta * _quartic_hess(c)


def tangent_gradient(c, q, s, n_beta, v=0.0) -> np.ndarray:
    """Gradient of the energy along the unit sphere (zero at stationary states)."""
    c = np.asarray(c, dtype=float)
    g = sphere_gradient(c, q, s, n_beta, v)
    return g - (c @ g) * c


def _tangent_basis(c):
    # two orthonormal vectors spanning the tangent plane at c
    _, _, vt = np.linalg.svd(c.reshape(1, 3))
    return vt[1:]


def tangent_hessian_eigenvalues(c, q, s, n_beta, v=0.0) -> np.ndarray:
    """Eigenvalues of the Riemannian Hessian on the unit sphere at a stationary c."""
    c = np.asarray(c, dtype=float)
    lam = c @ sphere_gradient(c, q, s, n_beta, v)
    basis = _tangent_basis(c)
    reduced = basis @ (sphere_hessian(c, q, s, n_beta, v) - lam * np.eye(3)) @ basis.T
    return np.linalg.eigvalsh(reduced)


def chemical_potential_q(theta, phi, q, s, n_beta, v=0.0):
    """mu_q = eps + n d(eps)/dn; only the quartic term depends on n."""
    return energy_closed_form(q, theta, phi, s, n_beta, v) + interaction_energy(theta, phi, n_beta)


# ---------------------------------------------------------------------------
# stationary points and band structure


@dataclass(frozen=True)
class BandPoint:
    q: float
    energy_per_particle: float
    chemical_potential: float
    theta: float
    phi: float
    branch_label: str
    morse_index: int
    gradient_norm: float


def _canonical(c):
    # c and -c are the same physical state
    c = np.asarray(c, dtype=float)
    idx = int(np.argmax(np.abs(c) > 1e-9))
    return c if c[idx] > 0 else -c


def _batched_gradient(c, m, n_beta):
    c0, a, b = c[:, 0], c[:, 1], c[:, 2]
    r2 = np.sum(c * c, axis=1)
    u = a + b
    quart = np.stack([
        4 * r2 * c0 + 4 * c0 * u * u,
        4 * r2 * a + 4 * c0 * c0 * u + 4 * a * b * b,
        4 * r2 * b + 4 * c0 * c0 * u + 4 * a * a * b,
    ], axis=1)
    return 2 * c @ m + 0.5 * n_beta * quart


def _batched_hessian(c, m, n_beta):
    c0, a, b = c[:, 0], c[:, 1], c[:, 2]
    r2 = np.sum(c * c, axis=1)
    u = a + b
    hess = 4 * r2[:, None, None] * np.eye(3) + 8 * c[:, :, None] * c[:, None, :]
    hess[:, 0, 0] += 4 * u * u
    hess[:, 0, 1] += 8 * c0 * u
    hess[:, 1, 0] += 8 * c0 * u
    hess[:, 0, 2] += 8 * c0 * u
    hess[:, 2, 0] += 8 * c0 * u
    hess[:, 1, 1] += 4 * c0 * c0 + 4 * b * b
    hess[:, 2, 2] += 4 * c0 * c0 + 4 * a * a
    hess[:, 1, 2] += 4 * c0 * c0 + 8 * a * b
    hess[:, 2, 1] += 4 * c0 * c0 + 8 * a * b
    return 2 * m + 0.5 * n_beta * hess


def newton_on_sphere(starts, q, s, n_beta, v=0.0, max_iter: int = 60, tol: float = 1e-13):
    """Batched Newton iteration for grad E(c) = lambda c with |c| = 1.

    Returns (c, converged) for every start vector.
    """
    c = np.array(starts, dtype=float).reshape(-1, 3)
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    m = quadratic_matrix(q, s, v)
    lam = np.sum(c * _batched_gradient(c, m, n_beta), axis=1)
    active = np.ones(len(c), dtype=bool)
    done = np.zeros(len(c), dtype=bool)
    eye = np.eye(3)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ci, li = c[idx], lam[idx]
        g = _batched_gradient(ci, m, n_beta)
        res = np.concatenate([g - li[:, None] * ci, 0.5 * (np.sum(ci * ci, axis=1) - 1.0)[:, None]], axis=1)
        small = np.max(np.abs(res), axis=1) < tol
        done[idx[small]] = True
        active[idx[small]] = False
        keep = ~small
        idx, ci, li, res = idx[keep], ci[keep], li[keep], res[keep]
        if idx.size == 0:
            break
        jac = np.zeros((idx.size, 4, 4))
        jac[:, :3, :3] = _batched_hessian(ci, m, n_beta) - li[:, None, None] * eye
        jac[:, :3, 3] = -ci
        jac[:, 3, :3] = ci
        det = np.linalg.det(jac)
        ok = np.abs(det) > 1e-14
        active[idx[~ok]] = False
        idx, ci, li, res, jac = idx[ok], ci[ok], li[ok], res[ok], jac[ok]
        delta = np.linalg.solve(jac, -res[:, :, None])[:, :, 0]
        step = np.max(np.abs(delta[:, :3]), axis=1)
        scale = np.where(step > 0.5, 0.5 / np.maximum(step, 1e-300), 1.0)
        delta *= scale[:, None]
        c[idx] = ci + delta[:, :3]
        lam[idx] = li + delta[:, 3]
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    return c, done


def stationary_states(q, s, n_beta, v=0.0, seeds: int = 64, dedup: float = 1e-6):
    """All distinct stationary states of the energy on the sphere at quasi-momentum q.

    Newton refinement from a seeds x seeds grid over theta in [0, pi),
    phi in [0, 2 pi), plus the eigenvectors of the linear problem.  Returns
    a list of (c, energy, morse_index, gradient_norm) sorted by energy.
    """
    thetas = (np.arange(seeds) + 0.5) * np.pi / seeds
    phis = np.arange(seeds) * 2 * np.pi / seeds
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    starts = angles_to_coefficients(tt.ravel(), pp.ravel()).T
    starts = np.vstack([starts, np.linalg.eigh(quadratic_matrix(q, s, v))[1].T])
    cs, ok = newton_on_sphere(starts, q, s, n_beta, v)
    found: list[np.ndarray] = []
    for c in cs[ok]:
        c = _canonical(c)
        if any(np.linalg.norm(c - other) < dedup for other in found):
            continue
        found.append(c)
    out = []
    for c in found:
        grad = float(np.linalg.norm(tangent_gradient(c, q, s, n_beta, v)))
        if grad > 1e-8:
            continue
        eig = tangent_hessian_eigenvalues(c, q, s, n_beta, v)
        out.append((c, sphere_energy(c, q, s, n_beta, v), int(np.sum(eig < 0)), grad))
    out.sort(key=lambda item: item[1])
    return out


def _loop_side(q) -> str:
    # distance of |q| to the nearest odd integer: first-gap edges sit at odd q
    r = abs(q) % 2.0
    return "first" if abs(r - 1.0) < 0.5 else "second"


def label_states(q, states) -> list[str]:
    """Branch labels for energy-sorted stationary states at one q.

    Without a loop there are three states (one per linear band): the lowest
    is 'lower', the others 'upper'.  Each loop adds a pair of states; near a
    first-gap edge (|q| close to an odd integer) they sit between the lower
    band and the second band, near |q| = 0 (mod 2) between the second and
    third bands.
    """
    n = len(states)
    if n <= 3:
        return ["lower"] + ["upper"] * (n - 1)
    extra = n - 3
    if _loop_side(q) == "first":
        return ["lower"] + ["loop"] * extra + ["upper", "upper"]
    return ["lower", "upper"] + ["loop"] * extra + ["upper"]


def band_structure(q_values, s, n_beta, v=0.0, seeds: int = 64) -> list[BandPoint]:
    """Stationary states of the three-mode energy for each q.

    A q at which the search fails is logged and skipped; the rest of the
    sweep continues.
    """
    points = []
    for q in np.atleast_1d(np.asarray(q_values, dtype=float)):
        try:
            states = stationary_states(q, s, n_beta, v, seeds=seeds)
        except np.linalg.LinAlgError as exc:
            log.warning("band search failed at q=%g: %s", q, exc)
            continue
        if not states:
            log.warning("no stationary state found at q=%g", q)
            continue
        for (c, energy, index, grad), label in zip(states, label_states(q, states)):
            theta, phi = coefficients_to_angles(c)
            points.append(BandPoint(
                q=float(q),
                energy_per_particle=energy,
                chemical_potential=float(chemical_potential_q(theta, phi, q, s, n_beta, v)),
                theta=theta,
                phi=phi,
                branch_label=label,
                morse_index=index,
                gradient_norm=grad,
            ))
    return points


def has_first_edge_loop(s, n_beta, v=0.0, q_values=None, seeds: int = 32) -> bool:
    """True if the band structure has a loop at the first band edge (|q| near 1)."""
    if q_values is None:
        q_values = np.linspace(0.9, 1.1, 9)
    for q in q_values:
        states = stationary_states(q, s, n_beta, v, seeds=seeds)
        if "loop" in label_states(q, states) and _loop_side(q) == "first":
            return True
    return False


def first_gap(q, s, n_beta=0.0, v=0.0, seeds: int = 32) -> float:
    """Energy difference between the 'upper' and 'lower' branches adjacent to the first gap at q."""
    states = stationary_states(q, s, n_beta, v, seeds=seeds)
    labels = label_states(q, states)
    lower = states[labels.index("lower")][1]
    upper = states[labels.index("upper")][1]
    return upper - lower


# ---------------------------------------------------------------------------
# q = 0 nonlinear Bloch wave psi = d0 + d1 cos(2z)


@dataclass(frozen=True)
class DCoefficients:
    d0: float
    d1: float
    mu: float
    beta: float
    s: float

    @property
    def n(self) -> float:
        return self.d0**2 + 0.5 * self.d1**2

    def residuals(self) -> tuple[float, float]:
        return d_system_residuals(self.d0, self.d1, self.mu, self.beta, self.s)


class BranchTerminated(RuntimeError):
    def __init__(self, message, last_s):
        super().__init__(message)
        self.last_s = last_s


def d_system_residuals(d0, d1, mu, beta, s):
    """Left-hand sides of the stationarity conditions for d0 and d1."""
    r0 = 2 * beta * d0**3 + d0 * (3 * beta * d1**2 - 2 * mu) + s * d1
    r1 = 3 * beta * d1**3 + 4 * d1 * (2 + 3 * beta * d0**2 - mu) + 4 * s * d0
    return r0, r1


def _d_jacobian(d0, d1, mu, beta, s):
    return np.array([
        [6 * beta * d0**2 + 3 * beta * d1**2 - 2 * mu, 6 * beta * d0 * d1 + s],
        [24 * beta * d0 * d1 + 4 * s, 9 * beta * d1**2 + 4 * (2 + 3 * beta * d0**2 - mu)],
    ])


def _newton_d(x, mu, beta, s, tol=1e-15, max_iter=50):
    for _ in range(max_iter):
        res = np.array(d_system_residuals(x[0], x[1], mu, beta, s))
        jac = _d_jacobian(x[0], x[1], mu, beta, s)
        if abs(np.linalg.det(jac)) < 1e-300:
            return x, False
        step = np.linalg.solve(jac, -res)
        x = x + step
        if np.max(np.abs(step)) <= tol * max(1.0, np.max(np.abs(x))):
            return x, True
    res = np.max(np.abs(d_system_residuals(x[0], x[1], mu, beta, s)))
    return x, bool(res < 1e-12)


def solve_d_system(mu, beta, s, ds: float = 0.005) -> DCoefficients:
    """Real (d0, d1) on the branch connected to d0 = sqrt(mu/beta), d1 = 0 at s = 0.

    The branch is followed by natural continuation in s with steps of at
    most `ds`, Newton-corrected at every step.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if s < 0:
        raise ValueError(f"lattice depth must be non-negative, got {s}")
    if not mu > 0:
        raise BranchTerminated(f"no real branch at s = 0 for mu = {mu} <= 0", last_s=None)
    x = np.array([np.sqrt(mu / beta), 0.0])
    if s > 0:
        steps = max(1, int(np.ceil(s / ds)))
        path = np.linspace(0.0, s, steps + 1)[1:]
        prev_s, prev_x, slope = 0.0, x.copy(), np.zeros(2)
        for s_k in path:
            guess = x + slope * (s_k - prev_s)  # secant predictor
            new, ok = _newton_d(guess, mu, beta, s_k)
            if not ok or np.linalg.norm(new - x) > 0.5 * max(abs(x[0]), 1e-300):
                raise BranchTerminated(
                    f"continuation lost the branch between s={prev_s:g} and s={s_k:g}", last_s=prev_s
                )
            slope = (new - x) / (s_k - prev_s)
            prev_s, x = s_k, new
    # polish at the target parameters
    x, _ = _newton_d(x, mu, beta, s)
    return DCoefficients(float(x[0]), float(x[1]), float(mu), float(beta), float(s))


def bloch_density(d: DCoefficients, z) -> np.ndarray:
    """|d0 + d1 cos 2z|^2 evaluated directly."""
    z = np.asarray(z, dtype=float)
    return (d.d0 + d.d1 * np.cos(2 * z)) ** 2


def bloch_density_expanded(d: DCoefficients, z) -> np.ndarray:
    """Harmonic expansion n + 2 d0 d1 cos 2z + (d1^2/2) cos 4z; equal to bloch_density."""
    z = np.asarray(z, dtype=float)
    return d.n + 2 * d.d0 * d.d1 * np.cos(2 * z) + 0.5 * d.d1**2 * np.cos(4 * z)


def bloch_density_printed(d: DCoefficients, z) -> np.ndarray:
    """Variant with sin(4z) in place of cos(4z), as sometimes printed; reference only."""
    z = np.asarray(z, dtype=float)
    return d.n + 2 * d.d0 * d.d1 * np.cos(2 * z) + 0.5 * d.d1**2 * np.sin(4 * z)


def delta_N(d: DCoefficients) -> float:
    """Population of one lattice site (length pi) of the Bloch wave."""
    return np.pi * d.n
