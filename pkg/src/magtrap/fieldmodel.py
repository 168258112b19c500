"""Magnetostatic trap model from a truncated solid-harmonic expansion.

The scalar potential is a sum of real solid harmonics, so it satisfies
Laplace's equation identically and B = -grad(Phi) is both divergence- and
curl-free.  The total potential energy of a diamagnetic particle is

    U = -chi * |B|^2 * V / (2 mu0) + m g y,

with a field minimum confining the transverse/vertical motion and gravity
closing the axial direction along the upward-curved zero-field line.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from . import constants as const
from ._harmonics import COSINE, SINE, term_functions, term_parities, term_polynomial
from .errors import CalibrationError, FieldDomainError, UnstableTrapError

__all__ = [
    "COSINE",
    "SINE",
    "DEFAULT_TERM_SELECTION",
    "HarmonicTerm",
    "MultipoleCoefficients",
    "Particle",
    "TrapFrequencies",
    "scalar_potential",
    "b_field",
    "b_field_jacobian",
    "potential_energy",
    "force",
    "energy_hessian",
    "find_equilibrium",
    "trap_frequencies",
    "calibrate_coefficients",
]

# (degree, order, parity): a y-z-plane quadrupole, the degree-3 term that
# curves the zero-field line upward, and a degree-4 term that splits the
# transverse/vertical stiffness.  All share odd x-parity and even z-parity.
DEFAULT_TERM_SELECTION = ((2, 2, SINE), (3, 1, COSINE), (4, 2, SINE))


@dataclass(frozen=True)
class HarmonicTerm:
    """One retained multipole term; coefficient in T*m^(1-degree)."""

    degree: int
    order: int
    parity: str
    coefficient: float

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if not 0 <= self.order <= self.degree:
            raise ValueError("order must satisfy 0 <= order <= degree")
        if self.parity not in (COSINE, SINE):
            raise ValueError(f"parity must be '{COSINE}' or '{SINE}'")

    @property
    def key(self):
        return (self.degree, self.order, self.parity)

    def polynomial(self):
        """Sympy expression of the term's harmonic polynomial (unit coefficient)."""
        return term_polynomial(*self.key)


@dataclass(frozen=True)
class MultipoleCoefficients:
    """Truncated solid-harmonic expansion of the magnetic scalar potential."""

    terms: tuple
    validity_radius: float = 1.0e-3  # m; truncated expansion diverges far out

    def __post_init__(self):
        terms = tuple(
            t if isinstance(t, HarmonicTerm) else HarmonicTerm(*t) for t in self.terms
        )
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise ValueError("at least one term required")
        keys = [t.key for t in terms]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (degree, order, parity) terms")
        if not any(t.degree == 2 and t.coefficient != 0.0 for t in terms):
            raise ValueError("at least one nonzero degree-2 term required")
        # |B| must be mirror-symmetric in x and z: all retained terms must
        # share a definite parity under x -> -x and under z -> -z
        parities = {term_parities(*t.key) for t in terms if t.coefficient != 0.0}
        if len({p[0] for p in parities}) > 1 or len({p[1] for p in parities}) > 1:
            raise ValueError(
                "retained terms mix x- or z-parity; |B| would lose its "
                "x -> -x / z -> -z mirror symmetry"
            )
        if self.validity_radius <= 0:
            raise ValueError("validity_radius must be positive")

    def with_coefficients(self, values):
        """Same term selection with new coefficient values."""
        terms = tuple(
            HarmonicTerm(t.degree, t.order, t.parity, float(v))
            for t, v in zip(self.terms, values)
        )
        return MultipoleCoefficients(terms, self.validity_radius)

    @property
    def coefficient_values(self):
        return np.array([t.coefficient for t in self.terms])


@dataclass(frozen=True)
class Particle:
    """Trapped microsphere: mass/geometry, susceptibility, and net charge."""

    mass: float              # kg
    radius: float            # m
    density: float           # kg/m^3
    chi: float               # dimensionless volume susceptibility
    charge_e: int = 0        # integer multiple of the elementary charge

    _MASS_RTOL = 1e-2

    def __post_init__(self):
        if self.mass <= 0 or self.radius <= 0 or self.density <= 0:
            raise ValueError("mass, radius, density must be positive")
        expected = self.density * (4.0 / 3.0) * np.pi * self.radius**3
        if abs(self.mass - expected) > self._MASS_RTOL * expected:
            raise ValueError(
                f"mass {self.mass:g} inconsistent with density*(4/3)pi r^3 = {expected:g}"
            )

    @classmethod
    def from_radius(cls, radius, density, chi, charge_e=0):
        mass = density * (4.0 / 3.0) * np.pi * radius**3
        return cls(mass=mass, radius=radius, density=density, chi=chi, charge_e=charge_e)

    @classmethod
    def from_mass(cls, mass, density, chi, charge_e=0):
        radius = (3.0 * mass / (4.0 * np.pi * density)) ** (1.0 / 3.0)
        return cls(mass=mass, radius=radius, density=density, chi=chi, charge_e=charge_e)

    @property
    def volume(self):
        return (4.0 / 3.0) * np.pi * self.radius**3

    @property
    def charge(self):
        """Net charge in coulombs."""
        return self.charge_e * const.E_CHARGE


@dataclass(frozen=True)
class TrapFrequencies:
    """Natural trap frequencies omega_i / 2pi per axis, in Hz."""

    fx: float
    fy: float
    fz: float

    def __post_init__(self):
        if min(self.fx, self.fy, self.fz) <= 0:
            raise ValueError("trap frequencies must be strictly positive")

    def as_array(self):
        return np.array([self.fx, self.fy, self.fz])

    @property
    def omegas(self):
        return 2.0 * np.pi * self.as_array()


def _check_domain(coeffs, r):
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValueError("position must be a 3-vector")
    if not np.all(np.isfinite(r)):
        raise FieldDomainError("non-finite position")
    if np.linalg.norm(r) > coeffs.validity_radius:
        raise FieldDomainError(
            f"|r| = {np.linalg.norm(r):.3e} m outside validity radius "
            f"{coeffs.validity_radius:.3e} m"
        )
    return r


def scalar_potential(coeffs, r):
    """Magnetic scalar potential Phi(r) in T*m."""
    r = _check_domain(coeffs, r)
    total = 0.0
    for t in coeffs.terms:
        value, _, _, _ = term_functions(*t.key)
        total += t.coefficient * value(r)
    return total


def b_field(coeffs, r):
    """B = -grad(Phi) in tesla, from exact polynomial derivatives."""
    r = _check_domain(coeffs, r)
    out = np.zeros(3)
    for t in coeffs.terms:
        _, grad, _, _ = term_functions(*t.key)
        out -= t.coefficient * grad(r)
    return out


def b_field_jacobian(coeffs, r):
    """dB_i/dx_j, symmetric and traceless for a harmonic potential."""
    r = _check_domain(coeffs, r)
    out = np.zeros((3, 3))
    for t in coeffs.terms:
        _, _, hess, _ = term_functions(*t.key)
        out -= t.coefficient * hess(r)
    return out


def _b_second_derivs(coeffs, r):
    """d^2 B_c / dx_a dx_b, shape (3, 3, 3) indexed [c, a, b]."""
    out = np.zeros((3, 3, 3))
    for t in coeffs.terms:
        _, _, _, third = term_functions(*t.key)
        out -= t.coefficient * third(r)
    return out


def _alpha(particle):
    # U_mag = alpha * |B|^2 with alpha > 0 for a diamagnetic particle
    return -particle.chi * particle.volume / (2.0 * const.MU_0)


def potential_energy(coeffs, particle, r, g=const.G_EARTH):
    """Total potential energy in joules; g is exposed as a test hook."""
    b = b_field(coeffs, r)
    return _alpha(particle) * float(b @ b) + particle.mass * g * r[1]


def force(coeffs, particle, r, g=const.G_EARTH):
    """F = -grad(U), analytic."""
    b = b_field(coeffs, r)
    jac = b_field_jacobian(coeffs, r)
    grad_b2 = 2.0 * jac.T @ b
    out = -_alpha(particle) * grad_b2
    out[1] -= particle.mass * g
    return out


def energy_hessian(coeffs, particle, r):
    """Hessian of U; gravity contributes nothing (linear in y)."""
    b = b_field(coeffs, r)
    jac = b_field_jacobian(coeffs, r)
    second = _b_second_derivs(coeffs, r)
    hess_b2 = 2.0 * (jac.T @ jac + np.einsum("c,cab->ab", b, second))
    return _alpha(particle) * hess_b2


def _newton_minimize(coeffs, particle, start, g, gtol=1e-24, max_iter=200):
    """Damped (Levenberg-regularized) Newton descent on U."""
    r = np.asarray(start, dtype=float).copy()
    lam = 0.0
    for _ in range(max_iter):
        grad = -force(coeffs, particle, r, g=g)
        if np.linalg.norm(grad) < gtol:
            return r
        hess = energy_hessian(coeffs, particle, r)
        for _ in range(60):
            try:
                step = np.linalg.solve(hess + lam * np.eye(3), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.linalg.norm(step) < 0.5 * coeffs.validity_radius:
                trial = r + step
                if np.linalg.norm(trial) < coeffs.validity_radius and potential_energy(
                    coeffs, particle, trial, g=g
                ) <= potential_energy(coeffs, particle, r, g=g) + abs(grad @ step):
                    break
            lam = max(2.0 * lam, np.abs(np.diag(hess)).max() * 1e-12 + 1e-30)
        else:
            return None
        r = r + step
        lam *= 0.25
    grad = -force(coeffs, particle, r, g=g)
    return r if np.linalg.norm(grad) < gtol else None


def find_equilibrium(coeffs, particle, g=const.G_EARTH, n_starts=10, gtol=1e-24):
    """Locate the potential-energy minimum by multi-start damped Newton."""
    if particle.chi >= 0:
        raise UnstableTrapError("particle is not diamagnetic (chi >= 0)")
    rng = np.random.default_rng(1234)  # fixed: deterministic multi-start pattern
    scale = 0.05 * coeffs.validity_radius
    starts = [np.zeros(3)]
    starts += [rng.normal(scale=scale, size=3) for _ in range(n_starts - 1)]
    best = None
    for start in starts:
        r = _newton_minimize(coeffs, particle, start, g, gtol=gtol)
        if r is None:
            continue
        hess = energy_hessian(coeffs, particle, r)
        if np.any(np.linalg.eigvalsh(hess) <= 0):
            continue  # saddle capture
        u = potential_energy(coeffs, particle, r, g=g)
        if best is None or u < best[1] - 1e-30:
            best = (r, u)
    if best is None:
        raise CalibrationError("no potential-energy minimum found (unstable trap)")
    return best[0]


_DIAG_RATIO_TOL = 1e-6


def trap_frequencies(coeffs, particle, g=const.G_EARTH, equilibrium=None):
    """Natural frequencies from the Hessian of U at the equilibrium."""
    if equilibrium is None:
        equilibrium = find_equilibrium(coeffs, particle, g=g)
    hess = energy_hessian(coeffs, particle, equilibrium)
    diag = np.diag(hess)
    off = hess - np.diag(diag)
    if np.any(diag <= 0):
        raise UnstableTrapError(f"negative trap curvature: diag(H) = {diag}")
    if np.abs(off).max() > _DIAG_RATIO_TOL * np.abs(diag).min():
        raise UnstableTrapError(
            "energy Hessian is not diagonal at the equilibrium; "
            f"off/on ratio = {np.abs(off).max() / np.abs(diag).min():.2e}"
        )
    f = np.sqrt(diag / particle.mass) / (2.0 * np.pi)
    return TrapFrequencies(fx=f[0], fy=f[1], fz=f[2])


def _axis_equilibrium_y(coeffs, particle, g, y_guess):
    """Fast 1-D Newton for the on-axis equilibrium height (calibration inner loop)."""
    y = y_guess
    for _ in range(100):
        r = np.array([0.0, y, 0.0])
        fy = force(coeffs, particle, r, g=g)[1]
        hyy = energy_hessian(coeffs, particle, r)[1, 1]
        if hyy <= 0:
            return None
        step = fy / hyy
        y += step
        if abs(step) < 1e-18 + 1e-12 * abs(y):
            return y
    return None


def _frequencies_on_axis(coeffs, particle, g, y_guess):
    y0 = _axis_equilibrium_y(coeffs, particle, g, y_guess)
    if y0 is None:
        return None, None
    hess = energy_hessian(coeffs, particle, np.array([0.0, y0, 0.0]))
    diag = np.diag(hess)
    if np.any(diag <= 0):
        return None, y0
    return np.sqrt(diag / particle.mass) / (2.0 * np.pi), y0


def _initial_guess(targets, particle, g):
    """Analytic leading-order guess for the default three-term selection."""
    alpha = _alpha(particle)
    m = particle.mass
    wbar = 2.0 * np.pi * np.sqrt(targets.fx * targets.fy)
    k2 = np.sqrt(m * wbar**2 / (2.0 * alpha))
    y0 = -g / wbar**2
    ratio = (targets.fy / targets.fx) ** 2
    # leading-order stiffness split: (1-u)/((1+u)^2+u) = ratio, u = 3 k4 y0^2 / k2
    disc = (3.0 * ratio + 1.0) ** 2 - 4.0 * ratio * (ratio - 1.0)
    u = (-(3.0 * ratio + 1.0) + np.sqrt(disc)) / (2.0 * ratio)
    kappa = u * k2 / (3.0 * y0)
    wz = 2.0 * np.pi * targets.fz
    k3 = (m * wz**2 / (2.0 * alpha) / (k2 * y0) - 12.0 * kappa) / 8.0
    return np.array([k2, k3, kappa / y0]), y0


def calibrate_coefficients(
    targets,
    particle,
    term_selection=DEFAULT_TERM_SELECTION,
    g=const.G_EARTH,
    validity_radius=1.0e-3,
    tol=1e-3,
):
    """Find coefficients reproducing the target trap frequencies.

    Nested deterministic solve: the axial stiffness rides on a delicate
    cancellation between the degree-3 and degree-4 terms, so the degree-3
    coefficient is solved in an inner Newton loop for the axial target while
    an outer quasi-Newton root-find adjusts the remaining two coefficients
    for the transverse/vertical targets.
    """
    if len(term_selection) != 3:
        raise CalibrationError("calibration requires exactly three retained terms")
    template = MultipoleCoefficients(
        tuple(HarmonicTerm(*key, coefficient=1.0) for key in term_selection),
        validity_radius=validity_radius,
    )
    guess, y_guess = _initial_guess(targets, particle, g)
    state = {"k3": guess[1], "y": y_guess}
    wz_target = (2.0 * np.pi * targets.fz) ** 2

    def axial_curvature(k):
        f, y0 = _frequencies_on_axis(template.with_coefficients(k), particle, g, state["y"])
        if y0 is not None:
            state["y"] = y0
        if f is None:
            return None
        return (2.0 * np.pi * f[2]) ** 2

    def solve_axial(k2, k4):
        k3 = state["k3"]
        for _ in range(60):
            w2 = axial_curvature(np.array([k2, k3, k4]))
            if w2 is None:
                return None
            dk = abs(k3) * 1e-6 + 1e-12
            w2p = axial_curvature(np.array([k2, k3 + dk, k4]))
            if w2p is None or w2p == w2:
                return None
            step = (wz_target - w2) / ((w2p - w2) / dk)
            k3 += step
            if abs(step) < 1e-10 * abs(k3):
                state["k3"] = k3
                return k3
        return None

    def residual(p):
        k3 = solve_axial(p[0], p[1])
        if k3 is None:
            return np.array([1e3, 1e3])
        f, _ = _frequencies_on_axis(
            template.with_coefficients([p[0], k3, p[1]]), particle, g, state["y"]
        )
        if f is None:
            return np.array([1e3, 1e3])
        return np.array([f[0] - targets.fx, f[1] - targets.fy])

    sol = root(residual, np.array([guess[0], guess[2]]), method="hybr")
    k3 = solve_axial(sol.x[0], sol.x[1])  # hybr's last evaluation may not be at sol.x
    if k3 is None:
        raise CalibrationError("axial-stiffness inner solve failed at the outer solution")
    k = np.array([sol.x[0], k3, sol.x[1]])
    result = template.with_coefficients(k)
    achieved = trap_frequencies(result, particle, g=g)
    resid = achieved.as_array() / targets.as_array() - 1.0
    if np.abs(resid).max() > tol:
        raise CalibrationError(
            "calibration did not reach target frequencies "
            f"(relative residuals {resid})",
            residuals=resid,
        )
    return result
