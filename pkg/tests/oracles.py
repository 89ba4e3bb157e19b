"""Independent reference values used by the tests.

Nothing here imports the package: each oracle comes from a closed form or
from a scipy routine that shares no code with the finite element solver.
"""
import math

import numpy as np
from scipy import integrate, optimize, special

J01 = special.jn_zeros(0, 1)[0]  # first zero of J0


def robin_disk_eigenvalue(beta, R=1.0):
    """First Robin eigenvalue of the disk: root of sqrt(l) J1(sqrt(l) R) = beta J0(sqrt(l) R)."""
    def fn(k):
        return k * special.j1(k * R) - beta * special.j0(k * R)

    k = optimize.brentq(fn, 1e-12, J01 / R * (1 - 1e-15), xtol=1e-15, rtol=1e-15)
    return k * k


def ellipse_perimeter(a, b):
    """Complete elliptic integral form; scipy's ellipe takes m = e^2."""
    a, b = max(a, b), min(a, b)
    return 4 * a * special.ellipe(1 - (b / a) ** 2)


def torsion_disk(r, beta, R=1.0):
    """Radial torsion function with Robin data: (R^2 - r^2)/4 + R/(2 beta)."""
    return (R * R - np.asarray(r) ** 2) / 4.0 + R / (2.0 * beta)


def gelfand_lambda_of_c(c, beta):
    """Disk Gelfand family u = ln(8c / (lam (1 + c r^2)^2)) with Robin data at r=1.

    The boundary condition fixes lam in terms of the shape parameter c;
    beta = inf gives the Dirichlet relation lam = 8c/(1+c)^2.
    """
    base = 8.0 * c / (1.0 + c) ** 2
    if math.isinf(beta):
        return base
    return base * math.exp(-4.0 * c / (beta * (1.0 + c)))


def gelfand_lambda_star(beta):
    """Extremal parameter on the unit disk: the maximum of lam(c) over c > 0."""
    res = optimize.minimize_scalar(lambda s: -gelfand_lambda_of_c(math.exp(s), beta),
                                   bounds=(-20, 20), method="bounded",
                                   options={"xatol": 1e-12})
    return -res.fun


def gelfand_profile(c, beta):
    lam = gelfand_lambda_of_c(c, beta)

    def u(r):
        return np.log(8 * c / (lam * (1 + c * np.asarray(r) ** 2) ** 2))

    return lam, u


def shoot_gelfand(lam, u0):
    """Integrate u'' + u'/r = -lam e^u from r = 0 with u(0) = u0, u'(0) = 0.

    Returns (u(1), u'(1)).  Started at a small r with the series
    u = u0 - lam e^u0 r^2 / 4 to avoid the coordinate singularity.
    """
    r0 = 1e-6
    a = lam * math.exp(u0)
    y0 = [u0 - a * r0 * r0 / 4, -a * r0 / 2]
    sol = integrate.solve_ivp(lambda r, y: [y[1], -y[1] / r - lam * math.exp(y[0])],
                              (r0, 1.0), y0, rtol=1e-12, atol=1e-13)
    return sol.y[0, -1], sol.y[1, -1]


def shooting_lambda_star(beta, rho_max=12.0):
    """Extremal parameter by a single shot of the normalized problem.

    With v'' + v'/s = -e^v, v(0) = 0 and rho = sqrt(lam e^u0), the field
    u(r) = u0 + v(rho r) solves the disk problem; the Robin condition gives
    u0 = -v(rho) - rho v'(rho)/beta and lam = rho^2 e^(-u0).  lam* is the
    maximum of that expression over rho.
    """
    s0 = 1e-8
    sol = integrate.solve_ivp(lambda s, y: [y[1], -y[1] / s - math.exp(y[0])],
                              (s0, rho_max), [-s0 * s0 / 4, -s0 / 2],
                              rtol=1e-12, atol=1e-14, dense_output=True)

    def lam(rho):
        v, dv = sol.sol(rho)
        u0 = -v if math.isinf(beta) else -v - rho * dv / beta
        return rho * rho * math.exp(-u0)

    grid = np.linspace(0.01, rho_max, 2000)
    vals = [lam(r) for r in grid]
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda r: -lam(r), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return -res.fun
