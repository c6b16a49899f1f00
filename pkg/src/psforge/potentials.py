"""Weierstrass-type data of a pseudospherical surface: the normalized x-
and y-potentials in closed form, their 2x2 spinor versions, ODE
integration of the Birkhoff factors, and cross-validation against
numerical splitting of the frame loop.

Both potentials are p-valued axis forms (span of E13, E23) determined by
the angle restricted to the axes: eta_x by conjugating the constant -E23
with the accumulated rotation of angle phi(0,0) - phi(x,0), eta_y equal to
the boundary form gamma1 itself.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .algebra import E13, E23, gauge_rotation
from .errors import NonpositiveProfile, StepFailure
from .frames import _rk4_pair, sample_frame_loop
from .loops import birkhoff_split, loop_eval
from .numerics import orthogonal_project, polar_project

__all__ = [
    "PotentialForm", "BoundaryForms", "boundary_forms", "rotation_V0",
    "eta_x", "eta_y", "eta_2x2", "eta_general",
    "integrate_plus", "integrate_minus", "cross_check_split",
    "save_potential_csv", "load_potential_csv", "save_potential2_csv",
]


@dataclass
class PotentialForm:
    """Lie-algebra-valued 1-form sampled along one axis.

    samples[k] is the matrix coefficient of dx (axis 'x') or dy ('y') at
    the k-th axis node; lambda_power records how the meromorphic form
    scales: xi^x = lambda * eta^x (+1), xi^y = eta^y / lambda (-1).
    """

    axis: str
    coords: np.ndarray
    samples: np.ndarray
    lambda_power: int


@dataclass
class BoundaryForms:
    """Axis restrictions of the Maurer-Cartan coefficients.

    beta0/beta1 sample the dx part along y=0, gamma0/gamma1 the dy part
    along x=0; gamma0 is identically zero and beta1 constant -E23.
    """

    xs: np.ndarray
    ys: np.ndarray
    beta0: np.ndarray
    beta1: np.ndarray
    gamma0: np.ndarray
    gamma1: np.ndarray


def _axis_data(f):
    i0, j0 = f.grid.origin_index()
    return i0, j0, f.phi[:, j0], f.phi[i0, :]


def boundary_forms(f):
    """Restrict the Maurer-Cartan coefficient fields to the two axes."""
    i0, j0, xrow, ycol = _axis_data(f)
    nx, ny = f.grid.nx, f.grid.ny
    beta0 = f.dphi_dx[:, j0][:, None, None] * np.broadcast_to(
        np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]), (nx, 3, 3))
    beta1 = np.broadcast_to(-E23, (nx, 3, 3)).copy()
    gamma0 = np.zeros((ny, 3, 3))
    gamma1 = np.sin(ycol)[:, None, None] * E13 + np.cos(ycol)[:, None, None] * E23
    return BoundaryForms(f.grid.xs, f.grid.ys, beta0, beta1, gamma0, gamma1)


def rotation_V0(f):
    """The rotation exp(theta(0) - theta(x)) conjugating beta1 into eta_x
    (angle phi(0,0) - phi(x,0) around e3), sampled on the x axis."""
    i0, _, xrow, _ = _axis_data(f)
    return gauge_rotation(xrow[i0] - xrow)


def eta_x(f):
    """Normalized x-potential in closed form.

    With delta(x) = phi(0,0) - phi(x,0), the coefficient of dx is
    -sin(delta) E13 - cos(delta) E23; at x = 0 it equals beta1 = -E23.
    """
    i0, _, xrow, _ = _axis_data(f)
    delta = xrow[i0] - xrow
    samples = -np.sin(delta)[:, None, None] * E13 \
        - np.cos(delta)[:, None, None] * E23
    return PotentialForm("x", f.grid.xs, samples, +1)


def eta_y(f):
    """Normalized y-potential: exactly the boundary form gamma1."""
    _, _, _, ycol = _axis_data(f)
    samples = np.sin(ycol)[:, None, None] * E13 + np.cos(ycol)[:, None, None] * E23
    return PotentialForm("y", f.grid.ys, samples, -1)


def eta_2x2(f):
    """2x2 spinor forms of the two potentials.

    eta_x: (i/2) antidiag(e^{i d}, e^{-i d}) dx with d = phi(x,0)-phi(0,0);
    eta_y: -(i/2) antidiag(e^{-i phi(0,y)}, e^{i phi(0,y)}) dy. The product
    of the off-diagonal entries is -1/4 for both (Chebyshev profiles).
    """
    i0, _, xrow, ycol = _axis_data(f)
    d = xrow - xrow[i0]
    ex = np.zeros((len(xrow), 2, 2), complex)
    ex[:, 0, 1] = 0.5j * np.exp(1j * d)
    ex[:, 1, 0] = 0.5j * np.exp(-1j * d)
    ey = np.zeros((len(ycol), 2, 2), complex)
    ey[:, 0, 1] = -0.5j * np.exp(-1j * ycol)
    ey[:, 1, 0] = -0.5j * np.exp(1j * ycol)
    return (PotentialForm("x", f.grid.xs, ex, +1),
            PotentialForm("y", f.grid.ys, ey, -1))


def eta_general(f, Afn, Bfn):
    """2x2 potentials of a weakly regular (non-Chebyshev) parametrization
    with metric profiles A(x), B(y); reduces to eta_2x2 when A = B = 1.

    Afn/Bfn may be callables on the axis coordinates or sample arrays.
    Raises NonpositiveProfile unless both profiles are strictly positive.
    """
    xs, ys = f.grid.xs, f.grid.ys
    A = np.asarray(Afn(xs) if callable(Afn) else Afn, dtype=float)
    B = np.asarray(Bfn(ys) if callable(Bfn) else Bfn, dtype=float)
    if A.shape != xs.shape or B.shape != ys.shape:
        raise ValueError("profile samples must match the axis nodes")
    if np.any(A <= 0) or np.any(B <= 0):
        raise NonpositiveProfile("metric profiles must be strictly positive")
    ex, ey = eta_2x2(f)
    return (PotentialForm("x", xs, A[:, None, None] * ex.samples, +1),
            PotentialForm("y", ys, B[:, None, None] * ey.samples, -1))


def _integrate_axis(pot, factor, origin_idx, substeps, project):
    """Solve U' = U * (factor * eta(t)) from the origin node outward."""
    coords = pot.coords
    spline = CubicSpline(coords, pot.samples, axis=0)
    n = len(coords)
    complex_mode = np.iscomplexobj(np.asarray(factor)) \
        or np.iscomplexobj(pot.samples)
    dtype = complex if complex_mode else float
    out = np.zeros((n, 3, 3), dtype)
    out[origin_idx] = np.eye(3)
    h_grid = coords[1] - coords[0]
    for direction in (1, -1):
        u = np.eye(3, dtype=dtype)
        k = origin_idx
        while 0 <= k + direction < n:
            h = direction * h_grid / substeps
            for m in range(substeps):
                t0 = coords[k] + direction * h_grid * m / substeps
                u, _ = _rk4_pair(u, None,
                                 lambda t: factor * spline(t0 + t), None, h)
            if project:
                u = orthogonal_project(u) if complex_mode else polar_project(u)
            k += direction
            out[k] = u
    if not np.all(np.isfinite(out)):
        raise StepFailure("potential integration produced non-finite entries")
    return out


def integrate_plus(pot, lam, substeps=4, project=True):
    """Integrate the plus Birkhoff factor: U+^{-1} dU+/dx = -lambda eta_x,
    U+(0) = I. Returns the factor along the x axis at one lambda (complex
    lambda admitted for circle sampling)."""
    if pot.axis != "x":
        raise ValueError("integrate_plus consumes an x-potential")
    if not np.iscomplexobj(np.asarray(lam)) and lam <= 0:
        raise ValueError("lambda must be positive")
    i0 = int(np.argmin(np.abs(pot.coords)))
    return _integrate_axis(pot, -lam, i0, substeps, project)


def integrate_minus(pot, lam, substeps=4, project=True):
    """Integrate the minus Birkhoff factor: U-^{-1} dU-/dy = -eta_y/lambda,
    U-(0) = I. Returns the factor along the y axis at one lambda."""
    if pot.axis != "y":
        raise ValueError("integrate_minus consumes a y-potential")
    if not np.iscomplexobj(np.asarray(lam)) and lam <= 0:
        raise ValueError("lambda must be positive")
    j0 = int(np.argmin(np.abs(pot.coords)))
    return _integrate_axis(pot, -1.0 / lam, j0, substeps, project)


def cross_check_split(f, i, j, lam_eval=1.0, n_samples=64, substeps=2,
                      split_tol=1e-6):
    """Compare potential-integrated Birkhoff factors with factors from
    numerically splitting the sampled frame loop at node (i, j).

    Splits U(x_i, y_j, .) both ways, evaluates the plus/minus factors at
    lam_eval against the ODE solutions driven by eta_x / eta_y, and, when
    j is off the x axis, re-splits on the axis to verify that the plus
    factor does not depend on y. On the axis the constant complementary
    factor is checked against the closed-form rotation V0. Returns a dict
    of sup deviations.
    """
    g = f.grid
    i0, j0 = g.origin_index()
    loop = sample_frame_loop(f, i, j, n=n_samples, substeps=substeps)
    u_plus, v_minus = birkhoff_split(loop, "plus-first", tol=split_tol)
    u_minus, v_plus = birkhoff_split(loop, "minus-first", tol=split_tol)

    plus_ode = integrate_plus(eta_x(f), lam_eval)[i]
    minus_ode = integrate_minus(eta_y(f), lam_eval)[j]
    report = {
        "plus_factor_dev": float(np.abs(
            loop_eval(u_plus, lam_eval) - plus_ode).max()),
        "minus_factor_dev": float(np.abs(
            loop_eval(u_minus, lam_eval) - minus_ode).max()),
    }
    if j != j0:
        axis_loop = sample_frame_loop(f, i, j0, n=n_samples, substeps=substeps)
        u_plus_axis, _ = birkhoff_split(axis_loop, "plus-first", tol=split_tol)
        ks = set(u_plus.coeffs) | set(u_plus_axis.coeffs)
        dev = max(np.abs(u_plus.coeff(k) - u_plus_axis.coeff(k)).max()
                  for k in ks)
        report["uplus_y_independence"] = float(dev)
    else:
        # on the axis the complement of U+ is the constant rotation V0
        i0_, _, xrow, _ = _axis_data(f)
        v0 = gauge_rotation(xrow[i0_] - xrow[i])
        report["v0_dev"] = float(np.abs(
            loop_eval(v_minus, lam_eval) - v0).max())
    return report


_COLS = [(0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)]


def save_potential_csv(pot, path):
    """Write a 3x3 potential: axis, coordinate, then the six off-diagonal
    entries s12,s13,s23,s21,s31,s32 of the (skew) coefficient matrix."""
    lines = ["# axis,coord,s12,s13,s23,s21,s31,s32"]
    for c, m in zip(pot.coords, pot.samples):
        vals = ",".join(f"{m[r, s]:.17g}" for r, s in _COLS)
        lines.append(f"{pot.axis},{c:.17g},{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_potential_csv(path):
    axis = None
    coords, mats = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            axis = parts[0]
            coords.append(float(parts[1]))
            m = np.zeros((3, 3))
            for (r, s), v in zip(_COLS, parts[2:8]):
                m[r, s] = float(v)
            mats.append(m)
    if axis not in ("x", "y"):
        raise ValueError(f"{path}: unknown potential axis {axis!r}")
    return PotentialForm(axis, np.asarray(coords), np.stack(mats),
                         +1 if axis == "x" else -1)


def save_potential2_csv(pot, path):
    """Write a 2x2 potential: axis, coordinate, re/im of both off-diagonal
    entries."""
    lines = ["# axis,coord,re01,im01,re10,im10"]
    for c, m in zip(pot.coords, pot.samples):
        lines.append(f"{pot.axis},{c:.17g},{m[0, 1].real:.17g},"
                     f"{m[0, 1].imag:.17g},{m[1, 0].real:.17g},{m[1, 0].imag:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
