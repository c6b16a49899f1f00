"""Lax matrices, extended-frame integration, Maurer-Cartan assembly and
the flatness / compatibility / conditions-(K) residuals.

The extended frame U(x, y; lambda) solves the right-invariant system

    U^{-1} U_x = A = -phi_x E12 + lambda E23
    U^{-1} U_y = B = (1/lambda) (-sin(phi) E13 - cos(phi) E23)

with U = I at the origin. Integration is classical RK4 along grid lines
with per-step projection back onto the orthogonal group; the lambda
derivative needed by the Sym formula is integrated jointly using the
closed-form lambda derivatives of A and B.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .algebra import E12, E13, E23, gauge_rotation
from .errors import StepFailure
from .numerics import deriv4, orthogonal_project, polar_project
from .sinegordon import AngleField

__all__ = [
    "LaxPair", "ExtendedFrame", "MaurerCartanForm", "FormField",
    "lax_matrices", "integrate_frame", "compatibility_residual",
    "maurer_cartan", "flatness_residual", "lambda_forms",
    "check_conditions_K", "gauge", "su2_frame", "sample_frame_loop",
    "save_frame", "load_frame",
]


def _lax_A(phi_x, lam):
    phi_x = np.asarray(phi_x)
    dtype = complex if np.iscomplexobj(np.asarray(lam)) else float
    out = np.zeros(np.broadcast_shapes(phi_x.shape, np.shape(lam)) + (3, 3), dtype)
    out[..., 0, 1] = -phi_x
    out[..., 1, 0] = phi_x
    out[..., 1, 2] = lam
    out[..., 2, 1] = -lam
    return out


def _lax_B(phi, lam):
    phi = np.asarray(phi)
    s, c = np.sin(phi) / lam, np.cos(phi) / lam
    dtype = complex if np.iscomplexobj(np.asarray(lam)) else float
    out = np.zeros(np.broadcast_shapes(phi.shape, np.shape(lam)) + (3, 3), dtype)
    out[..., 0, 2] = -s
    out[..., 2, 0] = s
    out[..., 1, 2] = -c
    out[..., 2, 1] = c
    return out


def _lax2_A(phi_x, lam):
    # su(2) partner of _lax_A under the spinor double cover
    phi_x = np.asarray(phi_x)
    out = np.zeros(np.broadcast_shapes(phi_x.shape, np.shape(lam)) + (2, 2), complex)
    out[..., 0, 0] = -0.5j * phi_x
    out[..., 1, 1] = 0.5j * phi_x
    out[..., 0, 1] = 0.5j * lam
    out[..., 1, 0] = 0.5j * lam
    return out


def _lax2_B(phi, lam):
    phi = np.asarray(phi)
    out = np.zeros(np.broadcast_shapes(phi.shape, np.shape(lam)) + (2, 2), complex)
    out[..., 0, 1] = -0.5j * np.exp(1j * phi) / lam
    out[..., 1, 0] = -0.5j * np.exp(-1j * phi) / lam
    return out


@dataclass(frozen=True)
class LaxPair:
    """Callable pair (A, B) of the frame system at fixed lambda."""

    lam: float

    def A(self, phi_x):
        return _lax_A(phi_x, self.lam)

    def B(self, phi):
        return _lax_B(phi, self.lam)


def lax_matrices(phi, phi_x, lam):
    """The Lax pair (A, B) at a point; both skew for real lambda."""
    return _lax_A(phi_x, lam), _lax_B(phi, lam)


@dataclass
class ExtendedFrame:
    """Grid of frame matrices U(x, y; lambda), optionally with dU/dlambda."""

    grid: object
    lam: float
    U: np.ndarray
    dU: np.ndarray = None


@dataclass
class MaurerCartanForm:
    """Coefficient fields of -U^{-1}dU = lam^{-1} a_m1 dy + a0' dx + lam a1 dx."""

    grid: object
    alpha_m1: np.ndarray
    alpha0_prime: np.ndarray
    alpha1: np.ndarray


@dataclass
class FormField:
    """Scalar 1-form p dx + q dy sampled on a grid."""

    label: str
    grid: object
    p: np.ndarray
    q: np.ndarray


class _Sampler:
    """Angle values along grid lines, exact when the field is analytic,
    cubic-spline interpolated otherwise (RK4 needs half-step values)."""

    def __init__(self, f: AngleField):
        self.f = f
        self.g = f.grid
        if not f.analytic:
            self._sp_phix = CubicSpline(self.g.xs, f.dphi_dx, axis=0)
            self._sp_phi = CubicSpline(self.g.ys, f.phi, axis=1)

    def phix_at_row(self, x, j):
        """phi_x(x, y_j) for scalar x (j may be an index array)."""
        if self.f.analytic:
            return self.f.phix_fn(x, self.g.ys[j])
        return self._sp_phix(x)[j]

    def phi_at_col(self, i, y):
        """phi(x_i, y) for scalar y (i may be an index array)."""
        if self.f.analytic:
            return self.f.phi_fn(self.g.xs[i], y)
        return self._sp_phi(y)[i]


def _rk4_pair(u, w, coeff, dcoeff, h):
    a1, a2, a3 = coeff(0.0), coeff(0.5 * h), coeff(h)
    k1 = u @ a1
    k2 = (u + 0.5 * h * k1) @ a2
    k3 = (u + 0.5 * h * k2) @ a2
    k4 = (u + h * k3) @ a3
    un = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if w is None:
        return un, None
    d1, d2, d3 = dcoeff(0.0), dcoeff(0.5 * h), dcoeff(h)
    l1 = w @ a1 + u @ d1
    l2 = (w + 0.5 * h * l1) @ a2 + (u + 0.5 * h * k1) @ d2
    l3 = (w + 0.5 * h * l2) @ a2 + (u + 0.5 * h * k2) @ d2
    l4 = (w + h * l3) @ a3 + (u + h * k3) @ d3
    wn = w + (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
    return un, wn


def _project(u, complex_mode):
    return orthogonal_project(u) if complex_mode else polar_project(u)


def _check_finite(u):
    if not np.all(np.isfinite(u)):
        raise StepFailure("frame integration produced non-finite entries")


def integrate_frame(f, lam, with_lambda_derivative=False, order="xy",
                    substeps=1, initial=None, project=True):
    """Integrate the extended frame over the whole grid from U(0,0) = I.

    order="xy" sweeps along the x axis through the origin first and then
    along every column (the default); "yx" is the transposed path, useful
    for path-independence checks. substeps > 1 subdivides each grid step
    (the spectral accuracy limit of plain RK4 at the grid step). initial
    overrides the frame at the origin (a constant SO(3) matrix).
    """
    if np.iscomplexobj(np.asarray(lam)):
        complex_mode = True
    else:
        lam = float(lam)
        if lam <= 0:
            raise ValueError("lambda must be positive")
        complex_mode = False
    g = f.grid
    i0, j0 = g.origin_index()
    s = _Sampler(f)
    dtype = complex if complex_mode else float

    U = np.zeros((g.nx, g.ny, 3, 3), dtype)
    W = np.zeros((g.nx, g.ny, 3, 3), dtype) if with_lambda_derivative else None
    u0 = np.eye(3, dtype=dtype) if initial is None else np.asarray(initial, dtype)

    dE23 = E23.astype(dtype)

    def sweep_x(u, w, i_start, direction, j):
        """March u (batched over j) along x from node i_start; yields per node."""
        i = i_start
        while 0 <= i + direction < g.nx:
            h = direction * g.hx / substeps
            for k in range(substeps):
                x = g.xs[i] + direction * g.hx * k / substeps

                def coeff(t):
                    return _lax_A(s.phix_at_row(x + t, j), lam)

                u, w = _rk4_pair(u, w, coeff, lambda t: dE23, h)
            if project:
                u = _project(u, complex_mode)
            i += direction
            yield i, u, w

    def sweep_y(u, w, j_start, direction, i):
        j = j_start
        while 0 <= j + direction < g.ny:
            h = direction * g.hy / substeps
            for k in range(substeps):
                y = g.ys[j] + direction * g.hy * k / substeps

                def coeff(t):
                    return _lax_B(s.phi_at_col(i, y + t), lam)

                def dcoeff(t):
                    return -coeff(t) / lam

                u, w = _rk4_pair(u, w, coeff, dcoeff, h)
            if project:
                u = _project(u, complex_mode)
            j += direction
            yield j, u, w

    def fill_xy():
        U[i0, j0] = u0
        if W is not None:
            W[i0, j0] = 0.0
        w0 = np.zeros((3, 3), dtype) if W is not None else None
        for direction in (1, -1):
            for i, u, w in sweep_x(u0, w0, i0, direction, j0):
                U[i, j0] = u
                if W is not None:
                    W[i, j0] = w
        all_i = np.arange(g.nx)
        for direction in (1, -1):
            uc = U[:, j0].copy()
            wc = W[:, j0].copy() if W is not None else None
            for j, u, w in sweep_y(uc, wc, j0, direction, all_i):
                U[:, j] = u
                if W is not None:
                    W[:, j] = w
                uc, wc = u, w

    def fill_yx():
        U[i0, j0] = u0
        if W is not None:
            W[i0, j0] = 0.0
        w0 = np.zeros((3, 3), dtype) if W is not None else None
        for direction in (1, -1):
            for j, u, w in sweep_y(u0, w0, j0, direction, i0):
                U[i0, j] = u
                if W is not None:
                    W[i0, j] = w
        all_j = np.arange(g.ny)
        for direction in (1, -1):
            ur = U[i0, :].copy()
            wr = W[i0, :].copy() if W is not None else None
            for i, u, w in sweep_x(ur, wr, i0, direction, all_j):
                U[i, :] = u
                if W is not None:
                    W[i, :] = w
                ur, wr = u, w

    if order == "xy":
        fill_xy()
    elif order == "yx":
        fill_yx()
    else:
        raise ValueError("order must be 'xy' or 'yx'")
    _check_finite(U)
    return ExtendedFrame(g, lam, U, W)


def compatibility_residual(f, lam):
    """Frobenius norm of A_y - B_x - [A, B] per node.

    Vanishes exactly when phi solves the sine-Gordon equation; uses
    analytic derivatives of phi when the field carries them.
    """
    phi = f.phi
    phi_x = f.dphi_dx
    phi_xy = f.phi_xy()
    A = _lax_A(phi_x, lam)
    B = _lax_B(phi, lam)
    A_y = -phi_xy[..., None, None] * E12
    B_x = (phi_x / lam)[..., None, None] * (-np.cos(phi)[..., None, None] * E13
                                            + np.sin(phi)[..., None, None] * E23)
    R = A_y - B_x - (A @ B - B @ A)
    return np.linalg.norm(R, axis=(-2, -1))


def maurer_cartan(f):
    """Coefficient fields of the extended Maurer-Cartan form.

    alpha0' = phi_x E12 (dx), alpha_m1 = sin(phi) E13 + cos(phi) E23 (dy),
    alpha1 = -E23 (dx, constant over the grid).
    """
    phi = f.phi
    shape = phi.shape
    a_m1 = np.sin(phi)[..., None, None] * E13 + np.cos(phi)[..., None, None] * E23
    a0p = f.dphi_dx[..., None, None] * E12
    a1 = np.broadcast_to(-E23, shape + (3, 3)).copy()
    return MaurerCartanForm(f.grid, a_m1, a0p, a1)


def flatness_residual(form, lam):
    """Zero-curvature residual of the assembled form at one lambda.

    With omega = p dx + q dy built from the coefficient fields, returns the
    per-node Frobenius norm of (q_x - p_y) - (p q - q p), the discrete
    residual of the frame equations' integrability; its (1,2) entry is the
    sine-Gordon defect sin(phi) - phi_xy up to discretization.
    """
    g = form.grid
    p = form.alpha0_prime + lam * form.alpha1
    q = form.alpha_m1 / lam
    dpq = deriv4(q, g.hx, axis=0) - deriv4(p, g.hy, axis=1)
    R = dpq - (p @ q - q @ p)
    return np.linalg.norm(R, axis=(-2, -1))


def lambda_forms(f, lam):
    """The five lambda-transformed scalar forms on the grid.

    omega1 = cos(phi/2)(dx/lam + lam dy), omega2 = sin(phi/2)(dx/lam - lam dy),
    omega12 = (phi_x dx - phi_y dy)/2, omega13 = sin(phi/2)(dx/lam + lam dy),
    omega23 = -cos(phi/2)(dx/lam - lam dy).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    g = f.grid
    c, s = np.cos(f.phi / 2.0), np.sin(f.phi / 2.0)
    phi_x, phi_y = f.dphi_dx, f.phi_y()
    li = 1.0 / lam
    return {
        "omega1": FormField("omega1", g, c * li, c * lam),
        "omega2": FormField("omega2", g, s * li, -s * lam),
        "omega12": FormField("omega12", g, phi_x / 2.0, -phi_y / 2.0),
        "omega13": FormField("omega13", g, s * li, s * lam),
        "omega23": FormField("omega23", g, -c * li, c * lam),
    }


def _d(form):
    g = form.grid
    return deriv4(form.q, g.hx, axis=0) - deriv4(form.p, g.hy, axis=1)


def _wedge(a, b):
    return a.p * b.q - a.q * b.p


def check_conditions_K(forms):
    """Residual grids of the seven structure equations for a pseudospherical
    frame; keys 'a'..'g'. 'c' carries the sine-Gordon equation, 'f' and 'g'
    are algebraic identities of the lambda-form construction."""
    w1, w2 = forms["omega1"], forms["omega2"]
    w12, w13, w23 = forms["omega12"], forms["omega13"], forms["omega23"]
    return {
        "a": _d(w1) - _wedge(w12, w2),
        "b": _d(w2) - _wedge(w1, w12),
        "c": _d(w12) + _wedge(w13, w23),
        "d": _d(w13) - _wedge(w12, w23),
        "e": _d(w23) - _wedge(w13, w12),
        "f": _wedge(w1, w13) + _wedge(w2, w23),
        "g": _wedge(w1, w2) + _wedge(w13, w23),
    }


def gauge(frame, theta):
    """Right gauge action U -> U R(theta)^{-1}; the Gauss map (third
    column) is untouched."""
    theta = np.broadcast_to(np.asarray(theta, dtype=float),
                            (frame.grid.nx, frame.grid.ny))
    rinv = np.swapaxes(gauge_rotation(theta), -1, -2)
    dU = None if frame.dU is None else frame.dU @ rinv
    return ExtendedFrame(frame.grid, frame.lam, frame.U @ rinv, dU)


def su2_frame(f, lam, order="xy", substeps=1, project=True):
    """Integrate the 2x2 spinor frame P with P(0,0) = I.

    The su(2) Lax matrices are the images of A and B under the double
    cover differential, so adjoint_map(P) reproduces the 3x3 frame.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    g = f.grid
    i0, j0 = g.origin_index()
    s = _Sampler(f)
    P = np.zeros((g.nx, g.ny, 2, 2), complex)

    def proj(u):
        return polar_project(u) if project else u

    def step_x(u, i, direction, j):
        h = direction * g.hx / substeps
        for k in range(substeps):
            x = g.xs[i] + direction * g.hx * k / substeps
            u, _ = _rk4_pair(u, None, lambda t: _lax2_A(s.phix_at_row(x + t, j), lam),
                             None, h)
        return proj(u)

    def step_y(u, j, direction, i):
        h = direction * g.hy / substeps
        for k in range(substeps):
            y = g.ys[j] + direction * g.hy * k / substeps
            u, _ = _rk4_pair(u, None, lambda t: _lax2_B(s.phi_at_col(i, y + t), lam),
                             None, h)
        return proj(u)

    if order != "xy":
        raise ValueError("su2_frame integrates along the xy path")
    P[i0, j0] = np.eye(2)
    for direction in (1, -1):
        u = np.eye(2, dtype=complex)
        i = i0
        while 0 <= i + direction < g.nx:
            u = step_x(u, i, direction, j0)
            i += direction
            P[i, j0] = u
    all_i = np.arange(g.nx)
    for direction in (1, -1):
        u = P[:, j0].copy()
        j = j0
        while 0 <= j + direction < g.ny:
            u = step_y(u, j, direction, all_i)
            j += direction
            P[:, j] = u
    _check_finite(P)
    return P


def save_frame(frame, path):
    """Dump a frame grid to CSV (9 row-major entries per node) or, when
    the path ends in .npz, to a binary archive. The header repeats the
    grid layout and lambda."""
    g = frame.grid
    path = str(path)
    if path.endswith(".npz"):
        np.savez(path, U=frame.U, lam=frame.lam,
                 grid=np.array([g.x0, g.y0, g.nx, g.ny, g.hx, g.hy]))
        return
    header = (f"# {g.nx} {g.ny} {g.x0:.17g} {g.y0:.17g} "
              f"{g.hx:.17g} {g.hy:.17g} {frame.lam:.17g}")
    lines = [header]
    for i in range(g.nx):
        for j in range(g.ny):
            lines.append(",".join(f"{v:.17g}" for v in frame.U[i, j].ravel()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_frame(path):
    """Read a frame written by save_frame back into an ExtendedFrame."""
    from .sinegordon import GridSpec

    path = str(path)
    if path.endswith(".npz"):
        data = np.load(path)
        x0, y0, nx, ny, hx, hy = data["grid"]
        grid = GridSpec(float(x0), float(y0), int(nx), int(ny),
                        float(hx), float(hy))
        return ExtendedFrame(grid, float(data["lam"]), data["U"])
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "#" or len(header) != 8:
            raise ValueError(f"{path}: malformed frame header")
        nx, ny = int(header[1]), int(header[2])
        x0, y0, hx, hy, lam = map(float, header[3:8])
        rows = [np.fromstring(line, sep=",") for line in fh if line.strip()]
    if len(rows) != nx * ny or any(r.size != 9 for r in rows):
        raise ValueError(f"{path}: data block does not match header")
    U = np.stack(rows).reshape(nx, ny, 3, 3)
    return ExtendedFrame(GridSpec(x0, y0, nx, ny, hx, hy), lam, U)


def sample_frame_loop(f, i, j, n=64, substeps=1):
    """Frame loop lambda -> U(x_i, y_j; lambda) at the n-th roots of unity.

    Integrates the Lax system jointly for all sample points along the path
    origin -> (x_i, y_origin) -> (x_i, y_j). The result is twisted and has
    real Fourier coefficients (conjugation symmetry of the Lax system).
    """
    from .loops import SampledLoop

    g = f.grid
    i0, j0 = g.origin_index()
    s = _Sampler(f)
    lams = np.exp(2j * np.pi * np.arange(n) / n)
    u = np.broadcast_to(np.eye(3, dtype=complex), (n, 3, 3)).copy()

    direction = 1 if i >= i0 else -1
    ii = i0
    while ii != i:
        h = direction * g.hx / substeps
        for k in range(substeps):
            x = g.xs[ii] + direction * g.hx * k / substeps
            u, _ = _rk4_pair(u, None,
                             lambda t: _lax_A(s.phix_at_row(x + t, j0), lams),
                             None, h)
        u = orthogonal_project(u)
        ii += direction

    direction = 1 if j >= j0 else -1
    jj = j0
    while jj != j:
        h = direction * g.hy / substeps
        for k in range(substeps):
            y = g.ys[jj] + direction * g.hy * k / substeps
            u, _ = _rk4_pair(u, None,
                             lambda t: _lax_B(s.phi_at_col(i, y + t), lams),
                             None, h)
        u = orthogonal_project(u)
        jj += direction
    _check_finite(u)
    return SampledLoop(u, twisted=True, real=True)
