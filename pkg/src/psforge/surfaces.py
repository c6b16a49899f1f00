"""Sym reconstruction of immersions, fundamental forms and curvatures,
Gauss map, Lorentz-harmonicity checks and the associated family.

The immersion is read off the extended frame as psi = lam * dU/dlam * U^{-1},
an so(3)-valued field converted to points of R^3 through the hat-map
convention of the algebra module. All derivative estimates on the grid are
4th-order centered differences; nodes where the induced metric degenerates
(sin(phi) -> 0, the cuspidal edges) are masked, not fatal.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import IOFailure, NotSkew, SingularAngle
from .frames import integrate_frame
from .numerics import deriv4

__all__ = [
    "Immersion", "SurfaceGeometry", "HarmonicityReport",
    "sym_immersion", "fundamental_forms", "principal_curvatures",
    "gauss_map", "harmonicity_check", "associated_family",
    "export_mesh", "read_obj", "worker_count",
]


@dataclass
class Immersion:
    """Grid of points of one member of the associated family."""

    grid: object
    lam: float
    points: np.ndarray


@dataclass
class SurfaceGeometry:
    """Per-node first/second fundamental forms and derived curvatures.

    mask is True where the metric is non-degenerate; K, H, k1, k2 and the
    cross-product Gauss map are NaN on masked-out nodes.
    """

    grid: object
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N2: np.ndarray
    K: np.ndarray
    H: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    metricA: np.ndarray
    metricB: np.ndarray
    gaussmap: np.ndarray
    mask: np.ndarray


@dataclass
class HarmonicityReport:
    """Pointwise decomposition of N_xy against the normal direction."""

    q: np.ndarray
    tangential_residual: np.ndarray
    nx_norm: np.ndarray
    ny_norm: np.ndarray


def worker_count(n_jobs):
    """Thread budget: min(jobs, cpu count, PSFORGE_THREADS if set)."""
    cap = os.cpu_count() or 1
    env = os.environ.get("PSFORGE_THREADS")
    if env:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError:
            pass
    return max(1, min(n_jobs, cap))


def sym_immersion(f, lam, substeps=2, skew_tol=1e-6, frame=None):
    """Reconstruct the immersion psi = lam * dU/dlam * U^{-1}.

    psi vanishes at the origin because U(0,0) = I for every lambda. A
    pre-integrated frame (carrying dU) can be passed to skip integration.
    Raises NotSkew when the Sym matrix drifts off so(3), which signals an
    integration failure.
    """
    if frame is None:
        frame = integrate_frame(f, lam, with_lambda_derivative=True,
                                substeps=substeps)
    if frame.dU is None:
        raise ValueError("frame must carry the lambda derivative")
    S = lam * (frame.dU @ np.swapaxes(frame.U, -1, -2))
    dev = np.abs(S + np.swapaxes(S, -1, -2)).max()
    if dev > skew_tol:
        raise NotSkew(f"Sym matrix deviates from so(3) by {dev:.3e}")
    from .algebra import unhat
    return Immersion(f.grid, lam, unhat(S, check=False))


def fundamental_forms(s, degenerate_eps=1e-4):
    """First/second fundamental forms, curvatures and cross-product normal
    from an immersion, by 4th-order differences (grid at least 5x5).

    Nodes with E*G - F^2 < degenerate_eps are masked: the normal and every
    normal-dependent quantity are NaN there, the first-form coefficients
    are kept.
    """
    g = s.grid
    if g.nx < 5 or g.ny < 5:
        raise ValueError("fundamental forms need a grid of at least 5x5")
    p = s.points
    px = deriv4(p, g.hx, axis=0)
    py = deriv4(p, g.hy, axis=1)
    E = (px * px).sum(-1)
    F = (px * py).sum(-1)
    G = (py * py).sum(-1)
    det = E * G - F * F
    mask = det > degenerate_eps

    cross = np.cross(px, py)
    cn = np.linalg.norm(cross, axis=-1)
    safe = np.where(cn > 0, cn, 1.0)
    normal = np.where(mask[..., None], cross / safe[..., None], np.nan)

    pxx = deriv4(px, g.hx, axis=0)
    pxy = deriv4(px, g.hy, axis=1)
    pyy = deriv4(py, g.hy, axis=1)
    L = (pxx * normal).sum(-1)
    M = (pxy * normal).sum(-1)
    N2 = (pyy * normal).sum(-1)

    with np.errstate(invalid="ignore", divide="ignore"):
        K = np.where(mask, (L * N2 - M * M) / det, np.nan)
        H = np.where(mask, (E * N2 - 2.0 * F * M + G * L) / (2.0 * det), np.nan)
        disc = np.sqrt(np.maximum(H * H - K, 0.0))
    k1 = H + disc
    k2 = H - disc
    return SurfaceGeometry(g, E, F, G, L, M, N2, K, H, k1, k2,
                           np.sqrt(E), np.sqrt(G), normal, mask)


def principal_curvatures(phi):
    """Closed-form principal curvatures (tan(phi/2), -cot(phi/2)).

    Their product is -1. Raises SingularAngle when sin(phi) vanishes.
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(np.abs(np.sin(phi)) < 1e-12):
        raise SingularAngle("principal curvatures undefined where sin(phi) = 0")
    return np.tan(phi / 2.0), -1.0 / np.tan(phi / 2.0)


def gauss_map(frame, verify_parallel_tol=None):
    """Gauss map as the third frame column (unit normal field).

    With verify_parallel_tol set, also checks that the vector read off the
    adjoint orbit U E12 U^{-1} through the hat map is parallel to the same
    axis (the two identifications agree up to orientation only).
    """
    N = frame.U[..., :, 2]
    if verify_parallel_tol is not None:
        from .algebra import E12
        orbit = frame.U @ E12 @ np.swapaxes(frame.U, -1, -2)
        v = np.stack([orbit[..., 2, 1], orbit[..., 0, 2], orbit[..., 1, 0]],
                     axis=-1)
        dev = np.abs(np.cross(v, N)).max()
        if dev > verify_parallel_tol:
            raise AssertionError(f"adjoint-orbit axis deviates by {dev:.3e}")
    return N


def harmonicity_check(N, geom=None, grid=None):
    """Lorentz-harmonicity diagnostics of a unit normal field.

    q is the normal component of N_xy; tangential_residual the norm of the
    rest (zero for a harmonic Gauss map). nx_norm/ny_norm are |N_x|, |N_y|
    for comparison with the metric factors A, B of geom.
    """
    if grid is None:
        if geom is None:
            raise ValueError("need geom or grid to fix the mesh spacing")
        grid = geom.grid
    if grid.nx < 5 or grid.ny < 5:
        raise ValueError("harmonicity check needs a grid of at least 5x5")
    Nx = deriv4(N, grid.hx, axis=0)
    Nxy = deriv4(Nx, grid.hy, axis=1)
    Ny = deriv4(N, grid.hy, axis=1)
    q = (Nxy * N).sum(-1)
    tang = Nxy - q[..., None] * N
    return HarmonicityReport(q, np.linalg.norm(tang, axis=-1),
                             np.linalg.norm(Nx, axis=-1),
                             np.linalg.norm(Ny, axis=-1))


def associated_family(f, lambdas, substeps=2, workers=None):
    """Sym immersion and geometry for each lambda, plus invariance report.

    Members are computed concurrently (capped by PSFORGE_THREADS). The
    report holds the sup deviation across members of the mixed second-form
    coefficient M and of the recovered asymptotic angle from phi, both on
    the non-degenerate mask intersection.
    """
    lambdas = [float(l) for l in lambdas]
    if any(l <= 0 for l in lambdas):
        raise ValueError("every lambda must be positive")

    def member(lam):
        s = sym_immersion(f, lam, substeps=substeps)
        return s, fundamental_forms(s)

    if workers is None:
        workers = worker_count(len(lambdas))
    if workers > 1 and len(lambdas) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(member, lambdas))
    else:
        members = [member(l) for l in lambdas]

    mask = np.logical_and.reduce([geom.mask for _, geom in members])
    Ms = np.stack([geom.M for _, geom in members])
    m_dev = float(np.ptp(Ms[:, mask], axis=0).max()) if mask.any() else np.nan
    # the unsigned angle between unit tangents recovers phi folded into
    # [0, pi]; compare against the same folding of the field
    phi_fold = np.arccos(np.clip(np.cos(f.phi[mask]), -1.0, 1.0))
    angle_dev = 0.0
    for _, geom in members:
        cosang = geom.F / (geom.metricA * geom.metricB)
        ang = np.arccos(np.clip(cosang[mask], -1.0, 1.0))
        angle_dev = max(angle_dev, float(np.abs(ang - phi_fold).max()))
    report = {
        "lambdas": lambdas,
        "M_deviation_sup": m_dev,
        "angle_deviation_sup": angle_dev,
        "metricA_mean": [float(np.nanmean(geom.metricA[mask]))
                         for _, geom in members],
        "metricB_mean": [float(np.nanmean(geom.metricB[mask]))
                         for _, geom in members],
    }
    return members, report


def export_mesh(s, path, mask=None):
    """Write the immersion as a Wavefront OBJ triangle mesh.

    Vertices appear in row-major node order; each grid cell contributes
    two triangles. Faces touching a masked-out node are dropped.
    """
    g = s.grid
    p = s.points
    if mask is None:
        mask = np.ones((g.nx, g.ny), dtype=bool)
    try:
        with open(path, "w") as fh:
            for i in range(g.nx):
                for j in range(g.ny):
                    x, y, z = p[i, j]
                    fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
            for i in range(g.nx - 1):
                for j in range(g.ny - 1):
                    if not (mask[i, j] and mask[i + 1, j]
                            and mask[i, j + 1] and mask[i + 1, j + 1]):
                        continue
                    a = i * g.ny + j + 1
                    b = (i + 1) * g.ny + j + 1
                    c = (i + 1) * g.ny + j + 2
                    d = i * g.ny + j + 2
                    fh.write(f"f {a} {b} {c}\n")
                    fh.write(f"f {a} {c} {d}\n")
    except OSError as exc:
        raise IOFailure(f"cannot write mesh to {path}: {exc}") from exc


def read_obj(path):
    """Parse vertices and faces back from an OBJ file (round-trip check)."""
    verts, faces = [], []
    try:
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "v":
                    verts.append([float(v) for v in parts[1:4]])
                elif parts[0] == "f":
                    faces.append([int(v.split("/")[0]) for v in parts[1:4]])
    except OSError as exc:
        raise IOFailure(f"cannot read mesh from {path}: {exc}") from exc
    return np.asarray(verts), np.asarray(faces, dtype=int)
