"""Fixed-size matrix kernels: so(3)/su(2) dictionaries, basis constants,
rotations and the Wiener matrix norm.

All 3x3 geometric data is real; complex numbers enter only on the 2x2 side.
Most functions accept batched arrays (leading axes are broadcast).
"""

import numpy as np

from .errors import NotSkew, NotUnitary

__all__ = [
    "E12", "E13", "E23", "P_TWIST", "SIGMA1", "SIGMA2", "SIGMA3",
    "wiener_matrix_norm", "hat", "unhat", "gauge_rotation",
    "spinor_map", "spinor_unmap", "adjoint_map",
    "so3_to_su2", "su2_to_so3",
]


def _basis(i, j):
    m = np.zeros((3, 3))
    m[i, j] = 1.0
    m[j, i] = -1.0
    return m


# S_ij basis of so(3): (i,j)-entry 1, (j,i)-entry -1.
E12 = _basis(0, 1)
E13 = _basis(0, 2)
E23 = _basis(1, 2)

# Twist involution matrix: conjugation by P flips the sign of E13 and E23
# and fixes E12.
P_TWIST = np.diag([1.0, 1.0, -1.0])

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def wiener_matrix_norm(a):
    """Maximum absolute row sum of a matrix (batched over leading axes)."""
    a = np.asarray(a)
    return np.abs(a).sum(axis=-1).max(axis=-1)


def hat(v):
    """3-vector -> skew matrix such that hat(v) @ u = v x u."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 1, 0] = v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 2, 0] = -v[..., 1]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 1] = v[..., 0]
    return out


def unhat(s, tol=1e-9, check=True):
    """Inverse of hat: reads (S32, S13, S21) off a skew matrix.

    Raises NotSkew when ||S + S^T|| exceeds tol (set check=False to skip).
    """
    s = np.asarray(s)
    if check:
        dev = np.abs(s + np.swapaxes(s, -1, -2)).max()
        if dev > tol:
            raise NotSkew(f"matrix deviates from skew-symmetry by {dev:.3e}")
    return np.stack([s[..., 2, 1], s[..., 0, 2], s[..., 1, 0]], axis=-1)


def gauge_rotation(theta):
    """Rotation of angle theta around e3 (batched over theta's shape)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(theta.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = -s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def spinor_map(r):
    """J(r) = -(i/2) r.sigma, identifying R^3 with su(2).

    Linear, and intertwines the cross product with the commutator:
    J(r1 x r2) = [J(r1), J(r2)].
    """
    r = np.asarray(r)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    out = np.zeros(r.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = -0.5j * z
    out[..., 0, 1] = -0.5j * x - 0.5 * y
    out[..., 1, 0] = -0.5j * x + 0.5 * y
    out[..., 1, 1] = 0.5j * z
    return out


def spinor_unmap(m):
    """Inverse of spinor_map on su(2) (anti-Hermitian traceless input)."""
    m = np.asarray(m)
    x = (1j * (m[..., 0, 1] + m[..., 1, 0])).real
    y = (m[..., 1, 0] - m[..., 0, 1]).real
    z = (1j * (m[..., 0, 0] - m[..., 1, 1])).real
    return np.stack([x, y, z], axis=-1)


def adjoint_map(p, tol=1e-9):
    """SO(3) image of an SU(2) matrix under the spinor double cover.

    Column k of the result is the spinor_map preimage of p J(e_k) p^{-1}.
    A group homomorphism with adjoint_map(p) == adjoint_map(-p).
    Raises NotUnitary when p fails unitarity (or |det p - 1|) at tol.
    """
    p = np.asarray(p, dtype=complex)
    ph = np.conj(np.swapaxes(p, -1, -2))
    dev = np.abs(ph @ p - np.eye(2)).max()
    if dev > tol:
        raise NotUnitary(f"matrix deviates from unitarity by {dev:.3e}")
    ddev = np.abs(np.linalg.det(p) - 1.0).max()
    if ddev > tol:
        raise NotUnitary(f"determinant deviates from 1 by {ddev:.3e}")
    cols = [spinor_unmap(p @ spinor_map(e) @ ph) for e in np.eye(3)]
    return np.stack(cols, axis=-1)


# Linear dictionary E12 <-> -(i/2)s3, E13 <-> -(i/2)s2, E23 <-> -(i/2)s1
# between so(3) and su(2); used to transport Lie-algebra-valued data
# (potentials, Lax matrices) between the 3x3 and 2x2 pictures.

def so3_to_su2(s, tol=1e-9):
    s = np.asarray(s)
    a12 = s[..., 0, 1]
    a13 = s[..., 0, 2]
    a23 = s[..., 1, 2]
    dev = np.abs(s + np.swapaxes(s, -1, -2)).max()
    if dev > tol:
        raise NotSkew(f"matrix deviates from skew-symmetry by {dev:.3e}")
    return (-0.5j) * (a12[..., None, None] * SIGMA3
                      + a13[..., None, None] * SIGMA2
                      + a23[..., None, None] * SIGMA1)


def su2_to_so3(m):
    a12 = (1j * (m[..., 0, 0] - m[..., 1, 1])).real
    a13 = (m[..., 1, 0] - m[..., 0, 1]).real
    a23 = (1j * (m[..., 0, 1] + m[..., 1, 0])).real
    shape = np.shape(a12)
    out = np.zeros(shape + (3, 3))
    out[..., 0, 1] = a12
    out[..., 1, 0] = -a12
    out[..., 0, 2] = a13
    out[..., 2, 0] = -a13
    out[..., 1, 2] = a23
    out[..., 2, 1] = -a23
    return out
