import numpy as np
import pytest
from scipy.linalg import expm

from psforge.algebra import E12, E23, P_TWIST, adjoint_map
from psforge.frames import (check_conditions_K, compatibility_residual,
                            flatness_residual, gauge, integrate_frame,
                            lambda_forms, lax_matrices, maurer_cartan,
                            sample_frame_loop, su2_frame)
from psforge.loops import check_twist
from psforge.numerics import deriv4
from psforge.sinegordon import AngleField, GridSpec, constant_angle, soliton_angle

rng = np.random.default_rng(23)


def test_lax_matrices_printed_values():
    a, b = lax_matrices(np.pi, 0.0, 1.0)
    assert np.allclose(a, [[0, 0, 0], [0, 0, 1], [0, -1, 0]])
    assert np.allclose(b, [[0, 0, 0], [0, 0, 1], [0, -1, 0]])
    a2, b2 = lax_matrices(np.pi / 2, 0.3, 2.0)
    assert np.allclose(b2, 0.5 * np.array([[0, 0, -1], [0, 0, 0], [1, 0, 0]]))
    assert np.allclose(a2, [[0, -0.3, 0], [0.3, 0, 2], [0, -2, 0]])
    assert np.allclose(a2, -a2.T) and np.allclose(b2, -b2.T)


def test_lax_twist():
    for lam in (0.5, 1.7):
        a, b = lax_matrices(1.1, 0.4, lam)
        am, bm = lax_matrices(1.1, 0.4, -lam + 0j)
        assert np.allclose(am, P_TWIST @ a @ P_TWIST)
        assert np.allclose(bm, P_TWIST @ b @ P_TWIST)


def test_frame_identity_at_origin(soliton):
    i0, j0 = soliton.grid.origin_index()
    for lam in (0.5, 1.0, 2.0):
        fr = integrate_frame(soliton, lam)
        assert np.array_equal(fr.U[i0, j0], np.eye(3))


def test_frame_orthogonality(soliton):
    fr = integrate_frame(soliton, 2.0)
    dev = np.abs(np.swapaxes(fr.U, -1, -2) @ fr.U - np.eye(3)).max()
    assert dev < 1e-8
    assert np.allclose(np.linalg.det(fr.U), 1.0, atol=1e-10)


def test_frame_path_independence(soliton):
    for lam in (0.5, 2.0):
        a = integrate_frame(soliton, lam, order="xy")
        b = integrate_frame(soliton, lam, order="yx")
        assert np.abs(a.U - b.U).max() < 1e-6


def test_frame_constant_angle_exponential_oracle():
    # phi = pi: A and B are constant multiples of E23, so the frame is a
    # closed-form exponential
    g = GridSpec(0.0, 0.0, 21, 21, 0.05, 0.05)
    f = constant_angle(np.pi, g)
    lam = 1.3
    fr = integrate_frame(f, lam, substeps=8)
    for i, j in ((20, 0), (7, 13), (20, 20)):
        expected = expm((lam * g.xs[i] + g.ys[j] / lam) * E23)
        assert np.abs(fr.U[i, j] - expected).max() < 1e-9


def test_frame_rejects_bad_lambda(soliton):
    with pytest.raises(ValueError):
        integrate_frame(soliton, -1.0)
    with pytest.raises(ValueError):
        integrate_frame(soliton, 1.0, order="diagonal")


def test_compatibility_residual(soliton):
    for lam in (0.5, 1.0, 2.0):
        assert compatibility_residual(soliton, lam).max() < 1e-8
    g = soliton.grid
    half = constant_angle(np.pi / 2, g)
    r = compatibility_residual(half, 1.0)
    # direct evaluation of the defect for the non-solution: |sin(phi)| * ||E12||_F
    assert np.allclose(r, np.sqrt(2.0))


def test_compatibility_lambda_independent(soliton):
    sups = [compatibility_residual(soliton, lam).max()
            for lam in (0.5, 1.0, 2.0)]
    assert max(sups) < 1e-8
    assert np.ptp(sups) < 1e-10  # the defect matrix is lambda-free


def test_frame_dump_round_trip(tmp_path, small_soliton):
    from psforge.frames import load_frame, save_frame
    fr = integrate_frame(small_soliton, 1.5)
    save_frame(fr, tmp_path / "u.csv")
    back = load_frame(tmp_path / "u.csv")
    assert back.grid == fr.grid and back.lam == fr.lam
    assert np.array_equal(back.U, fr.U)
    save_frame(fr, tmp_path / "u.npz")
    back2 = load_frame(tmp_path / "u.npz")
    assert np.array_equal(back2.U, fr.U)


def test_maurer_cartan_coefficients(soliton):
    form = maurer_cartan(soliton)
    assert np.array_equal(form.alpha1[0, 0], -E23)
    assert np.ptp(form.alpha1, axis=(0, 1)).max() == 0.0
    # node with phi = pi/2
    f = constant_angle(np.pi / 2, soliton.grid)
    fm = maurer_cartan(f)
    assert np.allclose(fm.alpha_m1[3, 4],
                       [[0, 0, 1], [0, 0, 0], [-1, 0, 0]])
    # alpha0' spans E12 only
    assert np.abs(form.alpha0_prime[..., 0, 2]).max() == 0.0
    assert np.abs(form.alpha0_prime[..., 1, 2]).max() == 0.0


def test_maurer_cartan_matches_frame_derivative(small_soliton):
    lam = 1.3
    f = small_soliton
    g = f.grid
    fr = integrate_frame(f, lam, substeps=2)
    form = maurer_cartan(f)
    ux = deriv4(fr.U, g.hx, axis=0)
    uy = deriv4(fr.U, g.hy, axis=1)
    uinv = np.swapaxes(fr.U, -1, -2)
    omega_x = -(uinv @ ux)
    omega_y = -(uinv @ uy)
    assert np.abs(omega_x - (form.alpha0_prime + lam * form.alpha1)).max() < 5e-5
    assert np.abs(omega_y - form.alpha_m1 / lam).max() < 5e-5


def test_flatness_residual(soliton):
    form = maurer_cartan(soliton)
    assert np.nanmax(flatness_residual(form, 1.0)) < 1e-4
    # lambda and 1/lambda give the same residual up to the difference floor
    s2 = np.nanmax(flatness_residual(form, 2.0))
    s05 = np.nanmax(flatness_residual(form, 0.5))
    assert s2 < 1e-4 and s05 < 1e-4
    assert abs(s2 - s05) < 2e-5


def test_flatness_isolates_sine_gordon():
    g = GridSpec(0.0, 0.0, 21, 21, 0.05, 0.05)
    f = constant_angle(np.pi / 2, g)
    form = maurer_cartan(f)
    lam = 1.0
    p = form.alpha0_prime + lam * form.alpha1
    q = form.alpha_m1 / lam
    r = (deriv4(q, g.hx, axis=0) - deriv4(p, g.hy, axis=1)) - (p @ q - q @ p)
    assert np.allclose(r[..., 0, 1], 1.0)  # sin(pi/2) - 0
    assert np.allclose(flatness_residual(form, lam), np.sqrt(2.0))


def test_lambda_forms_values(soliton):
    g = soliton.grid
    f = constant_angle(np.pi / 2, g)
    forms = lambda_forms(f, 1.0)
    w1 = forms["omega1"]
    assert np.allclose(w1.p, np.sqrt(2.0) / 2.0)
    assert np.allclose(w1.q, np.sqrt(2.0) / 2.0)
    # omega12 does not depend on lambda
    a = lambda_forms(soliton, 0.5)["omega12"]
    b = lambda_forms(soliton, 2.0)["omega12"]
    assert np.array_equal(a.p, b.p) and np.array_equal(a.q, b.q)


def test_lambda_forms_two_parametrizations():
    # the lambda-forms are the stated linear combinations of the lambda=1 forms
    g = GridSpec(0.0, 0.0, 12, 12, 0.1, 0.1)
    f = AngleField(g, rng.uniform(0.3, 2.7, (12, 12)))
    base = lambda_forms(f, 1.0)
    for lam in (0.5, 1.7):
        lf = lambda_forms(f, lam)
        cp, cm = (lam + 1.0 / lam) / 2.0, (lam - 1.0 / lam) / 2.0
        for comp in ("p", "q"):
            w1, w2 = getattr(base["omega1"], comp), getattr(base["omega2"], comp)
            w13, w23 = getattr(base["omega13"], comp), getattr(base["omega23"], comp)
            assert np.allclose(getattr(lf["omega1"], comp), cp * w1 + cm * w23)
            assert np.allclose(getattr(lf["omega2"], comp), cp * w2 - cm * w13)
            assert np.allclose(getattr(lf["omega13"], comp), cp * w13 - cm * w2)
            assert np.allclose(getattr(lf["omega23"], comp), cp * w23 + cm * w1)


def test_conditions_K_soliton(soliton):
    for lam in (0.5, 1.0, 2.0):
        res = check_conditions_K(lambda_forms(soliton, lam))
        assert set(res) == set("abcdefg")
        for key, r in res.items():
            assert np.nanmax(np.abs(r)) < 1e-3, key


def test_conditions_K_detects_non_solution():
    g = GridSpec(0.0, 0.0, 21, 21, 0.05, 0.05)
    f = constant_angle(np.pi / 2, g)
    res = check_conditions_K(lambda_forms(f, 1.0))
    assert np.abs(res["c"]).max() > 0.9


def test_conditions_fg_identities_any_field():
    # f and g hold for forms built from the lambda-form template at any
    # angle grid, solution or not
    g = GridSpec(0.0, 0.0, 12, 12, 0.1, 0.1)
    f = AngleField(g, rng.uniform(0.2, 2.9, (12, 12)))
    for lam in (0.5, 1.0, 1.7):
        res = check_conditions_K(lambda_forms(f, lam))
        assert np.abs(res["f"]).max() < 1e-10
        assert np.abs(res["g"]).max() < 1e-10


def test_lemma_lambda_family_implies_all():
    # when c, d, e vanish for sampled lambda, all seven vanish
    exact = soliton_angle(1.0, GridSpec(0.0, 0.0, 51, 51, 0.04, 0.04))
    sups = {}
    for lam in (0.5, 1.0, 2.0):
        res = check_conditions_K(lambda_forms(exact, lam))
        for k, r in res.items():
            sups[k] = max(sups.get(k, 0.0), np.nanmax(np.abs(r)))
    assert max(sups[k] for k in "cde") < 1e-3
    assert max(sups.values()) < 1e-3


def test_gauge(soliton_frame):
    g = soliton_frame.grid
    same = gauge(soliton_frame, 0.0)
    assert np.array_equal(same.U, soliton_frame.U)
    theta = rng.uniform(-np.pi, np.pi, (g.nx, g.ny))
    gauged = gauge(soliton_frame, theta)
    assert np.array_equal(gauged.U[..., :, 2], soliton_frame.U[..., :, 2])
    back = gauge(gauged, -theta)
    assert np.abs(back.U - soliton_frame.U).max() < 1e-13


def test_su2_frame_matches_adjoint(small_soliton):
    lam = 1.0
    p = su2_frame(small_soliton, lam, substeps=4)
    i0, j0 = small_soliton.grid.origin_index()
    assert np.array_equal(p[i0, j0], np.eye(2))
    ph = np.conj(np.swapaxes(p, -1, -2))
    assert np.abs(ph @ p - np.eye(2)).max() < 1e-9
    assert np.abs(np.linalg.det(p) - 1.0).max() < 1e-9
    fr = integrate_frame(small_soliton, lam, substeps=4)
    assert np.abs(adjoint_map(p) - fr.U).max() < 1e-8


def test_frame_reality_at_conjugate_lambda(small_soliton):
    for theta in (np.pi / 6, np.pi / 3):
        lam = np.exp(1j * theta)
        a = integrate_frame(small_soliton, lam)
        b = integrate_frame(small_soliton, np.conj(lam))
        assert np.abs(np.conj(b.U) - a.U).max() < 1e-12


def test_frame_twist_at_negated_lambda(small_soliton):
    lam = 1.4
    a = integrate_frame(small_soliton, lam + 0j)
    b = integrate_frame(small_soliton, -lam + 0j)
    conj = P_TWIST @ a.U @ P_TWIST
    assert np.abs(b.U - conj).max() < 1e-12


def test_sampled_frame_loop_is_twisted_real(small_soliton):
    loop = sample_frame_loop(small_soliton, 80, 70, n=32, substeps=2)
    laurent = loop.to_laurent()
    assert check_twist(laurent, tol=1e-9)
    assert max(np.abs(c.imag).max() for c in laurent.coeffs.values()) < 1e-9
