import numpy as np
import pytest

from psforge.algebra import E12, E13, E23, P_TWIST
from psforge.errors import BigCellViolation, ZeroSpectralParameter
from psforge.loops import (LaurentLoop, SampledLoop, birkhoff_split,
                           check_reality, check_twist, load_loop_json,
                           loop_eval, loop_norm, multiply, save_loop_json)
from util import coeff_dev, random_twisted_algebra, random_twisted_factor

rng = np.random.default_rng(5)


def test_loop_norm_values():
    assert loop_norm(LaurentLoop.identity()) == 1.0
    x = LaurentLoop({1: E23, -1: E13})
    assert loop_norm(x) == 2.0


def test_loop_norm_submultiplicative():
    for _ in range(30):
        x = LaurentLoop({k: rng.normal(size=(3, 3)) for k in range(-2, 3)})
        y = LaurentLoop({k: rng.normal(size=(3, 3)) for k in range(-1, 4)})
        # brute-force Cauchy product of the truncated series
        prod = multiply(x, y)
        assert loop_norm(prod) <= loop_norm(x) * loop_norm(y) + 1e-10


def test_multiply_values():
    x = LaurentLoop({k: rng.normal(size=(3, 3)) for k in range(-2, 2)})
    assert coeff_dev(multiply(x, LaurentLoop.identity()), x) == 0.0
    p = multiply(LaurentLoop({1: E23}), LaurentLoop({-1: E13}))
    assert np.array_equal(p.coeff(0), E23 @ E13)
    assert p.kmin == 0 and p.kmax == 0 or 0 in p.coeffs


def test_multiply_preserves_twist():
    for _ in range(20):
        x = LaurentLoop(random_twisted_algebra(-3, 2, 1.0, rng))
        y = LaurentLoop(random_twisted_algebra(-1, 4, 1.0, rng))
        assert check_twist(x) and check_twist(y)
        assert check_twist(multiply(x, y))


def test_eval():
    lam = 0.3 + 1.1j
    assert np.allclose(loop_eval(LaurentLoop.identity(), lam), np.eye(3))
    assert np.allclose(loop_eval(LaurentLoop({1: E23}), 2.0), 2.0 * E23)
    with pytest.raises(ZeroSpectralParameter):
        loop_eval(LaurentLoop.identity(), 0.0)


def test_eval_twist_identity():
    x = LaurentLoop(random_twisted_algebra(-3, 3, 1.0, rng))
    for lam in (0.7, 1.3 + 0.4j):
        lhs = loop_eval(x, -lam)
        rhs = P_TWIST @ loop_eval(x, lam) @ P_TWIST
        assert np.allclose(lhs, rhs)


def test_check_twist_examples():
    assert check_twist(LaurentLoop({0: E12}))
    assert not check_twist(LaurentLoop({0: E13}))
    # extended Maurer-Cartan coefficients at a node: lam^-1, lam^0, lam^1
    phi, phi_x = 1.1, 0.4
    omega = LaurentLoop({
        -1: np.sin(phi) * E13 + np.cos(phi) * E23,
        0: phi_x * E12,
        1: -E23,
    })
    assert check_twist(omega)


def test_check_reality():
    assert check_reality(LaurentLoop({0: E12}))
    assert not check_reality(LaurentLoop({0: 1j * E12}))


def test_split_identity():
    f1, f2 = birkhoff_split(LaurentLoop.identity(), "minus-first")
    assert coeff_dev(f1, LaurentLoop.identity()) == 0.0
    assert coeff_dev(f2, LaurentLoop.identity()) == 0.0


def test_split_recovers_synthetic_product():
    for _ in range(10):
        gm = random_twisted_factor(-4, -1, rng)
        gp = random_twisted_factor(0, 4, rng)
        g = multiply(gm, gp)
        f1, f2 = birkhoff_split(g, "minus-first")
        assert coeff_dev(f1, gm) < 1e-8
        assert coeff_dev(f2, gp) < 1e-8
        assert f1.twisted and f1.real and f2.twisted and f2.real
        resid = multiply(f1, f2)
        dev = {k: resid.coeff(k) - g.coeff(k)
               for k in set(resid.coeffs) | set(g.coeffs)}
        assert sum(np.abs(v).sum(axis=1).max() for v in dev.values()) < 1e-10


def test_split_factor_shapes():
    gm = random_twisted_factor(-4, -1, rng)
    gp = random_twisted_factor(0, 4, rng)
    g = multiply(gm, gp)
    f1, f2 = birkhoff_split(g, "minus-first")
    assert f1.kmax == 0
    assert np.allclose(f1.coeff(0), np.eye(3))
    assert f2.kmin == 0
    p1, p2 = birkhoff_split(g, "plus-first")
    assert p1.kmin == 0
    assert np.allclose(p1.coeff(0), np.eye(3))
    assert p2.kmax == 0


def test_split_uniqueness_across_sampling():
    gm = random_twisted_factor(-4, -1, rng)
    gp = random_twisted_factor(0, 4, rng)
    g = multiply(gm, gp)
    lams64 = np.exp(2j * np.pi * np.arange(64) / 64)
    lams128 = np.exp(2j * np.pi * np.arange(128) / 128)
    s64 = SampledLoop(loop_eval(g, lams64), twisted=True, real=True)
    s128 = SampledLoop(loop_eval(g, lams128), twisted=True, real=True)
    a1, a2 = birkhoff_split(s64, "minus-first", tol=1e-8)
    b1, b2 = birkhoff_split(s128, "minus-first", tol=1e-8)
    assert coeff_dev(a1, b1) < 1e-9
    assert coeff_dev(a2, b2) < 1e-9


def test_split_idempotent():
    gm = random_twisted_factor(-4, -1, rng)
    gp = random_twisted_factor(0, 4, rng)
    f1, f2 = birkhoff_split(multiply(gm, gp), "minus-first")
    g1, g2 = birkhoff_split(multiply(f1, f2), "minus-first")
    assert coeff_dev(f1, g1) < 1e-9
    assert coeff_dev(f2, g2) < 1e-9


def test_split_winding_loop_raises():
    n = 64
    lams = np.exp(2j * np.pi * np.arange(n) / n)
    c = (lams + 1.0 / lams) / 2.0
    s = (lams - 1.0 / lams) / 2.0j
    vals = np.zeros((n, 3, 3), complex)
    vals[:, 0, 0] = c
    vals[:, 0, 2] = s
    vals[:, 1, 1] = 1.0
    vals[:, 2, 0] = -s
    vals[:, 2, 2] = c
    with pytest.raises(BigCellViolation):
        birkhoff_split(SampledLoop(vals), "minus-first")


def test_split_rejects_non_orthogonal():
    with pytest.raises(ValueError):
        birkhoff_split(LaurentLoop({0: 2.0 * np.eye(3)}), "minus-first")


def test_sampled_loop_shape_validation():
    with pytest.raises(ValueError):
        SampledLoop(np.zeros((13, 3, 3)))


def test_json_round_trip(tmp_path):
    g = multiply(random_twisted_factor(-3, -1, rng),
                 random_twisted_factor(0, 3, rng))
    path = tmp_path / "loop.json"
    save_loop_json(g, path)
    back = load_loop_json(path)
    assert back.twisted and back.real
    assert coeff_dev(back, g) == 0.0
    assert back.kmin == g.kmin and back.kmax == g.kmax
