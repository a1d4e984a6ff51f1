import math

import numpy as np
import pytest

from kml.kinematics import (
    DivergentCutoffError,
    KernelSpec,
    SingularityError,
    grad_constant,
    kernel_value,
    parse_angular,
    post_collision_omega,
    post_collision_sigma,
    sigma_from_omega,
)


def _unit(rng, n):
    w = rng.normal(size=(n, 3))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def test_conservation_random():
    rng = np.random.default_rng(1)
    v, vs = rng.normal(size=(100_000, 3)) * 3, rng.normal(size=(100_000, 3)) * 3
    vp, vsp = post_collision_omega(v, vs, _unit(rng, 100_000))
    mom = np.abs(vp + vsp - v - vs).max() / np.abs(v + vs).max()
    e0 = np.sum(v * v, 1) + np.sum(vs * vs, 1)
    en = np.abs(np.sum(vp * vp, 1) + np.sum(vsp * vsp, 1) - e0) / e0
    assert mom < 1e-12 and en.max() < 1e-12


def test_special_collisions():
    vp, vsp = post_collision_omega([1, 0, 0], [-1, 0, 0], [1, 0, 0])
    assert np.array_equal(vp, [-1, 0, 0]) and np.array_equal(vsp, [1, 0, 0])
    vp, vsp = post_collision_omega([1, 0, 0], [-1, 0, 0], [0, 1, 0])
    assert np.array_equal(vp, [1, 0, 0]) and np.array_equal(vsp, [-1, 0, 0])
    vp, vsp = post_collision_omega([1, 1, 0], [0, 0, 0], [1, 0, 0])
    assert np.array_equal(vp, [0, 1, 0]) and np.array_equal(vsp, [1, 0, 0])
    with pytest.raises(ValueError):
        post_collision_omega([1, 0, 0], [0, 0, 0], [1, 1, 0])


def test_sigma_map():
    v, vs = np.array([1.0, 2.0, -0.5]), np.array([-0.3, 0.1, 0.4])
    u = v - vs
    uhat = u / np.linalg.norm(u)
    a, b = post_collision_sigma(v, vs, uhat)
    assert np.allclose(a, v, atol=1e-14) and np.allclose(b, vs, atol=1e-14)
    a, b = post_collision_sigma(v, vs, -uhat)
    assert np.allclose(a, vs, atol=1e-14) and np.allclose(b, v, atol=1e-14)
    rng = np.random.default_rng(2)
    om = _unit(rng, 500)
    vv, vsv = rng.normal(size=(500, 3)), rng.normal(size=(500, 3))
    p1 = post_collision_omega(vv, vsv, om)
    p2 = post_collision_sigma(vv, vsv, sigma_from_omega(vv - vsv, om))
    assert np.abs(p1[0] - p2[0]).max() < 1e-12 and np.abs(p1[1] - p2[1]).max() < 1e-12
    s = _unit(rng, 500)
    uu = vv - vsv
    um = 0.5 * (uu - np.linalg.norm(uu, axis=1, keepdims=True) * s)
    up = 0.5 * (uu + np.linalg.norm(uu, axis=1, keepdims=True) * s)
    assert np.allclose(np.sum(um ** 2, 1) + np.sum(up ** 2, 1), np.sum(uu ** 2, 1), rtol=1e-12)


def test_kernel_values():
    k = KernelSpec.parse("-1")
    assert kernel_value([2, 0, 0], [0, 0, 0], [1, 0, 0], k) == pytest.approx(0.5, abs=1e-15)
    assert kernel_value([2, 0, 0], [0, 0, 0], [-1, 0, 0], k) == 0.0
    k0 = KernelSpec.parse("0")
    assert kernel_value([2, 1, 0], [0, 3, 0], [0.6, 0.0, 0.8], k0) == pytest.approx(1.0)
    with pytest.raises(SingularityError):
        kernel_value([1, 1, 1], [1, 1, 1], [1, 0, 0], k)
    # exchange invariance of the |u|^gamma factor
    assert kernel_value([1, 2, 3], [0, 0, 1], [0, 0, 1], k) == pytest.approx(
        kernel_value([0, 0, 1], [1, 2, 3], [0, 0, -1], k))


def test_grad_constant():
    assert grad_constant(KernelSpec.parse("-1")) == pytest.approx(2 * math.pi, abs=1e-10)
    assert grad_constant(KernelSpec.parse("-1", "linear")) == pytest.approx(math.pi, abs=1e-10)
    with pytest.raises(DivergentCutoffError):
        grad_constant(KernelSpec.parse("-1", "power:-2"))


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec.parse("-3")
    with pytest.raises(ValueError):
        KernelSpec.parse("1/2")
    assert KernelSpec.parse("-1/2", "table:1,2").to_config() == {"gamma": "-1/2", "angular": "table:1,2"}
    assert parse_angular("table:0,2")(0.5) == pytest.approx(1.0)
