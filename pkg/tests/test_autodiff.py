"""Per-op gradient checks for the reverse-mode tape."""

import numpy as np
import pytest
import scipy.sparse as sp

from disengraph import autodiff as ad


def fd_check(builder, arrays, delta=1e-6, tol=1e-6):
    """Compare tape gradients of a scalar builder against central differences."""
    leaves = {k: ad.Tensor(v.copy(), requires_grad=True) for k, v in arrays.items()}
    out = builder(leaves)
    ad.backward(out)
    with ad.no_grad():
        for name, arr in arrays.items():
            work = {k: v.copy() for k, v in arrays.items()}
            flat = work[name].ravel()
            grad = leaves[name].grad
            assert grad is not None, f"no gradient for {name}"
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + delta
                fp = float(builder({k: ad.Tensor(v) for k, v in work.items()}).value)
                flat[i] = orig - delta
                fm = float(builder({k: ad.Tensor(v) for k, v in work.items()}).value)
                flat[i] = orig
                cd = (fp - fm) / (2 * delta)
                an = grad.ravel()[i]
                assert abs(an - cd) <= tol * max(1.0, abs(cd)), (name, i, an, cd)


RNG = np.random.default_rng(42)


def test_elementwise_and_broadcast():
    a = RNG.standard_normal((3, 4))
    b = RNG.standard_normal((1, 4))
    fd_check(lambda lv: ad.tsum(ad.mul(ad.add(lv["a"], lv["b"]), ad.sub(lv["a"], 2.0))),
             {"a": a, "b": b})
    fd_check(lambda lv: ad.tsum(ad.div(lv["a"], ad.add(lv["b"], 5.0))), {"a": a, "b": b})


def test_matmul_relu_sigmoid():
    x = RNG.standard_normal((5, 3))
    w = RNG.standard_normal((3, 2))
    fd_check(lambda lv: ad.tsum(ad.sigmoid(ad.relu(ad.Tensor(x) @ lv["w"]))), {"w": w})


def test_leaky_relu_softplus_clamp():
    a = RNG.standard_normal((4, 4))
    fd_check(lambda lv: ad.tsum(ad.leaky_relu(lv["a"], 0.2)), {"a": a})
    fd_check(lambda lv: ad.tsum(ad.softplus(lv["a"])), {"a": a})
    fd_check(lambda lv: ad.tsum(ad.clamp(lv["a"], -0.5, 0.5)), {"a": a + 2.0})


def test_exp_log_mean():
    a = np.abs(RNG.standard_normal((3, 3))) + 0.5
    fd_check(lambda lv: ad.tmean(ad.log(ad.exp(lv["a"]))), {"a": a})


def test_softmax_rows_sum_to_one_and_grad():
    a = RNG.standard_normal((6, 5))
    y = ad.softmax(ad.Tensor(a), axis=1)
    assert np.allclose(y.value.sum(axis=1), 1.0, atol=1e-12)
    fd_check(lambda lv: ad.tsum(ad.mul(ad.softmax(lv["a"], axis=1), RNG2)), {"a": a})


RNG2 = np.random.default_rng(1).standard_normal((6, 5))


def test_masked_softmax_zero_rows_and_grad():
    a = RNG.standard_normal((4, 5))
    mask = np.ones((4, 5))
    mask[1, 2:] = 0.0
    mask[3, :] = 0.0  # fully masked row gets no mass
    y = ad.masked_softmax(ad.Tensor(a), mask, axis=1)
    assert np.allclose(y.value.sum(axis=1)[[0, 1, 2]], 1.0, atol=1e-12)
    assert np.all(y.value[3] == 0.0)
    assert np.all(y.value[mask == 0.0] == 0.0)
    w = np.arange(20.0).reshape(4, 5)
    fd_check(lambda lv: ad.tsum(ad.mul(ad.masked_softmax(lv["a"], mask, axis=1), w)), {"a": a})


def test_masked_softmax_huge_masked_entries_do_not_overflow():
    a = np.array([[0.1, 0.2, 1e6]])
    mask = np.array([[1.0, 1.0, 0.0]])
    y = ad.masked_softmax(ad.Tensor(a), mask, axis=1)
    assert np.all(np.isfinite(y.value))
    assert y.value[0, 2] == 0.0


def test_l2_normalize_grad_and_guard():
    a = RNG.standard_normal((5, 3))
    w = RNG.standard_normal((5, 3))
    fd_check(lambda lv: ad.tsum(ad.mul(ad.l2_normalize(lv["a"]), w)), {"a": a})
    z = ad.l2_normalize(ad.Tensor(np.zeros((2, 3))))
    assert np.all(z.value == 0.0)


def test_einsum_patterns():
    h = RNG.standard_normal((3, 2, 4))
    c = RNG.standard_normal((3, 5, 2, 4))
    w = RNG.standard_normal((3, 5, 2))
    fd_check(lambda lv: ad.tsum(ad.einsum("nkd,nskd->nsk", lv["h"], ad.Tensor(c))), {"h": h})
    fd_check(lambda lv: ad.tsum(ad.einsum("nsk,nskd->nkd", ad.Tensor(w), lv["c"])), {"c": c})
    with pytest.raises(ValueError):
        ad.einsum("ij->i", ad.Tensor(h), ad.Tensor(c))


def test_gather_scatter_ops():
    x = RNG.standard_normal((6, 3))
    idx = np.array([0, 2, 2, 5])
    fd_check(lambda lv: ad.tsum(ad.mul(ad.take_rows(lv["x"], idx), 2.0)), {"x": x})
    cols = np.array([0, 2, 1, 0, 2, 1])
    fd_check(lambda lv: ad.tsum(ad.take_along_rows(lv["x"], cols)), {"x": x})
    g = sp.csr_matrix((np.ones(4), (np.arange(4), idx)), shape=(4, 6))
    fd_check(lambda lv: ad.tsum(ad.sparse_gather(lv["x"], g)), {"x": x})


def test_stack_concat_reshape_where_rows():
    a = RNG.standard_normal((3, 2))
    b = RNG.standard_normal((3, 2))
    fd_check(lambda lv: ad.tsum(ad.stack([lv["a"], lv["b"]], axis=1)), {"a": a, "b": b})
    fd_check(lambda lv: ad.tsum(ad.mul(ad.concat([lv["a"], lv["b"]], axis=1), 3.0)),
             {"a": a, "b": b})
    fd_check(lambda lv: ad.tsum(ad.reshape(lv["a"], (2, 3))), {"a": a})
    mask = np.array([True, False, True])
    w = RNG.standard_normal((3, 2))
    fd_check(lambda lv: ad.tsum(ad.mul(ad.where_rows(mask, lv["a"], lv["b"]), w)),
             {"a": a, "b": b})


def test_no_grad_mode_records_nothing():
    a = ad.Tensor(np.ones((2, 2)), requires_grad=True)
    with ad.no_grad():
        out = ad.tsum(ad.mul(a, a))
    assert not out.requires_grad and out.parents == ()


def test_backward_requires_scalar():
    a = ad.Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        ad.backward(ad.mul(a, 2.0))


def test_shared_subgraph_accumulates():
    a = ad.Tensor(np.array([2.0]), requires_grad=True)
    b = ad.mul(a, 3.0)
    out = ad.add(ad.mul(b, b), b)  # f(a) = 9a^2 + 3a, f'(2) = 39
    ad.backward(out)
    assert np.allclose(a.grad, [39.0])
