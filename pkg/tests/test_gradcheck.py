import numpy as np

from nodulemine import ops
from nodulemine.gradcheck import grad_check


def test_linear_op_is_exact():
    # channel_concat is linear, so analytic and numeric agree to roundoff
    rng = np.random.default_rng(0)
    b = rng.standard_normal((1, 2, 3, 3))
    rep = grad_check(
        lambda a: ops.channel_concat(a, b),
        lambda a, u: ops.channel_concat_backward(u, a.shape[1])[0],
        rng.standard_normal((1, 3, 3, 3)),
        rng=rng,
    )
    assert rep.max_rel_err <= 1e-10, rep


def test_conv2d_passes_on_smooth_inputs():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((2, 2, 3, 3))
    b = rng.standard_normal(2)
    rep = grad_check(
        lambda x: ops.conv2d(x, w, b, padding=1),
        lambda x, u: ops.conv2d_backward(x, w, u, padding=1)[0],
        rng.standard_normal((1, 2, 5, 5)),
        tolerance=1e-4,
        rng=rng,
    )
    assert rep.passed, rep


def test_corrupted_backward_is_caught():
    # negative control: a backward scaled by 1.01 must fail the check
    rng = np.random.default_rng(2)
    w = rng.standard_normal((2, 2, 3, 3))
    b = rng.standard_normal(2)
    rep = grad_check(
        lambda x: ops.conv2d(x, w, b, padding=1),
        lambda x, u: 1.01 * ops.conv2d_backward(x, w, u, padding=1)[0],
        rng.standard_normal((1, 2, 5, 5)),
        tolerance=1e-4,
        rng=rng,
    )
    assert not rep.passed


def test_report_counts_elements():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1, 1, 2, 2))
    rep = grad_check(
        lambda xx: ops.upsample2d(xx, 2),
        lambda xx, u: ops.upsample2d_backward(u, 2),
        x,
        rng=rng,
    )
    assert rep.n_checked == 4
    assert rep.passed
