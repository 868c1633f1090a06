"""Central finite-difference gradient checking for the tensor kernels.

An operation is checked through a scalar objective s(x) = sum(w * f(x))
with a fixed random weight tensor w, so the analytic gradient is exactly
the operation's vector-Jacobian product at upstream w. The numeric side
perturbs every input element by +/-step. Inputs should sit away from
non-differentiable points (relu kinks, max-pool ties).
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_STEP = 1e-5
# Relative error floor: |a - n| / max(|a|, |n|, REL_FLOOR).
REL_FLOOR = 1e-6


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_err: float
    tolerance: float
    passed: bool
    n_checked: int

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (
            f"grad_check {status}: max relative error {self.max_rel_err:.3e} "
            f"(tolerance {self.tolerance:.1e}, {self.n_checked} elements)"
        )


def grad_check(forward, vjp, x, tolerance=1e-4, step=DEFAULT_STEP, rng=None):
    """Compare an analytic vector-Jacobian product against finite differences.

    forward: x -> y (array of any shape)
    vjp:     (x, upstream) -> grad_x, the analytic backward under test
    x:       input point (array)
    Returns a GradCheckReport with the max relative error over all elements.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(forward(x))
    upstream = rng.standard_normal(y.shape)

    analytic = np.asarray(vjp(x, upstream), dtype=np.float64)
    if analytic.shape != x.shape:
        raise ValueError(
            f"analytic gradient shape {analytic.shape} != input shape {x.shape}"
        )

    numeric = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_num = numeric.reshape(-1)
    for idx in range(flat_x.size):
        orig = flat_x[idx]
        flat_x[idx] = orig + step
        y_plus = np.asarray(forward(x), dtype=np.float64)
        flat_x[idx] = orig - step
        y_minus = np.asarray(forward(x), dtype=np.float64)
        flat_x[idx] = orig
        # difference the outputs before the weighted sum: elements the
        # perturbation never touched cancel exactly
        flat_num[idx] = float(np.sum(upstream * (y_plus - y_minus))) / (2.0 * step)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    max_rel = float(np.max(np.abs(analytic - numeric) / denom)) if x.size else 0.0
    return GradCheckReport(
        max_rel_err=max_rel,
        tolerance=float(tolerance),
        passed=bool(max_rel <= tolerance),
        n_checked=int(x.size),
    )
