"""Central finite-difference oracle for analytic gradients."""

from dataclasses import dataclass, field

import numpy as np

from .autograd import backward, no_grad
from .errors import DeterminismError


@dataclass
class FiniteDiffReport:
    max_rel_error: float
    worst_param: str
    worst_index: int
    per_param: dict = field(default_factory=dict)


def finite_diff_report(forward_fn, params, epsilon=1e-5):
    """Compare analytic gradients of `forward_fn` against central
    differences, entry by entry.

    `forward_fn` takes no arguments, reads the tensors in `params`
    (name -> Tensor mapping) and returns a scalar Tensor. It must be
    deterministic; two identical evaluations that disagree raise
    DeterminismError. Relative error uses the denominator
    max(|analytic|, |numeric|, 1e-8).
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    params = dict(params)
    for t in params.values():
        t.grad = None

    loss = forward_fn()
    with no_grad():
        check = forward_fn()
    if float(loss.data) != float(check.data):
        raise DeterminismError(
            f"forward_fn is not deterministic: {float(loss.data)!r} vs {float(check.data)!r}"
        )
    backward(loss)

    analytic = {
        name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
        for name, t in params.items()
    }

    report = FiniteDiffReport(0.0, "", -1)
    for name, t in params.items():
        flat = t.data.reshape(-1)
        ana = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            with no_grad():
                f_plus = float(forward_fn().data)
            flat[i] = orig - epsilon
            with no_grad():
                f_minus = float(forward_fn().data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            denom = max(abs(ana[i]), abs(numeric), 1e-8)
            err = abs(ana[i] - numeric) / denom
            if err > worst:
                worst = err
            if err > report.max_rel_error:
                report.max_rel_error = err
                report.worst_param = name
                report.worst_index = i
        report.per_param[name] = worst
    for t in params.values():
        t.grad = None
    return report


def finite_diff_check(forward_fn, params, epsilon=1e-5):
    """Worst relative error between analytic and numeric gradients."""
    return finite_diff_report(forward_fn, params, epsilon).max_rel_error
