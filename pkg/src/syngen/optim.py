"""Adam optimizer with named parameter groups and global-norm clipping."""

import numpy as np

from .backend import kernels as K
from .errors import IncompleteBackwardError


class ParamGroup:
    """A named set of trainable tensors sharing one learning rate."""

    def __init__(self, name, tensors, learning_rate):
        if learning_rate < 0:
            raise ValueError(f"learning rate must be >= 0, got {learning_rate}")
        self.name = name
        self.tensors = dict(tensors)  # param name -> Tensor
        self.learning_rate = float(learning_rate)


class Adam:
    """Standard Adam (beta1=0.9, beta2=0.999, eps=1e-8), one rate per group.

    `step()` requires every tensor in every group to carry a gradient and
    clears all gradients afterwards.
    """

    def __init__(self, groups, beta1=0.9, beta2=0.999, eps=1e-8):
        self.groups = list(groups)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._moments = {}
        for group in self.groups:
            for name, t in group.tensors.items():
                self._moments[name] = (np.zeros_like(t.data), np.zeros_like(t.data))

    def step(self):
        for group in self.groups:
            for name, t in group.tensors.items():
                if t.grad is None:
                    raise IncompleteBackwardError(
                        f"parameter {name!r} (group {group.name!r}) has no gradient"
                    )
        self.step_count += 1
        for group in self.groups:
            for name, t in group.tensors.items():
                m, v = self._moments[name]
                K.adam_update(
                    t.data, t.grad, m, v,
                    group.learning_rate, self.beta1, self.beta2, self.eps,
                    self.step_count,
                )
                t.grad = None

    def zero_grad(self):
        for group in self.groups:
            for t in group.tensors.values():
                t.grad = None


def adam_step(groups, state):
    """One update of `groups` through an existing Adam instance.

    The state's moment buffers are keyed by parameter name, so the groups
    may be rebuilt between steps as long as the names are stable.
    """
    for group in groups:
        for name in group.tensors:
            if name not in state._moments:
                raise IncompleteBackwardError(
                    f"parameter {name!r} has no optimizer state"
                )
    state.groups = list(groups)
    state.step()


def clip_grad_global_norm(tensors, max_norm):
    """Scale all gradients down so their joint L2 norm is <= max_norm.

    Returns the pre-clip norm. Tensors without gradients are ignored.
    """
    total = 0.0
    for t in tensors:
        if t.grad is not None:
            total += float(np.sum(t.grad * t.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for t in tensors:
            if t.grad is not None:
                t.grad = t.grad * factor
    return norm
