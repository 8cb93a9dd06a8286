"""Finite-difference verification of the analytic gradients.

Central differences over every parameter element, compared against one
backward pass, in inference mode (dropout off, batch norm using running
statistics).  The relative error denominator is floored at 1e-8 so that
near-zero gradients do not blow up the ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .layers import cross_entropy
from .network import ImpairmentNet


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_param: str
    per_param: Dict[str, float]
    n_checked: int

    def failing(self, tolerance: float) -> List[str]:
        return [name for name, err in self.per_param.items() if err > tolerance]


def _loss(net: ImpairmentNet, left, right, labels) -> float:
    logits = net.forward(left, right, train=False)
    return cross_entropy(logits, labels)[0]


def gradient_check(
    net: ImpairmentNet,
    left: np.ndarray,
    right: np.ndarray,
    labels: np.ndarray,
    epsilon: float = 1e-5,
    max_per_tensor: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckResult:
    """Max relative error between analytic and central-difference gradients.

    Checks every element of every parameter tensor unless `max_per_tensor`
    caps the per-tensor sample (sampled with `rng`, default seeded).
    """
    net.set_train(False)
    net.zero_grad()
    logits = net.forward(left, right, train=False)
    loss, dlogits = cross_entropy(logits, labels)
    net.backward(dlogits)
    analytic = {p.name: p.grad.copy() for p in net.parameters()}

    if rng is None:
        rng = np.random.default_rng(0)

    worst = 0.0
    worst_name = ""
    per_param: Dict[str, float] = {}
    n_checked = 0
    for p in net.parameters():
        flat = p.value.reshape(-1)
        grad_flat = analytic[p.name].reshape(-1)
        indices = np.arange(flat.size)
        if max_per_tensor is not None and flat.size > max_per_tensor:
            indices = rng.choice(flat.size, size=max_per_tensor, replace=False)
        tensor_worst = 0.0
        for i in indices:
            original = flat[i]
            flat[i] = original + epsilon
            loss_plus = _loss(net, left, right, labels)
            flat[i] = original - epsilon
            loss_minus = _loss(net, left, right, labels)
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            denom = max(abs(numeric), abs(grad_flat[i]), 1e-8)
            rel = abs(numeric - grad_flat[i]) / denom
            tensor_worst = max(tensor_worst, rel)
            n_checked += 1
        per_param[p.name] = tensor_worst
        if tensor_worst > worst:
            worst = tensor_worst
            worst_name = p.name
    return GradCheckResult(max_rel_error=worst, worst_param=worst_name, per_param=per_param, n_checked=n_checked)
