"""AdaGrad with per-tensor accumulators, and L2 on weight matrices."""
import numpy as np

from .errors import NumericError


class AdaGradState:
    """Squared-gradient accumulators keyed by tensor name."""

    def __init__(self, eps: float = 1e-8):
        self.eps = eps
        self.acc: dict[str, np.ndarray] = {}

    def accumulator(self, name, shape):
        acc = self.acc.get(name)
        if acc is None:
            acc = self.acc[name] = np.zeros(shape)
        elif acc.shape != tuple(shape):
            # embedding tables grow when new OOV rows are allocated
            if acc.shape[1:] != tuple(shape[1:]) or acc.shape[0] > shape[0]:
                raise ValueError(f"accumulator {name!r} has shape {acc.shape}, expected {shape}")
            grown = np.zeros(shape)
            grown[: acc.shape[0]] = acc
            acc = self.acc[name] = grown
        return acc

    def step(self, name, theta, grad, lr):
        return adagrad_step(theta, grad, self.accumulator(name, theta.shape), lr, self.eps, name)


def adagrad_step(theta, grad, acc, lr, eps=1e-8, name="tensor"):
    """In place: ``acc += grad**2; theta -= lr * grad / (sqrt(acc) + eps)``."""
    if theta.shape != grad.shape or acc.shape != grad.shape:
        raise ValueError(f"{name}: shapes {theta.shape}, {grad.shape}, {acc.shape} disagree")
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient in {name}")
    acc += grad * grad
    theta -= lr * grad / (np.sqrt(acc) + eps)
    return theta


def apply_l2(grads, params, lam):
    """Add ``lam * theta`` to the gradient of every weight tensor.

    Biases (1-D tensors) are left alone; embedding tables are never part of
    ``params``.
    """
    if lam == 0.0:
        return grads
    for name, theta in params.items():
        if theta.ndim >= 2:
            grads[name] += lam * theta
    return grads
