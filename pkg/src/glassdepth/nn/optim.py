"""Adam and a multi-step learning-rate schedule."""

import numpy as np

from ..errors import ContractError


class Adam:
    """Adam over a ``name -> Tensor`` mapping; parameters without a gradient are skipped."""

    def __init__(self, params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        if not lr > 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        if not all(0.0 < b < 1.0 for b in betas):
            raise ContractError(f"Adam betas must lie in (0, 1), got {betas}")
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = (float(b) for b in betas)
        self.eps = float(eps)
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad.astype(p.data.dtype)
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.data.dtype)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def multistep_lr(base_lr, epoch, milestones=(50,), gamma=0.5):
    """Learning rate for 1-based ``epoch``: scaled by ``gamma`` once per milestone passed.

    With milestone 50 epochs 1..50 use ``base_lr`` and epoch 51 onward ``base_lr * gamma``.
    """
    return base_lr * gamma ** sum(1 for m in milestones if epoch > m)
