import logging

import numpy as np

from .exceptions import ConfigError

logger = logging.getLogger(__name__)


class AdamW:
    """Adam with decoupled weight decay over a flat parameter vector

        m_t = b1 m_{t-1} + (1 - b1) g_t
        v_t = b2 v_{t-1} + (1 - b2) g_t^2
        theta_t = theta_{t-1} - lr (m_hat / (sqrt(v_hat) + eps) + wd theta_{t-1})
    """

    def __init__(self, size: int, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        if not lr > 0:
            raise ConfigError("learning_rate", f"must be positive, got {lr}")
        if not 0.0 <= beta1 < 1.0:
            raise ConfigError("beta1", f"must lie in [0, 1), got {beta1}")
        if not 0.0 <= beta2 < 1.0:
            raise ConfigError("beta2", f"must lie in [0, 1), got {beta2}")
        if not weight_decay >= 0:
            raise ConfigError("weight_decay", f"must be nonnegative, got {weight_decay}")

        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.exp_avg = np.zeros(size)
        self.exp_avg_sq = np.zeros(size)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Return the updated parameter vector"""
        self.step_count += 1
        self.exp_avg = self.beta1 * self.exp_avg + (1.0 - self.beta1) * grad
        self.exp_avg_sq = self.beta2 * self.exp_avg_sq + (1.0 - self.beta2) * grad * grad

        m_hat = self.exp_avg / (1.0 - self.beta1 ** self.step_count)
        v_hat = self.exp_avg_sq / (1.0 - self.beta2 ** self.step_count)
        decayed = params * (1.0 - self.lr * self.weight_decay)
        return decayed - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
