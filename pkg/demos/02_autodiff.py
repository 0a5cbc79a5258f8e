"""Reverse-mode differentiation and finite-difference checking.

The engine records every operation on a Tensor; ``backward`` walks the
graph in reverse. Here we differentiate a tiny expression by hand, then
check a convolutional layer and a bidirectional recurrence numerically.
"""

import numpy as np

from mirforge import Tensor, backward, grad_check
from mirforge import tensor as tn
from mirforge.gradcheck import check_layer, run_suite
from mirforge.layers import Conv2d, Recurrent

# d/dx of sum(tanh(x) * x) is tanh(x) + x * (1 - tanh(x)**2)
x = Tensor(np.linspace(-2, 2, 5), requires_grad=True)
backward(tn.reduce_sum(tn.tanh(x) * x))
expected = np.tanh(x.data) + x.data * (1 - np.tanh(x.data) ** 2)
print("analytic grad matches:", np.allclose(x.grad, expected))
print("relative error vs central differences:",
      grad_check(lambda v: tn.reduce_sum(tn.tanh(v) * v), Tensor(x.data.copy())))

rng = np.random.default_rng(0)
conv = Conv2d(2, 3, kernel=(3, 3), stride=(2, 1), padding="same", activation="tanh", rng=rng)
print("conv2d errors:", {k: f"{v:.1e}" for k, v in check_layer(conv, rng.standard_normal((2, 2, 8, 6))).items()})

birnn = Recurrent(4, 6, 2, bidirectional=True, rng=rng)
print("bi-rnn errors:", {k: f"{v:.1e}" for k, v in check_layer(birnn, rng.standard_normal((1, 7, 4))).items()})

print("\nfull suite (same as `mirforge gradcheck`):")
for name, err in run_suite().items():
    print(f"  {name:24s} {err:.2e}")
