"""Tape autodiff on a small MLP, checked against central differences, then fitted with Adam.

Run: python3 demos/01_autodiff_and_adam.py
"""
import numpy as np

from hybridmarl import autodiff as ad
from hybridmarl import nn
from hybridmarl.oracles import central_difference, relative_error

rng = np.random.default_rng(0)
x = rng.uniform(-1, 1, size=(64, 2))
y = np.sin(2 * x[:, :1]) * x[:, 1:]
net = nn.init_mlp([2, 16, 16, 1], rng)


def loss_value():
    return float(np.mean((nn.mlp_forward(net, x) - y) ** 2))


def tape_loss(params):
    tape = ad.Tape()
    bound = params.bind(tape)
    loss = ad.mean(ad.square(nn.mlp_forward(bound, x) - y))
    grads = ad.grads_for(ad.backward(tape, loss), bound.arrays())
    return float(loss.value), grads


# 1. reverse mode agrees with a finite-difference oracle
_, analytic = tape_loss(net)
# the oracle perturbs the arrays in place and calls loss_value()
numeric = central_difference(loss_value, net.arrays())
print("tape vs central difference, relative error:", relative_error(analytic, numeric))

# 2. Adam drives the same loss down
opt = ad.AdamState.for_params(net.arrays(), lr=1e-2)
for it in range(501):
    loss, grads = tape_loss(net)
    ad.adam_step(net.arrays(), grads, opt)
    if it % 100 == 0:
        print(f"step {it:4d}  mse {loss:.5f}")
