"""
A CDBlock is one ISTA step on a structured dictionary
=====================================================

With 1x1 kernels on a single pixel, every convolution collapses to a small
matrix, so the joint update can be written with an explicit block
dictionary. We build that dictionary, run both versions side by side, and
then iterate the convolutional step to watch the sparse-coding objective
fall.
"""

import numpy as np

from cdfuse.cdblock import CDBlockParams, cdblock_step, dict_adjoint, dict_forward

rng = np.random.default_rng(0)
C = 3

# Four synthesis kernels; tying the adjoint kernels to them gives plain ISTA
ux, uy, cx, cy = (rng.standard_normal((C, C, 1, 1)) for _ in range(4))
O = np.zeros((C, C))
D = np.block([[ux[:, :, 0, 0], O, cx[:, :, 0, 0]],
              [O, uy[:, :, 0, 0], cy[:, :, 0, 0]]])
L = np.linalg.norm(D, 2) ** 2
print("dictionary", D.shape, "with Lipschitz constant", round(L, 3))

# Scale so that a unit step is the classical 1/L step
a = 1 / np.sqrt(L)
ks = [k * a for k in (ux, uy, cx, cy)]
theta = np.full(3 * C, 0.02)
block = CDBlockParams(*ks, *ks, theta=theta)
Dn = D * a

z = rng.standard_normal(2 * C)
w_conv = np.zeros((3 * C, 1, 1))
w_dense = np.zeros(3 * C)
for t in range(5):
    w_conv = cdblock_step(block, w_conv, z.reshape(-1, 1, 1))
    v = w_dense - Dn.T @ (Dn @ w_dense - z)
    w_dense = np.sign(v) * np.maximum(np.abs(v) - theta, 0)
    print(f"step {t}: max |conv - dense| = {np.max(np.abs(w_conv.ravel() - w_dense)):.2e}")

# The same step on real feature maps, with 3x3 kernels
H = 16
ks = [rng.standard_normal((C, C, 3, 3)) for _ in range(4)]
block = CDBlockParams(*ks, *ks, theta=np.full(3 * C, 0.05))
v = rng.standard_normal((3 * C, H, H))
for _ in range(50):   # power iteration for ||D||^2
    v = dict_adjoint(block, dict_forward(block, v / np.linalg.norm(v)))
L = np.linalg.norm(v) * 1.05
ks = [k / np.sqrt(L) for k in ks]
block = CDBlockParams(*ks, *ks, theta=np.full(3 * C, 0.05))

Z = rng.standard_normal((2 * C, H, H))
W = np.zeros((3 * C, H, H))


def objective(W):
    r = dict_forward(block, W) - Z
    return 0.5 * np.sum(r * r) + 0.05 * np.abs(W).sum()


print()
for t in range(1, 21):
    W = cdblock_step(block, W, Z)
    if t in (1, 2, 5, 10, 20):
        print(f"iteration {t:2d}: objective {objective(W):9.4f}, "
              f"nonzeros {np.count_nonzero(W)} / {W.size}")
