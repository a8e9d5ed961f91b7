"""
Where the joint step saves multiplications
==========================================

A cyclic sweep over the per-source components touches every dictionary
block more than once. The joint CDBlock step applies each block exactly
twice, once forward and once in the adjoint direction. This script
compares the closed-form counts with what the instrumented kernels
actually perform.
"""

from cdfuse.cost import cost_report, count_block_mults, m_am, m_joint, reduction
from cdfuse.network import ModelConfig

# Closed forms for two sources, 3x3 kernels, 5 channels, a 256x256 image
print(cost_report(2).to_text())
print()

# The saving depends only on the number of sources
for n in range(1, 7):
    r = reduction(n)
    print(f"N={n}  saving {r} = {float(r):.4f}")
print()

# Instrumented counts: run one step of each kind and tally every kernel tap
cfg = ModelConfig()
for size in (32, 64):
    uni = count_block_mults("unified", cfg, size, size)
    alt = count_block_mults("alternating", cfg, size, size)
    print(f"{size}x{size}: joint {uni:>11,d} (formula {m_joint(2, 3, 5, size, size):>11,d})"
          f"  alternating {alt:>11,d} (formula {m_am(2, 3, 5, size, size):>11,d})"
          f"  ratio {alt / uni:.3f}")
