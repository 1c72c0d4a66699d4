"""Weighted-sparse and sparse/low-rank tensor-train least squares.

The package approximates high-dimensional functions from point samples in
tensor-train format with weighted-sparse component tensors.  Submodules:

- ``wseq``     weighted sequence spaces, best n-term truncation bounds
- ``tensor``   sparse COO tensors and tensor trains
- ``decomp``   sparse and weight-orthogonal QC canonicalisation
- ``basis``    Legendre / Hermite / hierarchical hat bases and weight models
- ``optim``    design assembly, weighted LASSO with cross-validation
- ``als``      the SALS and SSALS alternating solvers
- ``analysis`` restricted-isometry tooling, sample-complexity calculators,
  power-series to orthogonal-polynomial coefficient transforms
- ``darcy``    1D P1 finite-element data generator for parametric diffusion
- ``cli``      experiment runner (``sptt`` command)
"""

__version__ = "0.1.0"

__all__ = [
    "wseq",
    "tensor",
    "decomp",
    "basis",
    "optim",
    "als",
    "analysis",
    "darcy",
    "cli",
]
