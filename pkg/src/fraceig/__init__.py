"""Minimal branches of (-Delta)^{1/2} u = lambda g(x) f(u) on model domains.

Modules: ``nonlinearity`` (presets and scalar inequalities), ``discretize``
(grids, spectral half-Laplacian, harmonic extension), ``solve`` (minimal
solutions, continuation, lambda*), ``verify`` (Pohozaev identity and the
small-lambda uniqueness certificate) and ``cli``.
"""
__version__ = "0.1.0"
