"""Continuous-time Gaussian channel toolkit.

Exact sampling of Brownian/Ornstein-Uhlenbeck paths, Kalman-Bucy filtering,
mutual information of Gaussian channels (causal-MMSE and log-determinant
routes), multiuser capacity regions, and desk-scale random-coding
experiments, all reproducible from explicit seeds.
"""

__version__ = "0.1.0"
