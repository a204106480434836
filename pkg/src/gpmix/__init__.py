"""Latent-process mixture model of garden-path reading.

Joint model of reading times, rereading, and end-of-trial responses across
eye tracking, self-paced reading (uni- and bidirectional), and Maze, with
hierarchical Bayesian fitting, posterior predictive checks, and PSIS-LOO
model comparison against surprisal-based regression competitors.
"""

from jax import config as _jax_config

# Double precision everywhere: the sampler's finite-difference gradient
# contract and the quadrature checks require float64.
_jax_config.update("jax_enable_x64", True)

__version__ = "0.1.0"
