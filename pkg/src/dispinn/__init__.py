"""Physics-informed neural networks for nonlinear dispersive PDEs."""
import jax

# Fifth derivatives of tanh networks lose most of their digits in float32.
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"
