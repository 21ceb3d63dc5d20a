"""Learn optimal transport maps between 2D distributions with small networks."""

try:
    from ._neuralot import *  # noqa: F401,F403  (installed wheel)
except ImportError:
    from _neuralot import *  # noqa: F401,F403  (build tree on PYTHONPATH)

__version__ = "0.1.0"
