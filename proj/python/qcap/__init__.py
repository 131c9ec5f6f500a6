"""Feedback-capacity bounds for unifilar finite-state channels over
auxiliary Q-graphs: bound solvers, encoder certification, KKT optimality
checks, and posterior-matching simulation."""

try:  # installed layout: extension lives inside the package
    from . import _core
except ImportError:  # build-tree layout: extension sits on PYTHONPATH
    import _core  # type: ignore

globals().update(
    {k: v for k, v in vars(_core).items() if not k.startswith("_")}
)
__all__ = sorted(k for k in vars(_core) if not k.startswith("_"))
__version__ = "0.1.0"
