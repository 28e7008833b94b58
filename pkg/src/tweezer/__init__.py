"""Single-atom optical tweezer thermometry and cooling toolkit."""

__version__ = "0.1.0"
