"""Outage reliability metrics, influence diagnostics and predictor selection."""

from pathlib import Path

try:
    from . import _gridres as _core
except ImportError:  # in-tree build: the extension sits outside the package
    import _gridres as _core

globals().update({k: v for k, v in vars(_core).items() if not k.startswith("_")})
__version__ = _core.__version__


def default_taxonomy() -> Path:
    """Path of the bundled cause taxonomy, if installed alongside the package."""
    return Path(__file__).with_name("data") / "cause_taxonomy.cfg"
