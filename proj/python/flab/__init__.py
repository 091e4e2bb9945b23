"""Python interface to the evolutionary Faddeev model laboratory.

The compiled extension carries the whole API; this package just locates it.
Installed builds place the extension inside the package, in-tree builds put
it on sys.path next to the package.
"""

try:
    from ._flab import *  # noqa: F401,F403
    from ._flab import __doc__ as _doc
except ImportError:
    from _flab import *  # noqa: F401,F403
    from _flab import __doc__ as _doc

__doc__ = _doc or __doc__
__all__ = [
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "config_echo",
    "config_hash",
    "run_experiment",
    "diagnostics_csv_header",
    "null_identity_residual",
    "wave_identity_residual",
    "commutator_residuals",
    "tail_reconstruction_residual",
]
