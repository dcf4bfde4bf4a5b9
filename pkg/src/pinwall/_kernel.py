"""Kernel dispatch: compiled backward sweeps when available, Python otherwise."""

try:  # pragma: no cover - which branch runs depends on the build
    from ._ratios import backward_ratios, critical_ratios

    COMPILED = True
except ImportError:  # pragma: no cover
    from ._ratios_py import backward_ratios, critical_ratios

    COMPILED = False

__all__ = ["backward_ratios", "critical_ratios", "COMPILED"]
