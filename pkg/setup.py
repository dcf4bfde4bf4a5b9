"""Build script: compiles the optional ratio-sweep kernel.

The package is fully functional without the extension (a pure-Python
fallback with identical arithmetic is selected at import time), so any
failure to build it is downgraded to a warning.
"""

import warnings

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pinwall._ratios",
                ["src/pinwall/_ratios.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    warnings.warn(f"building without compiled kernel: {exc}")

setup(ext_modules=ext_modules)
