"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile only costs speed, never functionality.
"""

import numpy as np
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "motionforge.kernels._ckernels",
                ["src/motionforge/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    import warnings

    warnings.warn(f"Cython extension skipped ({exc}); using NumPy kernel fallback")
    extensions = []

setup(ext_modules=extensions)
