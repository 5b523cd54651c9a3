"""Build script for the optional compiled rate-function kernel.

The package works without the extension (a pure-NumPy fallback is selected
at import time), so a missing Cython or compiler only costs speed.
"""

import sys

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    # -fopenmp-simd honors the `omp simd` reduction pragmas in _rfexp.h
    # without linking an OpenMP runtime; compilers that ignore the flag
    # still build a correct scalar kernel.
    flags = [] if sys.platform == "win32" else ["-O3", "-fopenmp-simd"]
    ext_modules = cythonize(
        [
            Extension(
                "linerank._ratefn",
                ["src/linerank/_ratefn.pyx"],
                extra_compile_args=flags,
                depends=["src/linerank/_rfexp.h"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
