"""Build script: compiles the optional native kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so a failed compile only costs speed.  `-ffp-contract=off`
keeps the compiled kernels bitwise-identical to the fallback: both sides
accumulate in 64-bit floats in the same left-to-right order, and fused
multiply-adds would break that.
"""

import sys

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ptge.kernels._native",
                ["src/ptge/kernels/_native.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("Cython not available; building without native kernels", file=sys.stderr)

setup(ext_modules=ext_modules)
