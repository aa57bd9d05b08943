"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure numpy/heapq fallback is
selected at import time), so a failed compile only costs speed.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "fwrde._kernels._core",
                sources=["src/fwrde/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
else:
    extensions = []

setup(ext_modules=extensions)
