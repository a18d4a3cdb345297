"""Builds the optional compiled filter-bank kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes the wavelet hot loops faster.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "pvdamp._kernels._filterbank",
        ["src/pvdamp/_kernels/_filterbank.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
