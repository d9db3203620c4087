"""Build script for the optional Cython kernels.

The package works without them; ``opmdrive._backend`` falls back to the
pure-Python implementations when the extension is not importable.

    python setup.py build_ext --inplace
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("OPMDRIVE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "opmdrive._core",
                    sources=["src/opmdrive/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": "3",
            },
        )

setup(ext_modules=ext_modules)
