"""Build the optional Cython kernels.

If Cython or a C compiler is unavailable the package still installs and
``infonet._kernels`` falls back to the numpy implementation at import.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("INFONET_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        extensions = [
            Extension(
                "infonet._kernels._native",
                ["src/infonet/_kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: table entries must match pointwise libm calls bit for bit
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
