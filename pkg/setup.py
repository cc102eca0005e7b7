"""Build the optional Cython kernels.

The package works without them: ``fecgcs.kernels`` falls back to the NumPy
implementation when the extension is missing. Set ``FECGCS_NO_EXT=1`` to skip
compilation entirely.
"""
import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("FECGCS_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "fecgcs._kernels",
        ["src/fecgcs/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


setup(ext_modules=_extensions())
