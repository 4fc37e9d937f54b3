"""Build the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernels in ``hashgrid._pykernels`` are used instead.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("HASHGRID_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
        ext_modules = cythonize(
            [
                Extension(
                    "hashgrid._ckernels",
                    ["src/hashgrid/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"] + openmp,
                    extra_link_args=openmp,
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("Cython/numpy unavailable; installing pure-Python kernels only")

setup(ext_modules=ext_modules)
