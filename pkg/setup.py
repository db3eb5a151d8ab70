import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("MAXBLOW_NO_EXT", "") in ("", "0"):
    # exact summation relies on strict IEEE semantics: no -ffast-math, no FMA contraction
    ext_modules = cythonize(
        [
            Extension(
                "maxblow._kernels",
                ["src/maxblow/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O2", "-fopenmp", "-ffp-contract=off"],
                extra_link_args=["-fopenmp"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
