import os

import numpy as np
from setuptools import Extension, setup

# KAPPAQKD_NO_EXT=1 builds a pure-Python install (numpy kernel only).
ext_modules = []
if not os.environ.get("KAPPAQKD_NO_EXT"):
    from Cython.Build import cythonize

    ext = Extension(
        "kappaqkd._kernel",
        ["src/kappaqkd/_kernel.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={"language_level": 3, "boundscheck": False, "wraparound": False, "cdivision": True},
    )

setup(ext_modules=ext_modules)
