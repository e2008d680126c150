import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: a failed build leaves the numpy fallback in place.
ext_modules = []
if os.environ.get("INTERSECTION_EDGE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "intersection_edge._ckernels",
                    ["src/intersection_edge/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False, "cdivision": True},
        )

setup(ext_modules=ext_modules)
