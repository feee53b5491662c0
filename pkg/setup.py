import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: install the numpy kernels only
    cythonize = None

np_dir = os.path.dirname(np.__file__)

extensions = [
    Extension(
        "brwmartin._ckernels",
        ["src/brwmartin/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[os.path.join(np_dir, "random", "lib"), os.path.join(np_dir, "_core", "lib")],
        libraries=["npyrandom", "npymath"],
        extra_compile_args=["-O3"],
        language="c++",
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}) if cythonize else [])
