import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: install the numpy backend only
    ext_modules = []
else:
    ext = Extension(
        "tec._kernels_ext",
        ["src/tec/_kernels_ext.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,  # a failed compile falls back to the numpy backend
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
