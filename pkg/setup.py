import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

# Compiled convolution core. The package falls back to the numpy
# implementation at import time if this extension is missing, so a failed
# build is not fatal (see src/nodulemine/kernels/__init__.py).
extensions = [
    Extension(
        "nodulemine.kernels._convcore",
        ["src/nodulemine/kernels/_convcore.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
