import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "ebqrng._kernels",
        sources=["src/ebqrng/_kernels.pyx", "src/ebqrng/_clmul.c"],
        include_dirs=[np.get_include(), "src/ebqrng"],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
