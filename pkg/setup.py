import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# No -ffast-math: the compiled kernel must be bit-identical to the pure-Python
# fallback, so IEEE semantics are required.
extensions = [
    Extension(
        "agesched._kernel",
        ["src/agesched/_kernel.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
