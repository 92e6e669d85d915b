import numpy as np
from setuptools import Extension, setup

# The compiled kernels are an optimization, not a requirement: if Cython is
# unavailable the package installs pure-Python and selects the numpy fallback
# at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "structured_omd.kernels._ckernels",
                ["src/structured_omd/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
