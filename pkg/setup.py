"""Build script for the compiled distance kernels.

The package works without the extension (a NumPy fallback is selected at
import time); building it is strongly recommended for large evaluations.
"""

from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "fgvc3d.metrics._kernels",
        ["src/fgvc3d/metrics/_kernels.pyx"],
        extra_compile_args=["-O3", "-fopenmp"],
        extra_link_args=["-fopenmp"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
