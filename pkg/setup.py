"""Build the optional Cython kernels; the package falls back to pure Python without them."""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MTRPREP_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "mtrprep.gsm._gsm_ext",
                    ["src/mtrprep/gsm/_gsm_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                ),
                Extension(
                    "mtrprep._align_ext",
                    ["src/mtrprep/_align_ext.pyx"],
                    extra_compile_args=["-O3"],
                ),
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
