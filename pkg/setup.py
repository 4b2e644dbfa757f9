"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python twin of every
kernel is selected at import time), so a missing compiler or Cython
only costs speed, never functionality.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/edgecep/_kernels/_ckernels.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
