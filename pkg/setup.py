"""Builds the optional compiled kernel extension.

The package works without it: ``syngen.backend`` falls back to the pure
numpy kernels when ``syngen._ckernels`` is missing, so a failed or skipped
extension build only costs speed.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("syngen._ckernels", ["src/syngen/_ckernels.pyx"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
