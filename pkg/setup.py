"""Build script: compiles the optional Cython battery kernel.

The package works without the extension (pure-Python fallback in
battcal._pysim); build failures are therefore non-fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/battcal/_fastsim.pyx"],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
