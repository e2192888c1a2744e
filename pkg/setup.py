"""Builds the optional Cython kernel extension.

The package works without it: cct.rng falls back to the pure-Python
kernels when the extension is missing. Set CCT_SKIP_CYTHON=1 to skip
compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("CCT_SKIP_CYTHON"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "cct._kernels_cy",
                    ["src/cct/_kernels_cy.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
