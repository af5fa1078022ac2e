"""Build script for the optional compiled solver core.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a missing compiler only costs speed, not functionality.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vlpsim._kernels_cy",
                ["src/vlpsim/_kernels_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
