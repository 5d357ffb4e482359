"""Build script for the compiled training kernel.

The extension is optional: if Cython (or a C compiler) is unavailable the
package still installs and falls back to the pure-Python kernel at import
time. Set VF_PURE=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("VF_PURE") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "variance_forge._kernel.ckernels",
                    ["src/variance_forge/_kernel/ckernels.pyx"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
