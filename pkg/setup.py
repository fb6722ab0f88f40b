"""Build hook for the optional compiled decoder kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here downgrades to a pure-Python install
instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "d2dsim.ldpc._bp",
                ["src/d2dsim/ldpc/_bp.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - depends on build environment
    print(f"d2dsim: skipping compiled decoder kernel ({exc}); "
          "the numpy fallback will be used")

setup(ext_modules=ext_modules)
