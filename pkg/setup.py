"""Build the optional compiled kernels.

The package works without them: ``dronenet.kernels`` falls back to the
pure-Python implementations when the extension is missing.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DRONENET_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        import numpy as np
    except ImportError:  # pragma: no cover - build without Cython
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "dronenet._ckernels",
                ["src/dronenet/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # keep IEEE semantics so compiled and fallback results agree bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
