"""Build script for the optional compiled scoring kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so any compilation problem downgrades to a warning instead of
failing the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython kernel if possible, otherwise continue without it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or Cython missing
            warnings.warn(f"compiled scoring kernel not built ({exc}); "
                          "falling back to the pure NumPy backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled scoring kernel not built ({exc}); "
                          "falling back to the pure NumPy backend")


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "fewshot_icnn._score_cy",
        sources=["src/fewshot_icnn/_score_cy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


def _ext_modules():
    exts = _extensions()
    if not exts:
        warnings.warn("Cython or NumPy unavailable at build time; "
                      "building without the compiled scoring kernel")
    return exts


setup(ext_modules=_ext_modules(), cmdclass={"build_ext": OptionalBuildExt})
