"""Build script for the optional compiled kernel extension.

The package works without the extension (claimcheck.kernels falls back to
the numpy implementation), so a failed compile downgrades to a warning
instead of breaking the install.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


def make_extensions():
    from setuptools import Extension
    from Cython.Build import cythonize
    import numpy as np

    ext = Extension(
        "claimcheck._kernels",
        sources=["src/claimcheck/_kernels.pyx"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3), [np.get_include()]


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, cython failure, ...
            print(f"warning: compiled kernels skipped ({exc}); "
                  "falling back to pure-python kernels", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "falling back to pure-python kernels", file=sys.stderr)


try:
    ext_modules, include_dirs = make_extensions()
    for ext in ext_modules:
        ext.include_dirs.extend(include_dirs)
except Exception as exc:  # Cython/numpy unavailable at build time
    print(f"warning: cython unavailable ({exc}); building without compiled "
          "kernels", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
