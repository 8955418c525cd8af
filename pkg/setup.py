"""Build the optional compiled kernels.

The extension accelerates the inner loops of the quantile-coordinate solver.
If the build fails (no compiler, no Cython), installation still succeeds and
the package falls back to the pure-numpy kernels at import time.
"""
import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"WARNING: compiled kernels skipped ({exc}); "
                  "the pure-numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "the pure-numpy fallback will be used")


try:
    from Cython.Build import cythonize
    ext_modules = cythonize(
        [Extension(
            "mflow._kernels",
            ["src/mflow/_kernels.pyx"],
            extra_compile_args=["-O3"],
            include_dirs=[numpy.get_include()],
        )],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
