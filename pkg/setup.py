"""Build script for the optional compiled kernel.

If Cython or a C compiler with OpenMP is unavailable the package still
installs and runs on the numpy fallback.
"""
import ctypes.util
import platform

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


ext_modules = []
# glibc's vector math library gives the kernel SIMD exp/log on x86-64
have_mvec = platform.machine() in ("x86_64", "AMD64") and ctypes.util.find_library("mvec")
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "bayespec._core",
                ["src/bayespec/_core.pyx"],
                include_dirs=[np.get_include(), "src/bayespec"],
                define_macros=[("BAYESPEC_HAVE_MVEC", "1")] if have_mvec else [],
                libraries=["mvec", "m"] if have_mvec else ["m"],
                depends=["src/bayespec/_vecmath.h", "src/bayespec/_kernels.h"],
                extra_compile_args=["-O3", "-fopenmp", "-fno-math-errno"],
                extra_link_args=["-fopenmp"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
