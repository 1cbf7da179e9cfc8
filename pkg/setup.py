import sys

from setuptools import Extension, setup

# The compiled kernel is optional: the package falls back to the NumPy
# implementation when the extension is absent (see hadamard_vp._backend).
ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "hadamard_vp._kernels",
                ["src/hadamard_vp/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except ImportError:
    print("Cython not available; building without the compiled kernel", file=sys.stderr)

setup(ext_modules=ext_modules)
