from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    # -ffp-contract=off keeps the dot products strict IEEE sequential so the
    # native kernel matches the documented summation order op-for-op.
    ext_modules = cythonize(
        [
            Extension(
                "multirag.kernels._native",
                ["src/multirag/kernels/_native.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
else:
    # Pure-Python install: multirag.kernels falls back to the NumPy reference.
    ext_modules = []

setup(ext_modules=ext_modules)
