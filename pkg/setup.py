import os

from setuptools import Extension, setup

# The compiled kernels are optional: without Cython (or with
# SEIRCTL_PURE_PYTHON=1) the package installs with the pure-Python fallback.
ext_modules = []
if os.environ.get("SEIRCTL_PURE_PYTHON") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "seirctl._core",
                    ["src/seirctl/_core.pyx"],
                    # -ffp-contract=off keeps the compiled kernels bit-compatible
                    # with the pure-Python fallback (no FMA contraction).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
