import os

from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the pure
# numpy implementations in snfprune._kernels._fallback when the extension
# is absent. Set SNFPRUNE_NO_EXT=1 to skip the build entirely.
ext_modules = []
if os.environ.get("SNFPRUNE_NO_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "snfprune._kernels._impl",
                ["src/snfprune/_kernels/_impl.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
