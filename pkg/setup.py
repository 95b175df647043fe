import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        [
            Extension(
                "kacbc.glauber._core",
                ["src/kacbc/glauber/_core.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: the pure-Python fallback must be
                # bit-identical, so no FMA contraction in the hot loop
                extra_compile_args=["-O3", "-march=native", "-funroll-loops",
                                    "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
)
