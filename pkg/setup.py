import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "relight.synth._raycast",
        ["src/relight/synth/_raycast.pyx"],
        include_dirs=[numpy.get_include()],
        # fp-contract off: the compiled kernel must stay bit-identical to the
        # numpy fallback, so FMA fusion is not allowed to change rounding.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
