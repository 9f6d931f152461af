import os

from setuptools import setup

ext_modules = []
if os.environ.get("EISLAB_PURE_PYTHON") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "eislab._kernels",
                    ["src/eislab/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except Exception as exc:  # pragma: no cover - build hosts without a toolchain
        print(f"warning: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)
