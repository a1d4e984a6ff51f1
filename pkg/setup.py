import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

compile_args = ["-O3"]
if not os.environ.get("KML_PORTABLE"):
    compile_args.append("-march=native")

extensions = [
    Extension(
        "kml._kernels._ckernels",
        ["src/kml/_kernels/_ckernels.pyx"],
        include_dirs=[np.get_include(), "src/kml/_kernels"],
        depends=["src/kml/_kernels/_inner.h"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=compile_args,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
