"""Build the optional compiled kernels; the package works without them."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SPHEREFLOW_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("sphereflow._ckernels", ["src/sphereflow/_ckernels.pyx"],
                       include_dirs=[np.get_include()], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": 3},
        )
    except Exception as exc:  # pragma: no cover - build environment dependent
        print(f"warning: compiled kernels not built ({exc}); using the numpy fallback")
        ext_modules = []

setup(ext_modules=ext_modules)
