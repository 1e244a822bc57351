"""Build script for the optional compiled kernels.

The package works without them; if Cython or a compiler is missing the
extension is skipped and the numpy kernels are used.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("HIDIM_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("hidim._kernels", ["src/hidim/_kernels.pyx"],
                       include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
