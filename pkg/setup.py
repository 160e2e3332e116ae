"""Build the optional compiled kernel. Without a compiler or Cython the
package installs pure-Python and selects the fallback loops at import."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("MOX_FRONTEND_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "mox_frontend._kernels",
                    ["src/mox_frontend/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
