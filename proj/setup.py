from glob import glob

from pybind11.setup_helpers import ParallelCompile, Pybind11Extension, build_ext
from setuptools import setup

ParallelCompile("NPY_NUM_BUILD_JOBS", default=8).install()

ext = Pybind11Extension(
    "yflow._core",
    sorted(glob("src/*.cpp")) + ["bindings/module.cpp"],
    include_dirs=["include", "vendor", "/opt/vendor"],
    cxx_std=20,
    extra_compile_args=["-O2"],
)

setup(
    name="yflow",
    version="0.1.0",
    description="Y-shaped generative flows: branch-friendly neural-ODE transport",
    packages=["yflow"],
    package_dir={"": "python"},
    ext_modules=[ext],
    cmdclass={"build_ext": build_ext},
    python_requires=">=3.9",
)
