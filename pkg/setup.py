from setuptools import Extension, setup

core = Extension(
    "reclaimbench._core",
    sources=[
        "src/reclaimbench/_core/runtime.c",
        "src/reclaimbench/_core/alloc.c",
        "src/reclaimbench/_core/schemes.c",
        "src/reclaimbench/_core/sets.c",
        "src/reclaimbench/_core/bench.c",
        "src/reclaimbench/_core/pymod.c",
    ],
    extra_compile_args=["-O2", "-std=c11", "-pthread", "-Wall", "-Wextra"],
    extra_link_args=["-pthread"],
)

setup(ext_modules=[core])
