import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name: str, sourcedir: str = "") -> None:
        super().__init__(name, sources=[])
        self.sourcedir = os.fspath(Path(sourcedir).resolve())


class CMakeBuild(build_ext):
    def build_extension(self, ext: CMakeExtension) -> None:
        ext_path = Path.cwd() / self.get_ext_fullpath(ext.name)
        pkg_dir = ext_path.parent.resolve()

        cmake_args = [
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={pkg_dir}{os.sep}",
            f"-DPYTHON_EXECUTABLE={sys.executable}",
            f"-DPython_EXECUTABLE={sys.executable}",
            "-DCMAKE_BUILD_TYPE=Release",
            "-DCOVQ_BUILD_PYTHON=ON",
            "-DCOVQ_BUILD_TESTS=OFF",
        ]

        build_temp = Path(self.build_temp) / ext.name
        build_temp.mkdir(parents=True, exist_ok=True)

        subprocess.run(["cmake", ext.sourcedir, *cmake_args], cwd=build_temp, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core", f"-j{os.cpu_count() or 2}"],
            cwd=build_temp,
            check=True,
        )

        built = build_temp / "python" / "covq" / os.path.basename(self.get_ext_filename(ext.name))
        # The module lands either at the redirected output directory or the
        # staged package dir, depending on the generator.
        if not built.exists():
            candidates = list((build_temp / "python" / "covq").glob("_core*"))
            if not candidates:
                candidates = list(pkg_dir.glob("_core*"))
            if not candidates:
                raise RuntimeError("could not locate the built _core module")
            built = candidates[0]
        target = pkg_dir / built.name
        pkg_dir.mkdir(parents=True, exist_ok=True)
        if built.resolve() != target.resolve():
            self.copy_file(built, target)


setup(
    name="covq",
    version="0.1.0",
    description="Recurrent deep Q-learning for energy-constrained grid coverage",
    packages=["covq"],
    package_dir={"": "python"},
    ext_modules=[CMakeExtension("covq._core")],
    cmdclass={"build_ext": CMakeBuild},
    python_requires=">=3.9",
    zip_safe=False,
)
