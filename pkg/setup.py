import json
from setuptools import setup

with open("spde_richardson/package-info.json") as f:
    package = json.load(f)

with open("docs/README-PyPi.md", encoding="utf-8") as f:
    long_description = f.read()

package_name = package["name"].replace(" ", "_").replace("-", "_")

setup(
    name=package_name,
    version=package["version"],
    author=package["author"],
    packages=[package_name],
    package_data={package_name: ["package-info.json"]},
    include_package_data=True,
    license=package["license"],
    description=package.get("description", package_name),
    long_description=long_description,
    long_description_content_type="text/markdown",
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.17",  # numpy.random.Generator
        "scipy>=1.8",
        "sympy>=1.9",  # exact extrapolation weights
        "mpmath>=1.2",  # high-precision expansion fits
        "pandas>=1.3",
        "packaging>=21.0",
        'tomli>=1.1; python_version<"3.11"',
    ],
    extras_require={
        "dev": [
            # Packages needed to run the tests.
            "black",  # code formatting
            "pytest",  # running tests
        ]
    },
    entry_points={
        "console_scripts": [
            "spde-richardson=spde_richardson.cli:main",
        ]
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
