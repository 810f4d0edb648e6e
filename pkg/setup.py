from setuptools import setup, find_packages

setup(
    name="sbscv-lab",
    version="0.1.0",
    description="Numerical checks of spectrum broadcast structure bounds for continuous-variable systems",
    packages=find_packages(exclude=("tests", "tests.*", "examples", "examples.*")),
    package_data={"sbscv_lab.config": ["scenarios/*.json"]},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.5",
        "jsonschema>=4.0",
        "python-dotenv>=0.21",
        "psutil>=5.9",
    ],
    extras_require={
        "test": ["pytest>=7.0", "hypothesis>=6.0"],
    },
    entry_points={
        "console_scripts": ["sbscv=sbscv_lab.runner.cli:main"],
    },
)
