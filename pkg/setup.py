import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="scanbench",
    version="0.1.0",
    long_description=long_description,
    long_description_content_type="text/markdown",
    description="Simulated active 3D scanning with a diffusion scanning policy",
    packages=setuptools.find_packages(exclude=["tests"]),
    package_data={"scanbench": ["etc/*"]},
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.21",
        "scipy>=1.7",
        "torch>=1.13",
        "jinja2>=2.11",
        "matplotlib>=3.4",
    ],
    extras_require={
        "tests": ["pytest>=7"],
    },
    entry_points={
        "console_scripts": ["scanbench=scanbench.__main__:main"],
    },
    classifiers=[
        "Operating System :: POSIX :: Linux",
        "License :: OSI Approved :: MIT License",
        'Programming Language :: Python :: 3',
    ],
)
