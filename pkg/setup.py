from setuptools import setup, find_packages

setup(
    name="codingtrees",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples"]),
    install_requires=[
        "logfire",
        "networkx",
        "pydantic",
        "python-dotenv",
        "rich",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["codingtrees=codingtrees.main:main"]},
)
