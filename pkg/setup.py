from setuptools import setup, find_packages

setup(
    name="multiKGQA",
    version="0.1",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"multiKGQA": ["data/*.json"]},
    install_requires=[
        "attrs",
        "numpy",
        "pandas",
        "scikit-learn",
        "pkbar",
        "rdflib",
        "parsimonious",
        "requests",
        "nltk",
        "networkx",
    ],
    entry_points={"console_scripts": ["multikgqa=multiKGQA.cli:main"]},
)
