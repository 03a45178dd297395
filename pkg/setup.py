# setup.py

from setuptools import setup, find_packages

setup(
    name="stacked_boosters",
    version="0.1.0",
    description="Stacked booster network for short-term building load forecasting",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    package_data={"config": ["settings.json"]},
    python_requires=">=3.9",
    install_requires=[
        'numpy',
        'pandas',
        'jinja2'  # sweep reports
    ],
    extras_require={
        'dev': ['pytest']
    },
    entry_points={
        'console_scripts': ['sbn=sbn.cli:main']
    }
)
