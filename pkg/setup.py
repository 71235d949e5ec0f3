from setuptools import setup, find_packages

setup(
    name="cat-lab",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        'numpy>=1.26.0',
        'scipy>=1.11.0',
        'pandas>=2.2.0',
        'openpyxl>=3.1.0',
        'python-dotenv>=1.0.0'
    ],
    extras_require={
        'test': ['pytest>=8.0.0']
    },
    entry_points={
        'console_scripts': [
            'cat-lab=cat_lab.cli.main:main'
        ]
    },
    python_requires='>=3.10'
)
