import csv
import os
from setuptools import find_packages, setup

PKG_NAME = 'miprobe'
HERE = os.path.dirname(os.path.abspath(__file__))


def read_requirements(name):
    with open(os.path.join(HERE, name)) as f:
        return [ln.strip() for ln in f if ln.strip() and not ln.startswith('#')]


def current_version():
    path = os.path.join(HERE, PKG_NAME, 'common', 'data', 'versions.csv')
    with open(path, newline='') as f:
        current = [row['Version'] for row in csv.DictReader(f) if row['Current'] == 'True']
    if len(current) != 1:
        raise RuntimeError(f'{path} must mark exactly one version as current')
    return current[0]


with open(os.path.join(HERE, 'README.md')) as f:
    long_description = f.read()

setup(
    name=PKG_NAME,
    version=current_version(),
    description='Mutual information lower bounds for evaluating speech representations',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=find_packages(include=[PKG_NAME, f'{PKG_NAME}.*']),
    package_data={f'{PKG_NAME}.common': ['data/*.csv']},
    include_package_data=True,
    python_requires='>=3.9, <4',
    install_requires=read_requirements('requirements.txt'),
    extras_require={'dev': read_requirements('requirements-dev.txt')},
    entry_points={'console_scripts': [f'{PKG_NAME}={PKG_NAME}.cli.main:main']},
    test_suite='tests',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Programming Language :: Python :: 3 :: Only',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11'
    ],
    keywords='mutual information, probing, k-means, self-supervised speech, representation evaluation'
)
