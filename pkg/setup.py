import setuptools

requires = [
    'numpy>=1.22',
    'pandas>=1.4',
    'pyyaml>=5.1.1',
    'scikit-learn>=1.0',
    'scipy>=1.9',
    ]

setuptools.setup(
    name="consensus-filter-design",
    version="1.0.0",
    license='MIT',

    description="Minimax polynomial filters that accelerate average consensus on random graphs",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",

    py_modules=[
        'consensus_filters_start',
        ],
    packages=setuptools.find_packages(exclude=['tests']),

    install_requires=requires,
    extras_require={
        'test': ['pytest>=7'],
        },
    python_requires='>=3.8',

    classifiers=[
        'Development Status :: 4 - Beta',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
    ],

    entry_points={
        'console_scripts': [
            'consensus_filters_start = consensus_filters_start:cli',
            ]
        },
    )
