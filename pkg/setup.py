from setuptools import setup

with open("README.md", "r") as fh:
    long_description = fh.read()

setup(name='thr-design',
      version="0.1.0",
      description='Surrogate-assisted design of two-order Helmholtz resonators',
      long_description=long_description,
      long_description_content_type="text/markdown",
      license='GPL-v3',
      packages=['thr_design'],
      include_package_data=True,
      python_requires='>=3.9',
      install_requires=['numpy', 'scipy', 'pandas', 'xarray', 'tqdm'],
      extras_require={
          'test': ['pytest'],
      },
      entry_points={
          'console_scripts': [
              'thr-design=thr_design.cmd_interface:run',
          ]
      },
      zip_safe=False,
)
