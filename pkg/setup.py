from setuptools import setup

setup(
    name="qnmlab",
    version="1.0.0",
    description="Quantum non-malleability and encryption workbench — schemes, attacks, designs, CLI",
    py_modules=[
        # Config
        "cli", "qnm_config",
        # Core
        "QNMCore", "QNMChannels", "QNMDesigns",
        # Schemes and security notions
        "QNMSchemes", "QNMSecurity", "QNMAuth",
        # Experiments
        "QNMExperiments",
        # Utilities
        "QNMBatch", "QNMCache", "QNMExceptions", "QNMTypes",
    ],
    install_requires=[
        "numpy>=1.24",     # density matrices, Choi matrices, einsum contractions
        "scipy>=1.10",     # sqrtm / expm, Haar sampling, diamond-norm search
        "click>=8.0",      # CLI
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "qnmlab=cli:cli",
        ],
    },
    python_requires=">=3.11",
)
