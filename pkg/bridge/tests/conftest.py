import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def dataset_path(tmp_path_factory):
    """A small dataset produced through the primary package's CLI."""
    out = tmp_path_factory.mktemp("data")
    subprocess.run(
        [
            sys.executable,
            "-m",
            "qcloudsim.cli",
            "generate",
            "--seed",
            "0",
            "--out",
            str(out),
            "--subsets",
            "6",
            "--tasks",
            "5",
        ],
        check=True,
        capture_output=True,
    )
    return out / "dataset.csv"


@pytest.fixture()
def server_argv(dataset_path):
    return [
        sys.executable,
        "-m",
        "qcloudsim.cli",
        "serve-env",
        "--stdio",
        "--dataset",
        str(dataset_path),
    ]
