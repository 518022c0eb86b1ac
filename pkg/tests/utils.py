from pathlib import Path

import numpy as np
import pandas as pd

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def config_path(name):
    """
    Path of a TOML run config shipped with the tests.

    Parameters
    ----------
    name: str
        The file name without the .toml suffix.
    """
    return CONFIG_DIR / f"{name}.toml"


def write_config(directory, text, name="run.toml"):
    """
    Write a TOML run config for a test.

    Parameters
    ---------
    directory: pathlib.Path
        Usually the tmp_path fixture. Outputs of the run land in
        directory / "output" unless the config says otherwise.
    text: str
        The TOML text.
    name: str
        The file name.
    """
    file = Path(directory) / name
    file.write_text(text, encoding="utf-8")
    return file


def load_text_file(file_path):
    """
    Load text file from the path

    Parameters
    ----------
    file_path: str
        The path of the file.
    """
    with open(file_path, "r") as f:
        return f.read()


def load_csv(file_path):
    return pd.read_csv(file_path)


def observed_order(hs, errors):
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
