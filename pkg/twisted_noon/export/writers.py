import json
import os

import numpy as np
import pandas as pd

from ..exceptions import HologramExportError


def _ensure_parent(file):
    parent = os.path.dirname(os.fspath(file))
    if parent:
        os.makedirs(parent, exist_ok=True)


def _to_builtin(value):
    """
    json.dump default for numpy scalars/arrays and other non-native values
    """
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if hasattr(value, "value"):
        return value.value
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def save_csv(df, file, index=False, **to_csv_kwargs):
    """
    Save dataframe as .csv, full float precision

    :param df: dataframe to save
    :type df: df object

    :param file: File path
    :type file: string

    :param index: save df index
    :type index: Boolean
    """
    _ensure_parent(file)
    df.to_csv(file, index=index, **to_csv_kwargs)


def save_json(data, file):
    """
    Save a dict as .json with sorted keys and two-space indent

    :param data: dict to save
    :type data: dict

    :param file: File path
    :type file: string
    """
    _ensure_parent(file)
    with open(file, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_to_builtin)
        f.write("\n")


def load_json(file):
    with open(file) as f:
        return json.load(f)


def save_image(pixels, file):
    """
    Save an 8-bit grayscale array as .pgm or .png

    :param pixels: 2d uint8 array, rows first
    :type pixels: numpy array

    :param file: File path, the suffix picks the format
    :type file: string
    """
    from PIL import Image

    formats = {".pgm": "PPM", ".png": "PNG"}
    suffix = os.path.splitext(os.fspath(file))[1].lower()
    if suffix not in formats:
        raise HologramExportError(
            file, f"unsupported image type {suffix!r}, use .pgm or .png"
        )
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    try:
        _ensure_parent(file)
        Image.fromarray(pixels).save(file, format=formats[suffix])
    except OSError as e:
        raise HologramExportError(file, str(e)) from e


def tableize(df, tablefmt="pretty", is_print=True):
    """
    Converts dataframe to a formatted table
    For more details, see https://pypi.org/project/tabulate/

    :param df: dataframe to save
    :type df: df object

    :param tablefmt: format of table
    :type tablefmt: string

    :param is_print: print to standard output?
    :type is_print: boolean
    """
    from tabulate import tabulate

    if isinstance(df, dict):
        df = pd.DataFrame([df])
    table = tabulate(
        df,
        headers="keys",
        tablefmt=tablefmt,
        showindex=False,
        stralign="center",
        numalign="center",
    )
    if is_print:
        print(table)
    return table
