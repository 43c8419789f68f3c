import logging

import numpy as np

logger = logging.getLogger(__name__)


class UnitConverter:
    """
    Use this class to convert units for certain dataframe cols

    :param convert_cols: A set of columns to apply predefined conversions
    :type convert_cols: list/set
    """

    all_deg_metrics = []
    all_fs_metrics = []
    all_metrics = all_deg_metrics + all_fs_metrics

    def __init__(self, convert_cols=None):
        if convert_cols is not None:
            convert_cols = set(convert_cols)
            defaults = set(self.all_metrics)
            invalid = convert_cols - defaults
            if any(invalid):
                logger.warning(
                    "Ignoring columns with no conversion: %s", sorted(invalid)
                )
            self.convert_cols = list(convert_cols & defaults)
        else:
            self.convert_cols = self.all_metrics

    def _rename_converted_cols(self, df, metrics, old_suffix, new_suffix):
        """
        Swap the unit suffix of converted cols
        For example, 'angle_deg' becomes 'angle_rad'

        :param df: a dataframe
        :type df: pandas dataframe obj

        :param metrics: metrics to rename
        :type metrics: list of strings

        :param old_suffix: unit suffix the metric names end with
        :type old_suffix: str

        :param new_suffix: unit suffix to put in its place
        :type new_suffix: str
        """
        updated_headers = [
            header[: -len(old_suffix)] + new_suffix for header in metrics
        ]
        d_to_rename = dict(zip(metrics, updated_headers))
        return df.rename(columns=d_to_rename)

    def _convert_to_rad(self, df, deg_metrics):
        """
        Convert angle fields from degrees to radians

        :param df: dataframe
        :type df: pandas dataframe obj

        :param deg_metrics: List of metrics to be converted from deg -> rad
        :type deg_metrics: List
        """
        for metric in deg_metrics:
            df[metric] = np.deg2rad(df[metric].to_numpy(dtype=float))
        return self._rename_converted_cols(df, deg_metrics, "_deg", "_rad")

    def _convert_to_ps(self, df, fs_metrics):
        """
        Convert delay fields from femtoseconds to picoseconds
        """
        for metric in fs_metrics:
            df[metric] = df[metric] / 1000.0
        return self._rename_converted_cols(df, fs_metrics, "_fs", "_ps")

    def _select_cols(self, df, subset):
        return [c for c in df.columns if c in set(subset) & set(self.convert_cols)]

    def convert_metrics(self, df):
        """
        Convert metrics to new unit type, returns a new dataframe

        :param df: dataframe
        :type df: pandas dataframe obj
        """
        df = df.copy()
        deg_metrics = self._select_cols(df, self.all_deg_metrics)
        df = self._convert_to_rad(df, deg_metrics)

        fs_metrics = self._select_cols(df, self.all_fs_metrics)
        df = self._convert_to_ps(df, fs_metrics)
        return df


class ScanConverter(UnitConverter):
    all_deg_metrics = ["angle_deg"]
    all_metrics = all_deg_metrics


class HomConverter(UnitConverter):
    all_fs_metrics = ["delay_fs", "tau0_fs", "tau0_se_fs", "sigma_fs", "sigma_se_fs"]
    all_metrics = all_fs_metrics
