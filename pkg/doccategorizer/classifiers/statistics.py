import os
from typing import Dict, List

import pandas as pd

COLUMNS = ["epoch", "loss", "val_loss", "f1_macro", "f1_micro", "seconds"]


class StatisticsLog:
    """Per-epoch training statistics, rewritten to a CSV file after every epoch."""

    def __init__(self, path: str):
        self.path = path
        self.rows: List[list] = []
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

    def append(self, epoch: int, statistics: Dict[str, float]) -> None:
        self.rows.append([epoch] + [statistics[c] for c in COLUMNS[1:]])
        self.frame().to_csv(self.path, index=False)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=COLUMNS)

    @staticmethod
    def read(path: str) -> pd.DataFrame:
        return pd.read_csv(path)
