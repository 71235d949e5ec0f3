"""
Bank Reader - Legge banche di item da CSV o Excel
Formato: intestazione a,b,c (c opzionale, default 0), un item per riga
"""

import re
from pathlib import Path
from typing import List, Optional, Tuple, Union

import pandas as pd

from cat_lab.core.errors import BankFormatError, InvalidItemError
from cat_lab.core.irt_core import Item
from cat_lab.design.designer import FiniteBank

REQUIRED_COLUMNS = ("a", "b")
EXCEL_SUFFIXES = {".xlsx", ".xlsm"}
FIRST_DATA_LINE = 2


class BankReader:
    """Classe per leggere banche di item da file locali"""

    def __init__(self, base_path: Optional[Union[str, Path]] = None):
        """
        Inizializza il reader

        Args:
            base_path: directory da cui risolvere i path relativi (None = directory corrente)
        """
        self.base_path = Path(base_path) if base_path else None

    def _resolve(self, path: Union[str, Path]) -> Path:
        file_path = Path(path)
        if self.base_path and not file_path.is_absolute():
            file_path = self.base_path / file_path
        if not file_path.exists():
            raise FileNotFoundError(f"File banca non trovato: {file_path}")
        return file_path

    def read_bank_table(self, path: Union[str, Path]) -> Tuple[pd.DataFrame, str]:
        """
        Legge il file come tabella di stringhe

        Args:
            path: file .csv oppure .xlsx (primo foglio)

        Returns:
            Tuple[DataFrame, str]: (colonne a, b, c e line = riga del file, path_file)
        """
        file_path = self._resolve(path)

        if file_path.suffix.lower() in EXCEL_SUFFIXES:
            frame = pd.read_excel(file_path, sheet_name=0, dtype=str, engine="openpyxl")
        else:
            try:
                frame = pd.read_csv(file_path, dtype=str, keep_default_na=False,
                                    skip_blank_lines=False, skipinitialspace=True)
            except pd.errors.EmptyDataError:
                raise BankFormatError(1, "file vuoto, manca l'intestazione a,b,c")
            except pd.errors.ParserError as e:
                match = re.search(r"line (\d+)", str(e))
                raise BankFormatError(int(match.group(1)) if match else 1, f"riga malformata ({e})")

        frame = frame.fillna("")
        frame.columns = [str(col).strip().lower() for col in frame.columns]
        missing = [col for col in REQUIRED_COLUMNS if col not in frame.columns]
        if missing:
            raise BankFormatError(1, f"colonne mancanti nell'intestazione: {', '.join(missing)}")
        unknown = [col for col in frame.columns if col not in ("a", "b", "c")]
        if unknown:
            raise BankFormatError(1, f"colonne sconosciute nell'intestazione: {', '.join(unknown)}")
        if "c" not in frame.columns:
            frame["c"] = "0"

        frame["line"] = frame.index + FIRST_DATA_LINE
        # Le righe vuote non sono item ma contano per la numerazione
        blank = (frame[["a", "b", "c"]].apply(lambda col: col.str.strip()) == "").all(axis=1)
        return frame.loc[~blank, ["a", "b", "c", "line"]].reset_index(drop=True), str(file_path)

    @staticmethod
    def parse_items(frame: pd.DataFrame) -> Tuple[List[Item], List[BankFormatError]]:
        """
        Converte ogni riga in Item, raccogliendo tutti gli errori di riga

        Returns:
            Tuple[List, List]: (item validi, errori con numero di riga)
        """
        items: List[Item] = []
        errors: List[BankFormatError] = []
        for row in frame.itertuples(index=False):
            line = int(row.line)
            try:
                a, b = float(row.a), float(row.b)
                c = float(row.c) if str(row.c).strip() else 0.0
            except ValueError:
                errors.append(BankFormatError(line, f"valore non numerico in ({row.a}, {row.b}, {row.c})"))
                continue
            try:
                items.append(Item(a=a, b=b, c=c))
            except InvalidItemError as e:
                errors.append(BankFormatError(line, str(e)))
        return items, errors


def load_bank(path: Union[str, Path]) -> FiniteBank:
    """
    Funzione di convenienza: legge e valida la banca, fallendo alla prima riga non valida

    Raises:
        BankFormatError: con il numero di riga (1 = intestazione)
    """
    reader = BankReader()
    frame, _ = reader.read_bank_table(path)
    items, errors = reader.parse_items(frame)
    if errors:
        raise errors[0]
    if not items:
        raise BankFormatError(1, "la banca non contiene item")
    return FiniteBank(tuple(items))
