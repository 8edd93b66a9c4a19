import io
import json
import os
import tempfile
from pathlib import Path
from typing import Dict, Tuple

import pandas as pd

FLOAT_FORMAT = "%.12g"
COMMENT = "#"


class TableCodec:
    """
    Class for writing and reading CSV tables with a commented JSON header

    Header entries are written one per line as `# key: <json>` before the
    column row, so any CSV reader that skips comments can consume the table.
    """

    @staticmethod
    def encode_table(frame: pd.DataFrame, header: Dict[str, object]) -> str:
        """
        Encode a table and its header as text.

        Args:
            frame (pd.DataFrame): The table to encode.
            header (dict): Metadata echoed as comment lines, keys in sorted order.

        Returns:
            str: CSV text with a deterministic float format.
        """
        lines = [f"{COMMENT} {key}: {json.dumps(header[key], sort_keys=True)}"
                 for key in sorted(header)]
        body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return "\n".join(lines) + ("\n" if lines else "") + body

    @staticmethod
    def decode_table(text: str) -> Tuple[Dict[str, object], pd.DataFrame]:
        """
        Decode text produced by encode_table.

        Args:
            text (str): CSV text, optionally preceded by comment lines.

        Returns:
            tuple: The header dictionary and the table.
        """
        header = {}
        for line in text.splitlines():
            if not line.startswith(COMMENT):
                break
            key, _, value = line[len(COMMENT):].strip().partition(": ")
            try:
                header[key] = json.loads(value)
            except json.JSONDecodeError:
                header[key] = value
        frame = pd.read_csv(io.StringIO(text), comment=COMMENT)
        return header, frame

    @staticmethod
    def write_table(path, frame: pd.DataFrame, header: Dict[str, object]) -> Path:
        """
        Write a table atomically: a temporary sibling file replaces the target.

        Args:
            path: Destination file.
            frame (pd.DataFrame): The table to write.
            header (dict): Metadata echoed as comment lines.

        Returns:
            Path: The written path.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = TableCodec.encode_table(frame, header)
        handle, tmp_path = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(handle, "w", encoding="utf-8", newline="") as stream:
                stream.write(text)
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise
        return path

    @staticmethod
    def read_table(path) -> Tuple[Dict[str, object], pd.DataFrame]:
        return TableCodec.decode_table(Path(path).read_text(encoding="utf-8"))
