# app/utils/file_handler.py
import csv
import io
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np
import structlog
from PIL import Image
from pydantic import BaseModel

from app.config import get_settings
from app.utils.exceptions import InvalidInputException

logger = structlog.get_logger()
settings = get_settings()


class FileHandler:
    """Reads frames and label files, writes JSON/CSV/image outputs."""

    def __init__(self, extensions: Sequence[str] = ()):
        self.extensions = [e.lower() for e in extensions] or settings.image_extensions_list

    def list_images(self, inputs: Iterable[Path]) -> List[Path]:
        """Expand files and directories (recursively) into a sorted, de-duplicated image list."""
        found = set()
        for item in inputs:
            item = Path(item)
            if item.is_dir():
                found.update(
                    p for p in item.rglob("*")
                    if p.is_file() and p.suffix.lower() in self.extensions
                )
            elif item.is_file():
                found.add(item)
            else:
                raise InvalidInputException(f"no such file or directory: {item}")
        return sorted(found, key=str)

    def read_text(self, path: Path) -> str:
        try:
            return Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise InvalidInputException(f"cannot read {path}: {e}")

    def read_label_dir(self, directory: Path, suffix: str = ".txt") -> Dict[str, str]:
        """Map file stem -> contents for every label file in a directory."""
        directory = Path(directory)
        if not directory.is_dir():
            raise InvalidInputException(f"not a directory: {directory}")
        return {p.stem: self.read_text(p) for p in sorted(directory.glob(f"*{suffix}"))}

    def read_metadata(self, path: Path) -> Dict[str, Dict[str, str]]:
        """CSV with a `path` column plus optional `participant` and `fps`."""
        rows = csv.DictReader(io.StringIO(self.read_text(path)))
        if rows.fieldnames is None or "path" not in rows.fieldnames:
            raise InvalidInputException(f"{path}: metadata needs a 'path' column")
        return {row["path"]: row for row in rows}

    def write_text(self, path: Path, text: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info("file_written", path=str(path), size=len(text))
        return path

    def write_json(self, path: Path, model: BaseModel) -> Path:
        return self.write_text(path, model.model_dump_json(indent=2) + "\n")

    def csv_text(self, header: Sequence[str], rows: Iterable[Sequence]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buffer.getvalue()

    def write_csv(self, path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        return self.write_text(path, self.csv_text(header, rows))

    def save_image(self, path: Path, image: np.ndarray) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path)
        logger.info("image_written", path=str(path), shape=list(image.shape))
        return path


file_handler = FileHandler()
