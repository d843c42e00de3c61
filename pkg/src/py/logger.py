import logging
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Iterator

formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

logger = logging.getLogger("slipchannel")
logger.setLevel(logging.INFO)

console_handler = logging.StreamHandler()
console_handler.setFormatter(formatter)
logger.addHandler(console_handler)


@contextmanager
def command_log(command: str, directory: Path) -> Iterator[Path]:
    """Copy every record logged while one command runs into <directory>/<command>_<timestamp>.log."""
    current_time = datetime.now().strftime("%Y%m%d_%H%M%S")
    path = Path(directory) / f"{command}_{current_time}.log"
    file_handler = logging.FileHandler(path, encoding="utf-8")
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)
    try:
        yield path
    finally:
        logger.removeHandler(file_handler)
        file_handler.close()
