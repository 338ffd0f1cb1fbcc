"""
File utilities: atomic writes and stale temp-file cleanup.
"""
import os
import tempfile
from pathlib import Path

import aiofiles
import aiofiles.os

from utils.logger import logger


def ensure_dir(directory: Path | str) -> Path:
    """Create a directory (and parents) if missing."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def atomic_write_text(path: Path | str, text: str) -> Path:
    """
    Write text to a file via a temp file in the same directory and a rename.

    Args:
        path: Destination file
        text: Content

    Returns:
        Destination path
    """
    path = Path(path)
    ensure_dir(path.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except Exception:
        delete_file(tmp_name)
        raise
    return path


async def atomic_write_text_async(path: Path | str, text: str) -> Path:
    """
    Async variant of atomic_write_text for the bench worker pool.

    Args:
        path: Destination file
        text: Content

    Returns:
        Destination path
    """
    path = Path(path)
    ensure_dir(path.parent)
    tmp_path = path.with_name(f".{path.name}.{os.getpid()}.{id(text)}.tmp")
    try:
        async with aiofiles.open(tmp_path, "w", encoding="utf-8") as handle:
            await handle.write(text)
        await aiofiles.os.replace(tmp_path, path)
    except Exception:
        delete_file(tmp_path)
        raise
    return path


def delete_file(file_path: Path | str) -> bool:
    """
    Delete a file safely.

    Args:
        file_path: Path to file

    Returns:
        True if deleted, False otherwise
    """
    try:
        path = Path(file_path)
        if path.exists() and path.is_file():
            path.unlink()
            return True
    except Exception as e:
        logger.error(f"Failed to delete {file_path}: {e}")
    return False


def cleanup_temp_files(directory: Path | str) -> int:
    """
    Delete leftover *.tmp files from interrupted atomic writes.

    Args:
        directory: Directory to clean

    Returns:
        Number of files deleted
    """
    deleted = 0
    directory = Path(directory)
    if not directory.is_dir():
        return 0
    for file_path in directory.glob(".*.tmp"):
        if delete_file(file_path):
            deleted += 1
            logger.info(f"Cleanup: deleted stale temp file {file_path.name}")
    return deleted
