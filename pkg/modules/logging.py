import logging
import os
import sys


def setup_logging(log_dir, log_file_name, verbose=False):
    """
    Set up logging for one pdmn invocation.
    Logs go to stderr, and are appended to a file when a log directory is configured.
    """
    level = logging.INFO if verbose else logging.WARNING

    # Create a logger
    logger = logging.getLogger()
    logger.setLevel(level)

    # Remove any existing handlers to avoid duplication
    if logger.hasHandlers():
        logger.handlers.clear()

    formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")

    # Console handler - stderr only, stdout carries program output
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_dir:
        # File handler - Append mode to keep previous logs
        os.makedirs(log_dir, exist_ok=True)
        log_path = os.path.join(log_dir, log_file_name)
        file_handler = logging.FileHandler(log_path, mode="a", encoding="utf-8")
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
        logger.setLevel(logging.INFO)
        logging.info(f"Logging initialized. Logs will be appended to: {log_path}")
